//! Small dense linear-algebra helpers shared by the solvers and oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ScareError};

/// Condition-estimate threshold above which a symmetric solve is flagged
/// singular: cond(M) > 1 / (100·ε).
const SINGULAR_COND: f64 = 1.0 / (100.0 * f64::EPSILON);

/// (M + Mᵀ)/2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// ‖M − Mᵀ‖_F.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Max row sum of absolute values (the ∞-norm).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc, &s| acc.max(s))
}

/// Eigenvalues of the symmetrized part, ascending order not guaranteed.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    symmetrize(m).symmetric_eigen().eigenvalues
}

/// Smallest eigenvalue of the symmetrized part.
pub fn eig_min_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Largest eigenvalue of the symmetrized part.
pub fn eig_max_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)
        .iter()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
}

/// Loewner-order test: λ_min(M) ≥ −tol·(1 + ‖M‖_F).
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    eig_min_sym(m) >= -tol * (1.0 + m.norm())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |a, z| a.max(z.re))
}

/// Largest modulus over the spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0, |a: f64, z| a.max(z.norm()))
}

/// vec(M), column-major stacking (nalgebra's native layout).
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Matrix of the Lyapunov operator Z ↦ AᵀZ + ZA on vectorized coordinates:
/// I ⊗ Aᵀ + Aᵀ ⊗ I.
pub fn lyapunov_operator_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    eye.kronecker(&at) + at.kronecker(&eye)
}

/// (X ⊗ I_b) · M without materializing the Kronecker factor.
pub fn left_mul_kron_identity(x: &DMatrix<f64>, m: &DMatrix<f64>, b: usize) -> DMatrix<f64> {
    let n = x.nrows();
    debug_assert_eq!(m.nrows(), n * b);
    let mut out = DMatrix::zeros(n * b, m.ncols());
    for a in 0..n {
        let mut dest = out.rows_mut(a * b, b);
        for c in 0..n {
            let xac = x[(a, c)];
            if xac != 0.0 {
                dest.zip_apply(&m.rows(c * b, b), |d, s| *d += xac * s);
            }
        }
    }
    out
}

/// M · (X ⊗ I_b) without materializing the Kronecker factor.
pub fn right_mul_kron_identity(m: &DMatrix<f64>, x: &DMatrix<f64>, b: usize) -> DMatrix<f64> {
    let n = x.nrows();
    debug_assert_eq!(m.ncols(), n * b);
    let mut out = DMatrix::zeros(m.nrows(), n * b);
    for c in 0..n {
        let mut dest = out.columns_mut(c * b, b);
        for a in 0..n {
            let xac = x[(a, c)];
            if xac != 0.0 {
                dest.zip_apply(&m.columns(a * b, b), |d, s| *d += xac * s);
            }
        }
    }
    out
}

/// Linear solve backed by a symmetric eigendecomposition, with a hard
/// condition-number gate. Used for every R + Π₂₂(X) inverse.
pub(crate) struct SymSolve {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl SymSolve {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let eig = symmetrize(m).symmetric_eigen();
        let amax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let amin = eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v.abs()));
        let cond = if amin > 0.0 { amax / amin } else { f64::INFINITY };
        if amax == 0.0 || cond > SINGULAR_COND {
            return Err(ScareError::SingularWeight { cond });
        }
        Ok(SymSolve {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    /// M⁻¹ · rhs.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut w = self.vectors.transpose() * rhs;
        for i in 0..w.nrows() {
            let inv = 1.0 / self.values[i];
            w.row_mut(i).scale_mut(inv);
        }
        &self.vectors * w
    }
}

/// LU solve with a crude reciprocal-condition estimate from the U diagonal.
/// Returns `None` when the factor is numerically rank deficient.
pub(crate) fn lu_solve_rcond(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if dmax == 0.0 || dmin / dmax < 100.0 * f64::EPSILON {
        return None;
    }
    lu.solve(rhs).map(|s| (s, dmin / dmax))
}
