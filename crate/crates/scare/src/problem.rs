//! Problem data model: the SCARE coefficient bundle, the Π operator, frozen
//! CARE coefficients, residuals and the Newton-step operators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScareError};
use crate::linalg::{self, SymSolve};

/// Default slack for positive-semidefiniteness checks: a matrix counts as
/// PSD when λ_min ≥ −psd_tol·(1 + ‖M‖_F).
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// Symmetry tolerance accepted on input matrices before they are snapped to
/// (M + Mᵀ)/2.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// A square matrix kept symmetric by construction. Every constructor stores
/// (M + Mᵀ)/2 so Loewner-order comparisons stay meaningful under rounding.
/// Serializes as a row-major nested array.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        rows_from_matrix(&self.m).serialize(serializer)
    }
}

impl SymMatrix {
    /// Symmetrize and wrap. Panics if the matrix is not square.
    pub fn new(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "SymMatrix requires a square matrix");
        SymMatrix {
            m: linalg::symmetrize(&m),
        }
    }

    /// Wrap after checking ‖M − Mᵀ‖_F ≤ tol·(1 + ‖M‖_F).
    pub fn try_new(m: DMatrix<f64>, name: &'static str, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(ScareError::DimensionMismatch(format!(
                "{name}: expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = linalg::asymmetry(&m);
        if asym > tol * (1.0 + m.norm()) {
            return Err(ScareError::NotSymmetric {
                name,
                asymmetry: asym,
            });
        }
        Ok(SymMatrix::new(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }
}

impl std::ops::Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl From<SymMatrix> for DMatrix<f64> {
    fn from(s: SymMatrix) -> DMatrix<f64> {
        s.m
    }
}

/// Coefficient bundle (A, B, Q, R, L, {A₀ⁱ}, {B₀ⁱ}) of one SCARE instance.
///
/// Construction validates dimensions, symmetry of Q and R, positive
/// definiteness of R and positive semidefiniteness of Q − L R⁻¹ Lᵀ.
/// `r = 0` noise channels are allowed and reduce everything to a
/// deterministic CARE.
#[derive(Clone, Debug, PartialEq)]
pub struct ScareProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    l: DMatrix<f64>,
    a0: Vec<DMatrix<f64>>,
    b0: Vec<DMatrix<f64>>,
}

impl ScareProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        l: DMatrix<f64>,
        a0: Vec<DMatrix<f64>>,
        b0: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let dim_err = |what: String| Err(ScareError::DimensionMismatch(what));
        if a.ncols() != n {
            return dim_err(format!("A must be square, got {}x{}", n, a.ncols()));
        }
        if b.nrows() != n {
            return dim_err(format!("B must have {} rows, got {}", n, b.nrows()));
        }
        if q.shape() != (n, n) {
            return dim_err(format!("Q must be {n}x{n}"));
        }
        if r.shape() != (m, m) {
            return dim_err(format!("R must be {m}x{m}"));
        }
        if l.shape() != (n, m) {
            return dim_err(format!("L must be {n}x{m}"));
        }
        if a0.len() != b0.len() {
            return dim_err(format!(
                "noise lists must have equal length, got {} vs {}",
                a0.len(),
                b0.len()
            ));
        }
        for (i, ai) in a0.iter().enumerate() {
            if ai.shape() != (n, n) {
                return dim_err(format!("A0[{i}] must be {n}x{n}"));
            }
        }
        for (i, bi) in b0.iter().enumerate() {
            if bi.shape() != (n, m) {
                return dim_err(format!("B0[{i}] must be {n}x{m}"));
            }
        }

        let q = SymMatrix::try_new(q, "Q", SYMMETRY_TOL)?.into_matrix();
        let r = SymMatrix::try_new(r, "R", SYMMETRY_TOL)?.into_matrix();

        let r_min = linalg::eig_min_sym(&r);
        if r_min <= 0.0 {
            return Err(ScareError::WeightNotPositiveDefinite(r_min));
        }
        let rinv_lt = SymSolve::new(&r)?.solve(&l.transpose());
        let cost = linalg::symmetrize(&(&q - &l * rinv_lt));
        let cost_min = linalg::eig_min_sym(&cost);
        if cost_min < -DEFAULT_PSD_TOL * (1.0 + cost.norm()) {
            return Err(ScareError::CostNotPsd(cost_min));
        }

        Ok(ScareProblem {
            a,
            b,
            q,
            r,
            l,
            a0,
            b0,
        })
    }

    /// Deterministic problem: no noise channels, giving the classical CARE.
    pub fn without_noise(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        l: DMatrix<f64>,
    ) -> Result<Self> {
        ScareProblem::new(a, b, q, r, l, Vec::new(), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of noise channels.
    pub fn noise_count(&self) -> usize {
        self.a0.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn a0(&self) -> &[DMatrix<f64>] {
        &self.a0
    }

    pub fn b0(&self) -> &[DMatrix<f64>] {
        &self.b0
    }

    /// Parse the JSON problem format: integer fields `n`, `m`, `r`; matrices
    /// `A`, `B`, `Q`, `R`, `L` as row-major nested arrays; `A0`/`B0` as
    /// length-`r` lists of matrices. A missing `L` defaults to zero.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        file.into_problem()
    }

    pub fn from_json_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let file: ProblemFile = serde_json::from_reader(reader)?;
        file.into_problem()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ProblemFile::from_problem(self))
            .expect("problem serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    m: usize,
    r: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r_weight: Vec<Vec<f64>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    l: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A0", default)]
    a0: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B0", default)]
    b0: Vec<Vec<Vec<f64>>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], nr: usize, nc: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nr || rows.iter().any(|row| row.len() != nc) {
        return Err(ScareError::InvalidProblem(format!(
            "{name} must be a {nr}x{nc} row-major array"
        )));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl ProblemFile {
    fn into_problem(self) -> Result<ScareProblem> {
        let (n, m, r) = (self.n, self.m, self.r);
        if n == 0 || m == 0 {
            return Err(ScareError::InvalidProblem(
                "n and m must be positive".into(),
            ));
        }
        if self.a0.len() != r || self.b0.len() != r {
            return Err(ScareError::InvalidProblem(format!(
                "A0 and B0 must each hold r = {r} matrices"
            )));
        }
        let a = matrix_from_rows(&self.a, n, n, "A")?;
        let b = matrix_from_rows(&self.b, n, m, "B")?;
        let q = matrix_from_rows(&self.q, n, n, "Q")?;
        let rw = matrix_from_rows(&self.r_weight, m, m, "R")?;
        let l = match &self.l {
            Some(rows) => matrix_from_rows(rows, n, m, "L")?,
            None => DMatrix::zeros(n, m),
        };
        let a0 = self
            .a0
            .iter()
            .enumerate()
            .map(|(i, rows)| matrix_from_rows(rows, n, n, &format!("A0[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let b0 = self
            .b0
            .iter()
            .enumerate()
            .map(|(i, rows)| matrix_from_rows(rows, n, m, &format!("B0[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        ScareProblem::new(a, b, q, rw, l, a0, b0)
    }

    fn from_problem(p: &ScareProblem) -> Self {
        ProblemFile {
            n: p.n(),
            m: p.m(),
            r: p.noise_count(),
            a: rows_from_matrix(&p.a),
            b: rows_from_matrix(&p.b),
            q: rows_from_matrix(&p.q),
            r_weight: rows_from_matrix(&p.r),
            l: Some(rows_from_matrix(&p.l)),
            a0: p.a0.iter().map(rows_from_matrix).collect(),
            b0: p.b0.iter().map(rows_from_matrix).collect(),
        }
    }
}

/// The three blocks of Π(X). When X ⪰ 0 the stacked 2×2 block matrix is PSD
/// and the map is monotone in the Loewner order.
#[derive(Clone, Debug)]
pub struct PiBlocks {
    pub pi11: DMatrix<f64>,
    pub pi12: DMatrix<f64>,
    pub pi22: DMatrix<f64>,
}

impl PiBlocks {
    /// The (n+m)×(n+m) block matrix [Π₁₁ Π₁₂; Π₁₂ᵀ Π₂₂].
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.pi11.nrows();
        let m = self.pi22.nrows();
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.pi11);
        out.view_mut((0, n), (n, m)).copy_from(&self.pi12);
        out.view_mut((n, 0), (m, n))
            .copy_from(&self.pi12.transpose());
        out.view_mut((n, n), (m, m)).copy_from(&self.pi22);
        out
    }
}

/// Raw Π blocks for an arbitrary (not necessarily symmetric) square Z; used
/// by the Fréchet-derivative machinery where Z ranges over a full basis.
pub(crate) fn pi_raw(p: &ScareProblem, z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (p.n(), p.m());
    let mut pi11 = DMatrix::zeros(n, n);
    let mut pi12 = DMatrix::zeros(n, m);
    let mut pi22 = DMatrix::zeros(m, m);
    for (ai, bi) in p.a0.iter().zip(&p.b0) {
        let za = z * ai;
        let zb = z * bi;
        pi11 += ai.transpose() * &za;
        pi12 += ai.transpose() * &zb;
        pi22 += bi.transpose() * &zb;
    }
    (pi11, pi12, pi22)
}

/// Evaluate Π(X): Π₁₁ = Σ A₀ⁱᵀXA₀ⁱ, Π₁₂ = Σ A₀ⁱᵀXB₀ⁱ, Π₂₂ = Σ B₀ⁱᵀXB₀ⁱ.
/// The symmetric blocks are symmetrized to machine precision.
pub fn pi_of(p: &ScareProblem, x: &SymMatrix) -> Result<PiBlocks> {
    check_order(p, x)?;
    let (pi11, pi12, pi22) = pi_raw(p, x.matrix());
    Ok(PiBlocks {
        pi11: linalg::symmetrize(&pi11),
        pi12,
        pi22: linalg::symmetrize(&pi22),
    })
}

/// Frozen CARE data at X: the coefficients of
/// A_cᵀY + YA_c − YG_cY + H_c = 0 together with the weights they came from.
#[derive(Clone, Debug)]
pub struct CareCoefficients {
    pub a_c: DMatrix<f64>,
    pub g_c: DMatrix<f64>,
    pub h_c: DMatrix<f64>,
    pub q_c: DMatrix<f64>,
    pub l_c: DMatrix<f64>,
    pub r_c: DMatrix<f64>,
}

/// Assemble the frozen CARE at X:
/// L_c = L + Π₁₂, R_c = R + Π₂₂, Q_c = Q + Π₁₁,
/// A_c = A − B R_c⁻¹ L_cᵀ, G_c = B R_c⁻¹ Bᵀ, H_c = Q_c − L_c R_c⁻¹ L_cᵀ.
pub fn assemble_care(p: &ScareProblem, x: &SymMatrix) -> Result<CareCoefficients> {
    let pi = pi_of(p, x)?;
    let l_c = &p.l + pi.pi12;
    let r_c = linalg::symmetrize(&(&p.r + pi.pi22));
    let q_c = linalg::symmetrize(&(&p.q + pi.pi11));
    let rc_solve = SymSolve::new(&r_c)?;
    let rcinv_lt = rc_solve.solve(&l_c.transpose());
    let rcinv_bt = rc_solve.solve(&p.b.transpose());
    let a_c = &p.a - &p.b * &rcinv_lt;
    let g_c = linalg::symmetrize(&(&p.b * rcinv_bt));
    let h_c = linalg::symmetrize(&(&q_c - &l_c * rcinv_lt));
    Ok(CareCoefficients {
        a_c,
        g_c,
        h_c,
        q_c,
        l_c,
        r_c,
    })
}

/// SCARE residual ℛ(X) = A_cᵀX + XA_c − XG_cX + H_c with the frozen
/// coefficients evaluated at the same X. Algebraically this equals
/// AᵀX + XA + Q + Π₁₁ − (XB + L + Π₁₂)(R + Π₂₂)⁻¹(XB + L + Π₁₂)ᵀ.
pub fn residual(p: &ScareProblem, x: &SymMatrix) -> Result<SymMatrix> {
    let cc = assemble_care(p, x)?;
    Ok(residual_from_care(&cc, x))
}

pub(crate) fn residual_from_care(cc: &CareCoefficients, x: &SymMatrix) -> SymMatrix {
    let xm = x.matrix();
    let raw = cc.a_c.transpose() * xm + xm * &cc.a_c - xm * &cc.g_c * xm + &cc.h_c;
    SymMatrix::new(raw)
}

/// The four denominator norms of the normalized residual.
#[derive(Clone, Copy, Debug)]
pub struct ResidualComponents {
    /// ‖A·X‖_F (entering the denominator with weight 2)
    pub ax_norm: f64,
    /// ‖Q‖_F
    pub q_norm: f64,
    /// ‖Π₁₁(X)‖_F
    pub pi11_norm: f64,
    /// ‖(XB + L + Π₁₂)(R + Π₂₂)⁻¹(XB + L + Π₁₂)ᵀ‖_F
    pub b_norm: f64,
}

impl ResidualComponents {
    pub fn denominator(&self) -> f64 {
        2.0 * self.ax_norm + self.q_norm + self.pi11_norm + self.b_norm
    }
}

/// Residual together with the scale-invariant quotient
/// NRes = ‖ℛ(X)‖_F / (2‖AX‖_F + ‖Q‖_F + ‖Π₁₁(X)‖_F + ‖𝓑(X)‖_F).
/// When the denominator is exactly zero (the all-zero problem) the quotient
/// degenerates to the plain residual norm.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub residual: SymMatrix,
    pub nres: f64,
    pub components: ResidualComponents,
}

pub fn normalized_residual(p: &ScareProblem, x: &SymMatrix) -> Result<ResidualReport> {
    let pi = pi_of(p, x)?;
    let s = x.matrix() * &p.b + &p.l + &pi.pi12;
    let r_c = linalg::symmetrize(&(&p.r + &pi.pi22));
    let rc_solve = SymSolve::new(&r_c)?;
    let b_op = &s * rc_solve.solve(&s.transpose());

    let xm = x.matrix();
    let raw = p.a.transpose() * xm
        + xm * &p.a
        + &p.q
        + &pi.pi11
        - linalg::symmetrize(&b_op);
    let residual = SymMatrix::new(raw);

    let components = ResidualComponents {
        ax_norm: (&p.a * xm).norm(),
        q_norm: p.q.norm(),
        pi11_norm: pi.pi11.norm(),
        b_norm: b_op.norm(),
    };
    let denom = components.denominator();
    let rnorm = residual.norm();
    let nres = if denom > 0.0 { rnorm / denom } else { rnorm };
    Ok(ResidualReport {
        residual,
        nres,
        components,
    })
}

/// Ω(X) = [−G_c, −A_c; −A_cᵀ, H_c], the Schur complement of the bordered
/// coefficient matrix. Satisfies [X, −I]·Ω(X)·[X; −I] = ℛ(X) and is monotone
/// in X on the PSD cone.
pub fn omega(p: &ScareProblem, x: &SymMatrix) -> Result<SymMatrix> {
    let cc = assemble_care(p, x)?;
    let n = p.n();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&(-&cc.g_c));
    out.view_mut((0, n), (n, n)).copy_from(&(-&cc.a_c));
    out.view_mut((n, 0), (n, n))
        .copy_from(&(-cc.a_c.transpose()));
    out.view_mut((n, n), (n, n)).copy_from(&cc.h_c);
    Ok(SymMatrix::new(out))
}

/// Operators of one Newton step at X_k:
/// S = X_kB + L + Π₁₂(X_k), R_k = R + Π₂₂(X_k), A_{X_k} = A − BR_k⁻¹Sᵀ,
/// P_k = [I; −R_k⁻¹Sᵀ] and M_{X_k} = P_kᵀ [Q L; Lᵀ R] P_k.
#[derive(Clone, Debug)]
pub struct NewtonOperators {
    /// Closed-loop matrix A_{X_k}; equals A_c(X_k) − G_c(X_k)·X_k.
    pub a_xk: DMatrix<f64>,
    pub s_xk: DMatrix<f64>,
    /// Stacked (n+m)×n projector [I; −R_k⁻¹ S_{X_k}ᵀ].
    pub p_k: DMatrix<f64>,
    pub m_xk: DMatrix<f64>,
    pub r_k: DMatrix<f64>,
}

impl NewtonOperators {
    /// P_kᵀ · W · P_k for an (n+m)×(n+m) block weight W.
    pub(crate) fn project(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        self.p_k.transpose() * w * &self.p_k
    }

    /// Π_{X_k}(Z) = P_kᵀ Π(Z) P_k for a symmetric Z.
    pub fn project_pi(&self, p: &ScareProblem, z: &SymMatrix) -> Result<DMatrix<f64>> {
        let pi = pi_of(p, z)?;
        Ok(linalg::symmetrize(&self.project(&pi.stacked())))
    }
}

pub fn newton_operators(p: &ScareProblem, xk: &SymMatrix) -> Result<NewtonOperators> {
    check_order(p, xk)?;
    let pi = pi_of(p, xk)?;
    let s_xk = xk.matrix() * &p.b + &p.l + &pi.pi12;
    let r_k = linalg::symmetrize(&(&p.r + pi.pi22));
    let rk_solve = SymSolve::new(&r_k)?;
    let rkinv_st = rk_solve.solve(&s_xk.transpose());
    let a_xk = &p.a - &p.b * &rkinv_st;

    let (n, m) = (p.n(), p.m());
    let mut p_k = DMatrix::zeros(n + m, n);
    p_k.view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    p_k.view_mut((n, 0), (m, n)).copy_from(&(-rkinv_st));

    let mut weight = DMatrix::zeros(n + m, n + m);
    weight.view_mut((0, 0), (n, n)).copy_from(&p.q);
    weight.view_mut((0, n), (n, m)).copy_from(&p.l);
    weight.view_mut((n, 0), (m, n)).copy_from(&p.l.transpose());
    weight.view_mut((n, n), (m, m)).copy_from(&p.r);
    let m_xk = linalg::symmetrize(&(p_k.transpose() * weight * &p_k));

    Ok(NewtonOperators {
        a_xk,
        s_xk,
        p_k,
        m_xk,
        r_k,
    })
}

/// Right-hand side of the modified Newton step,
/// C_k = Π_{X_k}(X_k) + M_{X_k} = P_kᵀΠ(X_k)P_k + M_{X_k};
/// algebraically equal to H_c(X_k) + X_k G_c(X_k) X_k.
pub fn mnt_rhs(p: &ScareProblem, xk: &SymMatrix) -> Result<SymMatrix> {
    let ops = newton_operators(p, xk)?;
    mnt_rhs_from_ops(p, &ops, xk)
}

pub(crate) fn mnt_rhs_from_ops(
    p: &ScareProblem,
    ops: &NewtonOperators,
    xk: &SymMatrix,
) -> Result<SymMatrix> {
    let projected = ops.project_pi(p, xk)?;
    Ok(SymMatrix::new(projected + &ops.m_xk))
}

/// Optimal feedback gain F = −(R + Π₂₂(X))⁻¹ (BᵀX + Π₁₂(X)ᵀ + Lᵀ).
pub fn feedback_gain(p: &ScareProblem, x: &SymMatrix) -> Result<DMatrix<f64>> {
    check_order(p, x)?;
    let pi = pi_of(p, x)?;
    let r_c = linalg::symmetrize(&(&p.r + pi.pi22));
    let s_t = p.b.transpose() * x.matrix() + pi.pi12.transpose() + p.l.transpose();
    Ok(-SymSolve::new(&r_c)?.solve(&s_t))
}

fn check_order(p: &ScareProblem, x: &SymMatrix) -> Result<()> {
    if x.order() != p.n() {
        return Err(ScareError::DimensionMismatch(format!(
            "X has order {}, problem has n = {}",
            x.order(),
            p.n()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::NormalSampler;

    fn scalar_problem(
        a: f64,
        b: f64,
        q: f64,
        r: f64,
        l: f64,
        noise: &[(f64, f64)],
    ) -> ScareProblem {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        ScareProblem::new(
            one(a),
            one(b),
            one(q),
            one(r),
            one(l),
            noise.iter().map(|&(ai, _)| one(ai)).collect(),
            noise.iter().map(|&(_, bi)| one(bi)).collect(),
        )
        .unwrap()
    }

    /// Example-6.1 coefficients, used as a workhorse fixture.
    pub(crate) fn example1() -> ScareProblem {
        crate::bench::make_benchmark(&crate::bench::BenchmarkSpec::new(crate::bench::BenchId::Ex1))
            .unwrap()
    }

    fn random_psd(n: usize, sampler: &mut NormalSampler) -> SymMatrix {
        let f = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
        SymMatrix::new(f.transpose() * f)
    }

    #[test]
    fn pi_at_zero_is_zero() {
        let p = example1();
        let pi = pi_of(&p, &SymMatrix::zeros(2)).unwrap();
        assert_eq!(pi.pi11, DMatrix::zeros(2, 2));
        assert_eq!(pi.pi12, DMatrix::zeros(2, 2));
        assert_eq!(pi.pi22, DMatrix::zeros(2, 2));
    }

    #[test]
    fn pi_scalar_arithmetic() {
        let p = scalar_problem(0.0, 1.0, 1.0, 1.0, 0.0, &[(2.0, 3.0)]);
        let pi = pi_of(&p, &SymMatrix::identity(1)).unwrap();
        assert_eq!(pi.pi11[(0, 0)], 4.0);
        assert_eq!(pi.pi12[(0, 0)], 6.0);
        assert_eq!(pi.pi22[(0, 0)], 9.0);
    }

    #[test]
    fn pi_matches_direct_summation_on_example1() {
        // Independent entrywise summation, no matrix products.
        let p = example1();
        let x = SymMatrix::identity(2);
        let pi = pi_of(&p, &x).unwrap();
        let n = 2;
        for row in 0..n {
            for col in 0..n {
                let mut direct = 0.0;
                for ai in p.a0() {
                    for s in 0..n {
                        for t in 0..n {
                            direct += ai[(s, row)] * x[(s, t)] * ai[(t, col)];
                        }
                    }
                }
                assert!((pi.pi11[(row, col)] - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn assemble_without_noise_reduces_to_care_data() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_element(1, 1, 2.0);
        let p = ScareProblem::without_noise(a.clone(), b.clone(), q.clone(), r, DMatrix::zeros(2, 1))
            .unwrap();
        let cc = assemble_care(&p, &SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]))).unwrap();
        assert!((&cc.a_c - &a).norm() < 1e-14);
        assert!((&cc.g_c - &b * b.transpose() / 2.0).norm() < 1e-14);
        assert!((&cc.h_c - &q).norm() < 1e-14);
    }

    #[test]
    fn assemble_at_zero_returns_raw_weights() {
        let p = example1();
        let cc = assemble_care(&p, &SymMatrix::zeros(2)).unwrap();
        assert!((&cc.r_c - p.r()).norm() < 1e-15);
        assert!((&cc.l_c - p.l()).norm() < 1e-15);
        assert!((&cc.q_c - p.q()).norm() < 1e-15);
    }

    #[test]
    fn assemble_scalar_against_hand_formulas() {
        // Independent recomputation of every coefficient from the scalar
        // definitions.
        let (a, b, q, r, l, a0, b0, x) = (1.0, 1.0, 1.0, 1.0, 0.0, 0.5, 0.5, 2.0);
        let p = scalar_problem(a, b, q, r, l, &[(a0, b0)]);
        let xs = SymMatrix::new(DMatrix::from_element(1, 1, x));
        let cc = assemble_care(&p, &xs).unwrap();

        let pi11 = a0 * x * a0;
        let pi12 = a0 * x * b0;
        let pi22 = b0 * x * b0;
        let r_c = r + pi22;
        let l_c = l + pi12;
        let q_c = q + pi11;
        assert!((cc.r_c[(0, 0)] - r_c).abs() < 1e-15);
        assert!((cc.l_c[(0, 0)] - l_c).abs() < 1e-15);
        assert!((cc.a_c[(0, 0)] - (a - b * l_c / r_c)).abs() < 1e-15);
        assert!((cc.g_c[(0, 0)] - b * b / r_c).abs() < 1e-15);
        assert!((cc.h_c[(0, 0)] - (q_c - l_c * l_c / r_c)).abs() < 1e-15);
        // Values quoted in the contract: R_c = 1.5, A_c = 1 − 0.5/1.5, ...
        assert!((cc.r_c[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((cc.a_c[(0, 0)] - (1.0 - 0.5 / 1.5)).abs() < 1e-15);
        assert!((cc.g_c[(0, 0)] - 1.0 / 1.5).abs() < 1e-15);
        assert!((cc.h_c[(0, 0)] - (1.0 + 0.5 - 0.25 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn residual_at_zero_is_q() {
        let p = example1();
        let res = residual(&p, &SymMatrix::zeros(2)).unwrap();
        assert!((res.matrix() - p.q()).norm() < 1e-15);
    }

    #[test]
    fn residual_identity_with_omega() {
        // [X, −I] Ω(X) [X; −I] = ℛ(X) for random symmetric X.
        let p = example1();
        let mut sampler = NormalSampler::new(0xA11CE);
        for _ in 0..50 {
            let x = SymMatrix::new(DMatrix::from_fn(2, 2, |_, _| sampler.next_normal()));
            let om = omega(&p, &x).unwrap();
            let mut stack = DMatrix::zeros(4, 2);
            stack.view_mut((0, 0), (2, 2)).copy_from(x.matrix());
            stack
                .view_mut((2, 0), (2, 2))
                .copy_from(&(-DMatrix::<f64>::identity(2, 2)));
            let via_omega = stack.transpose() * om.matrix() * &stack;
            let res = residual(&p, &x).unwrap();
            let scale = 1.0 + om.norm();
            assert!((via_omega - res.matrix()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn omega_monotone_on_psd_pairs() {
        let p = example1();
        let mut sampler = NormalSampler::new(0xBEE);
        for _ in 0..50 {
            let y = random_psd(2, &mut sampler);
            let bump = random_psd(2, &mut sampler);
            let x = SymMatrix::new(y.matrix() + bump.matrix());
            let om_x = omega(&p, &x).unwrap();
            let om_y = omega(&p, &y).unwrap();
            let diff = om_x.matrix() - om_y.matrix();
            let scale = 1.0 + om_x.norm();
            assert!(linalg::eig_min_sym(&diff) >= -1e-10 * scale);
        }
    }

    #[test]
    fn omega_constant_without_noise() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = ScareProblem::without_noise(
            a,
            b,
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let om0 = omega(&p, &SymMatrix::zeros(2)).unwrap();
        let om1 = omega(
            &p,
            &SymMatrix::new(DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 5.0])),
        )
        .unwrap();
        assert!((om0.matrix() - om1.matrix()).norm() < 1e-14);
    }

    #[test]
    fn normalized_residual_of_zero_iterate_is_one() {
        let p = example1();
        let rep = normalized_residual(&p, &SymMatrix::zeros(2)).unwrap();
        assert!((rep.nres - 1.0).abs() < 1e-15);
        assert_eq!(rep.components.ax_norm, 0.0);
        assert_eq!(rep.components.b_norm, 0.0);
    }

    #[test]
    fn normalized_residual_degenerate_denominator() {
        let p = scalar_problem(0.0, 1.0, 0.0, 1.0, 0.0, &[]);
        let rep = normalized_residual(&p, &SymMatrix::zeros(1)).unwrap();
        assert_eq!(rep.components.denominator(), 0.0);
        assert_eq!(rep.nres, 0.0);
    }

    #[test]
    fn newton_operators_zero_state() {
        let p = example1();
        let ops = newton_operators(&p, &SymMatrix::zeros(2)).unwrap();
        assert!(ops.s_xk.norm() < 1e-15);
        assert!((&ops.a_xk - p.a()).norm() < 1e-15);
        assert!((&ops.m_xk - p.q()).norm() < 1e-14);
    }

    #[test]
    fn newton_closed_loop_matches_care_identity() {
        // A_{X_k} = A_c(X_k) − G_c(X_k)·X_k.
        let p = example1();
        let mut sampler = NormalSampler::new(7);
        for _ in 0..20 {
            let x = random_psd(2, &mut sampler);
            let ops = newton_operators(&p, &x).unwrap();
            let cc = assemble_care(&p, &x).unwrap();
            let alt = &cc.a_c - &cc.g_c * x.matrix();
            assert!((&ops.a_xk - &alt).norm() <= 1e-12 * (1.0 + alt.norm()));
        }
    }

    #[test]
    fn newton_operators_scalar_hand_values() {
        let p = scalar_problem(1.0, 1.0, 1.0, 1.0, 0.0, &[(0.5, 0.5)]);
        let x = SymMatrix::new(DMatrix::from_element(1, 1, 2.0));
        let ops = newton_operators(&p, &x).unwrap();
        assert!((ops.s_xk[(0, 0)] - 2.5).abs() < 1e-15);
        assert!((ops.r_k[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((ops.a_xk[(0, 0)] - (1.0 - 2.5 / 1.5)).abs() < 1e-14);
        assert!((ops.m_xk[(0, 0)] - (1.0 + 2.5 / 1.5 * 2.5 / 1.5)).abs() < 1e-14);
    }

    #[test]
    fn mnt_rhs_identities() {
        let p = example1();
        // X_k = 0, L = 0 gives C₀ = Q.
        let c0 = mnt_rhs(&p, &SymMatrix::zeros(2)).unwrap();
        assert!((c0.matrix() - p.q()).norm() < 1e-14);

        // Both routes agree on random PSD iterates.
        let mut sampler = NormalSampler::new(99);
        for _ in 0..20 {
            let x = random_psd(2, &mut sampler);
            let lhs = mnt_rhs(&p, &x).unwrap();
            let cc = assemble_care(&p, &x).unwrap();
            let rhs = &cc.h_c + x.matrix() * &cc.g_c * x.matrix();
            let scale = 1.0 + rhs.norm();
            assert!((lhs.matrix() - rhs).norm() <= 1e-12 * scale);
        }

        // Scalar hand value: C = H_c + X G_c X = 4/3 + 8/3 = 4.
        let ps = scalar_problem(1.0, 1.0, 1.0, 1.0, 0.0, &[(0.5, 0.5)]);
        let c = mnt_rhs(&ps, &SymMatrix::new(DMatrix::from_element(1, 1, 2.0))).unwrap();
        assert!((c[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn feedback_gain_reductions() {
        let p = example1();
        let f0 = feedback_gain(&p, &SymMatrix::zeros(2)).unwrap();
        assert!(f0.norm() < 1e-15);

        // r = 0 gives the deterministic LQR gain −R⁻¹(BᵀX + Lᵀ).
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let det = ScareProblem::without_noise(
            a,
            b.clone(),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let x = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let f = feedback_gain(&det, &x).unwrap();
        let expect = -(b.transpose() * x.matrix()) / 2.0;
        assert!((f - expect).norm() < 1e-14);
    }

    #[test]
    fn pi_monotone_on_psd_pairs() {
        let p = example1();
        let mut sampler = NormalSampler::new(0xD1CE);
        for _ in 0..50 {
            let y = random_psd(2, &mut sampler);
            let bump = random_psd(2, &mut sampler);
            let x = SymMatrix::new(y.matrix() + bump.matrix());
            let diff = pi_of(&p, &x).unwrap().stacked() - pi_of(&p, &y).unwrap().stacked();
            assert!(linalg::eig_min_sym(&diff) >= -1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn problem_validation_rejects_bad_input() {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        // R not positive definite.
        assert!(matches!(
            ScareProblem::without_noise(one(1.0), one(1.0), one(1.0), one(-1.0), one(0.0)),
            Err(ScareError::WeightNotPositiveDefinite(_))
        ));
        // Q − L R⁻¹ Lᵀ indefinite.
        assert!(matches!(
            ScareProblem::without_noise(one(1.0), one(1.0), one(1.0), one(1.0), one(2.0)),
            Err(ScareError::CostNotPsd(_))
        ));
        // Dimension mismatch in the noise list.
        assert!(ScareProblem::new(
            one(1.0),
            one(1.0),
            one(1.0),
            one(1.0),
            one(0.0),
            vec![DMatrix::zeros(2, 2)],
            vec![DMatrix::zeros(1, 1)],
        )
        .is_err());
    }

    #[test]
    fn json_round_trip_and_default_l() {
        let p = example1();
        let text = p.to_json_string();
        let back = ScareProblem::from_json_str(&text).unwrap();
        assert_eq!(p, back);

        let minimal = r#"{
            "n": 1, "m": 1, "r": 0,
            "A": [[-1.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]
        }"#;
        let parsed = ScareProblem::from_json_str(minimal).unwrap();
        assert_eq!(parsed.l(), &DMatrix::zeros(1, 1));

        let bad = r#"{"n": 2, "m": 1, "r": 0, "A": [[1.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}"#;
        assert!(ScareProblem::from_json_str(bad).is_err());
    }

    #[test]
    fn symmetric_outputs_stay_symmetric() {
        let p = example1();
        let mut sampler = NormalSampler::new(0xFACE);
        for _ in 0..10 {
            let x = random_psd(2, &mut sampler);
            let res = residual(&p, &x).unwrap();
            assert!(linalg::asymmetry(res.matrix()) <= 1e-13 * (1.0 + res.norm()));
            let cc = assemble_care(&p, &x).unwrap();
            for m in [&cc.g_c, &cc.h_c, &cc.q_c, &cc.r_c] {
                assert!(linalg::asymmetry(m) <= 1e-13 * (1.0 + m.norm()));
            }
        }
    }
}
