//! Independent brute-force oracles and convergence-premise checkers:
//! Kronecker equation solves, a classical Newton–Kleinman CARE solver, a
//! bisection root finder for scalar problems, Hautus tests, mean-square
//! stability and the R-linear rate certificate.
//!
//! Everything here is diagnostic-path only: small dense problems, no
//! performance contract, size caps enforced as hard errors.

use nalgebra::{Complex, DMatrix};

use crate::error::{Result, ScareError};
use crate::linalg::{self, lu_solve_rcond};
use crate::problem::{
    self, assemble_care, newton_operators, normalized_residual, residual, ScareProblem, SymMatrix,
};

/// Order cap for the vectorized Lyapunov solve (n² dense system).
pub const KRON_LYAP_MAX: usize = 64;
/// Order cap for the Newton–Kleinman CARE oracle.
pub const NEWTON_KLEINMAN_MAX: usize = 32;
/// Cap on n² for vectorized-operator diagnostics.
pub const VECTORIZED_MAX: usize = 4096;
/// Margin used by stability flags: "stable" means spectral abscissa below
/// minus this.
pub const ORACLE_STAB_TOL: f64 = 1e-9;

/// Spectral-radius certificate ρ(ℒ_X̂⁻¹ Ψ_X̂) for the R-linear convergence
/// of the fixed-point outer iteration. Values below one certify R-linear
/// convergence to the solution the operators were built at.
#[derive(Clone, Copy, Debug)]
pub struct RateCertificate {
    pub rho: f64,
    /// Order of the vectorized operators (n²).
    pub dimension: usize,
}

/// Solve EᵀY + YE + C = 0 through the n²×n² system
/// (I ⊗ Eᵀ + Eᵀ ⊗ I) vec(Y) = −vec(C). Exact up to dense-solve rounding.
pub fn kron_lyap_solve(e: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = e.nrows();
    if n > KRON_LYAP_MAX {
        return Err(ScareError::OracleSizeExceeded {
            n,
            cap: KRON_LYAP_MAX,
        });
    }
    if e.ncols() != n || c.shape() != (n, n) {
        return Err(ScareError::DimensionMismatch(
            "kron_lyap_solve expects square matrices of equal order".into(),
        ));
    }
    let op = linalg::lyapunov_operator_matrix(e);
    let rhs_mat = linalg::unvec(&(-linalg::vec_of(c)), n * n, 1);
    let (sol, _) = lu_solve_rcond(&op, &rhs_mat).ok_or(ScareError::SingularLyapunovOperator)?;
    let y = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(SymMatrix::new(y))
}

/// Classical Newton–Kleinman iteration for AᵀX + XA − XGX + H = 0: starting
/// from a stabilizing X₀, each step solves the Lyapunov equation
/// (A − GX_j)ᵀX + X(A − GX_j) = −(H + X_j G X_j) by [`kron_lyap_solve`].
pub fn newton_kleinman_care(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    x0: &SymMatrix,
) -> Result<SymMatrix> {
    let n = a.nrows();
    if n > NEWTON_KLEINMAN_MAX {
        return Err(ScareError::OracleSizeExceeded {
            n,
            cap: NEWTON_KLEINMAN_MAX,
        });
    }
    let mut x = x0.clone();
    for _ in 0..200 {
        let closed = a - g * x.matrix();
        let abscissa = linalg::spectral_abscissa(&closed);
        if abscissa >= 0.0 {
            return Err(ScareError::NotHurwitz(abscissa));
        }
        let rhs = h + x.matrix() * g * x.matrix();
        let x_next = kron_lyap_solve(&closed, &rhs)?;
        let change = (x_next.matrix() - x.matrix()).norm() / (1.0 + x_next.norm());
        x = x_next;
        if change < 1e-14 {
            return Ok(x);
        }
    }
    Err(ScareError::NotConverged {
        iterations: 200,
        residual: f64::NAN,
    })
}

/// Ground-truth root for scalar problems (n = m = 1, any r): bracketed
/// bisection on the scalar residual, returning the nonnegative root whose
/// closed loop a_c − g_c·x is stable.
pub fn scalar_scare_solve(p: &ScareProblem) -> Result<f64> {
    if p.n() != 1 || p.m() != 1 {
        return Err(ScareError::DimensionMismatch(
            "scalar_scare_solve requires n = m = 1".into(),
        ));
    }
    let a = p.a()[(0, 0)];
    let b = p.b()[(0, 0)];
    let q = p.q()[(0, 0)];
    let rho = p.r()[(0, 0)];
    let l = p.l()[(0, 0)];
    let alphas: Vec<f64> = p.a0().iter().map(|m| m[(0, 0)]).collect();
    let betas: Vec<f64> = p.b0().iter().map(|m| m[(0, 0)]).collect();
    let sum_a2: f64 = alphas.iter().map(|v| v * v).sum();
    let sum_ab: f64 = alphas.iter().zip(&betas).map(|(u, v)| u * v).sum();
    let sum_b2: f64 = betas.iter().map(|v| v * v).sum();

    let res = |x: f64| -> f64 {
        let s = x * b + sum_ab * x + l;
        2.0 * a * x + sum_a2 * x + q - s * s / (rho + sum_b2 * x)
    };
    let closed_loop = |x: f64| -> f64 {
        let rc = rho + sum_b2 * x;
        let lc = l + sum_ab * x;
        let a_c = a - b * lc / rc;
        let g_c = b * b / rc;
        a_c - g_c * x
    };

    // Grow the scan window until the residual goes negative, then harvest
    // every sign change on a grid over [0, hi].
    let mut hi = 1.0;
    let mut found_negative = res(hi) <= 0.0;
    while !found_negative && hi < 1e18 {
        hi *= 2.0;
        found_negative = res(hi) <= 0.0;
    }
    if !found_negative && res(0.0).abs() > 1e-13 {
        return Err(ScareError::NoPsdRoot);
    }

    let cells = 1024;
    let mut roots = Vec::new();
    if res(0.0).abs() <= 1e-13 {
        roots.push(0.0);
    }
    let mut prev_x = 0.0;
    let mut prev_f = res(0.0);
    for k in 1..=cells {
        let x = hi * (k as f64) / (cells as f64);
        let f = res(x);
        if f == 0.0 {
            roots.push(x);
        } else if prev_f != 0.0 && prev_f * f < 0.0 {
            roots.push(bisect(&res, prev_x, x));
        }
        prev_x = x;
        prev_f = f;
    }

    roots
        .into_iter()
        .filter(|&x| x >= 0.0 && closed_loop(x) < 0.0)
        .fold(None, |best: Option<f64>, x| match best {
            Some(b) if b >= x => Some(b),
            _ => Some(x),
        })
        .ok_or(ScareError::NoPsdRoot)
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() <= 1e-15 || (hi - lo) <= f64::EPSILON * hi.max(1.0) {
            return mid;
        }
        if flo * fmid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    0.5 * (lo + hi)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

fn rank_with_threshold(m: &DMatrix<Complex<f64>>) -> usize {
    let n = m.nrows().min(m.ncols());
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let tol = (n as f64) * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Hautus test: (A, B) is stabilizable iff rank [A − λI, B] = n for every
/// eigenvalue λ with Re λ ≥ −[`ORACLE_STAB_TOL`].
pub fn hautus_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let eigs = a.complex_eigenvalues();
    let ac = to_complex(a);
    let bc = to_complex(b);
    for lambda in eigs.iter() {
        if lambda.re < -ORACLE_STAB_TOL {
            continue;
        }
        let mut pencil = DMatrix::zeros(n, n + b.ncols());
        pencil
            .view_mut((0, 0), (n, n))
            .copy_from(&(&ac - DMatrix::from_diagonal_element(n, n, *lambda)));
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
        if rank_with_threshold(&pencil) < n {
            return false;
        }
    }
    true
}

/// Dual Hautus test: (C, A) is detectable iff rank [A − λI; C] = n for every
/// eigenvalue λ with Re λ ≥ −[`ORACLE_STAB_TOL`].
pub fn hautus_detectable(c: &DMatrix<f64>, a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let eigs = a.complex_eigenvalues();
    let ac = to_complex(a);
    let cc = to_complex(c);
    for lambda in eigs.iter() {
        if lambda.re < -ORACLE_STAB_TOL {
            continue;
        }
        let rows = n + c.nrows();
        let mut pencil = DMatrix::zeros(rows, n);
        pencil
            .view_mut((0, 0), (n, n))
            .copy_from(&(&ac - DMatrix::from_diagonal_element(n, n, *lambda)));
        pencil.view_mut((n, 0), (c.nrows(), n)).copy_from(&cc);
        if rank_with_threshold(&pencil) < n {
            return false;
        }
    }
    true
}

/// Closed-loop generalized Lyapunov operator on vectorized coordinates:
/// I ⊗ (A+BF)ᵀ + (A+BF)ᵀ ⊗ I + Σᵢ (A₀ⁱ+B₀ⁱF)ᵀ ⊗ (A₀ⁱ+B₀ⁱF)ᵀ.
fn closed_loop_operator(p: &ScareProblem, f: &DMatrix<f64>) -> DMatrix<f64> {
    let closed = p.a() + p.b() * f;
    let mut op = linalg::lyapunov_operator_matrix(&closed);
    for (ai, bi) in p.a0().iter().zip(p.b0()) {
        let ci_t = (ai + bi * f).transpose();
        op += ci_t.kronecker(&ci_t);
    }
    op
}

/// Mean-square stability of the closed loop under gain F: the spectral
/// abscissa of the vectorized generalized Lyapunov operator is negative.
pub fn mean_square_stable(p: &ScareProblem, f: &DMatrix<f64>) -> Result<bool> {
    let n = p.n();
    if n * n > VECTORIZED_MAX {
        return Err(ScareError::OracleSizeExceeded {
            n,
            cap: VECTORIZED_MAX,
        });
    }
    if f.shape() != (p.m(), n) {
        return Err(ScareError::DimensionMismatch(format!(
            "gain must be {}x{}",
            p.m(),
            n
        )));
    }
    let op = closed_loop_operator(p, f);
    Ok(linalg::spectral_abscissa(&op) < -ORACLE_STAB_TOL)
}

/// Fréchet derivatives of the frozen-coefficient maps at X, as linear
/// operators in the direction Z:
///
/// ```text
/// H_c'(X)(Z) = [I, −L_cR_c⁻¹] Π(Z) [I; −R_c⁻¹L_cᵀ]
/// G_c'(X)(Z) = −B R_c⁻¹ Π₂₂(Z) R_c⁻¹ Bᵀ
/// A_c'(X)(Z) =  B R_c⁻¹ Π₂₂(Z) R_c⁻¹ L_cᵀ − B R_c⁻¹ Π₁₂(Z)ᵀ
/// ```
#[derive(Clone, Debug)]
pub struct FrechetAt {
    problem: ScareProblem,
    rcinv_lt: DMatrix<f64>,
    rcinv_bt: DMatrix<f64>,
}

impl FrechetAt {
    pub fn new(p: &ScareProblem, x: &SymMatrix) -> Result<Self> {
        let cc = assemble_care(p, x)?;
        let solve = crate::linalg::SymSolve::new(&cc.r_c)?;
        Ok(FrechetAt {
            problem: p.clone(),
            rcinv_lt: solve.solve(&cc.l_c.transpose()),
            rcinv_bt: solve.solve(&p.b().transpose()),
        })
    }

    pub fn h_prime(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let (pi11, pi12, pi22) = problem::pi_raw(&self.problem, z);
        &pi11 - &pi12 * &self.rcinv_lt - self.rcinv_lt.transpose() * pi12.transpose()
            + self.rcinv_lt.transpose() * &pi22 * &self.rcinv_lt
    }

    pub fn g_prime(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let (_, _, pi22) = problem::pi_raw(&self.problem, z);
        -(self.rcinv_bt.transpose() * pi22 * &self.rcinv_bt)
    }

    pub fn a_prime(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let (_, pi12, pi22) = problem::pi_raw(&self.problem, z);
        self.rcinv_bt.transpose() * pi22 * &self.rcinv_lt
            - self.rcinv_bt.transpose() * pi12.transpose()
    }

    /// Ψ_X(Z) = (A_c'(Z))ᵀX + X A_c'(Z) − X G_c'(Z) X + H_c'(Z).
    pub fn psi(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let ap = self.a_prime(z);
        ap.transpose() * x + x * ap - x * self.g_prime(z) * x + self.h_prime(z)
    }
}

/// R-linear rate certificate at a solution X̂: ρ(ℒ_X̂⁻¹ Ψ_X̂) over the
/// vectorized operators, where ℒ_X̂ is the Lyapunov operator of the closed
/// loop Â − ĜX̂ and Ψ_X̂ the Fréchet derivative of the frozen coefficients.
///
/// The vectorization acts on full n² coordinates; symmetric and
/// antisymmetric matrices span invariant subspaces, so when the full-space
/// radius and the symmetric-subspace radius disagree beyond 1e−8 the
/// symmetric one is reported (that is the space the iteration lives on).
pub fn rlinear_rate(p: &ScareProblem, x_hat: &SymMatrix) -> Result<RateCertificate> {
    let n = p.n();
    let dim = n * n;
    if dim > VECTORIZED_MAX {
        return Err(ScareError::OracleSizeExceeded {
            n,
            cap: VECTORIZED_MAX,
        });
    }
    let cc = assemble_care(p, x_hat)?;
    let closed = &cc.a_c - &cc.g_c * x_hat.matrix();
    let l_mat = linalg::lyapunov_operator_matrix(&closed);

    let fr = FrechetAt::new(p, x_hat)?;
    let mut psi_mat = DMatrix::zeros(dim, dim);
    let mut basis = DMatrix::zeros(n, n);
    for col in 0..dim {
        let (i, j) = (col % n, col / n);
        basis[(i, j)] = 1.0;
        let psi = fr.psi(x_hat.matrix(), &basis);
        psi_mat.set_column(col, &linalg::vec_of(&psi));
        basis[(i, j)] = 0.0;
    }

    let (t, _) = lu_solve_rcond(&l_mat, &psi_mat).ok_or(ScareError::SingularLyapunovOperator)?;
    let rho_full = linalg::spectral_radius(&t);

    // Restriction to the symmetric subspace through an orthonormal basis.
    let d_sym = n * (n + 1) / 2;
    let mut s_basis = DMatrix::zeros(dim, d_sym);
    let mut col = 0;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i..n {
            let mut e = DMatrix::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = inv_sqrt2;
                e[(j, i)] = inv_sqrt2;
            }
            s_basis.set_column(col, &linalg::vec_of(&e));
            col += 1;
        }
    }
    let t_sym = s_basis.transpose() * &t * &s_basis;
    let rho_sym = linalg::spectral_radius(&t_sym);

    let rho = if (rho_full - rho_sym).abs() > 1e-8 * (1.0 + rho_full) {
        rho_sym
    } else {
        rho_full
    };
    Ok(RateCertificate {
        rho,
        dimension: dim,
    })
}

/// Premises of the nonincreasing branch: X₀ ⪰ X̂, the frozen closed loop
/// A_c(X₀) − G_c(X₀)X₀ is Hurwitz, and ℛ(X₀) ⪯ 0 (within PSD slack).
pub fn check_decreasing_start(p: &ScareProblem, x0: &SymMatrix, x_hat: &SymMatrix) -> Result<bool> {
    let order_gap = linalg::eig_min_sym(&(x0.matrix() - x_hat.matrix()));
    if order_gap < -problem::DEFAULT_PSD_TOL * (1.0 + x0.norm()) {
        return Ok(false);
    }
    let cc = assemble_care(p, x0)?;
    let closed = &cc.a_c - &cc.g_c * x0.matrix();
    if linalg::spectral_abscissa(&closed) >= 0.0 {
        return Ok(false);
    }
    let res = residual(p, x0)?;
    let res_max = linalg::eig_max_sym(res.matrix());
    Ok(res_max <= problem::DEFAULT_PSD_TOL * (1.0 + res.norm()))
}

/// Premise of the Newton branch: A_{X₀} Hurwitz and ρ(ℒ⁻¹ 𝒫) < 1, where ℒ
/// is the vectorized Lyapunov operator of A_{X₀} and 𝒫 the vectorized map
/// Z ↦ Π_{X₀}(Z) = Σᵢ (A₀ⁱ+B₀ⁱF₀)ᵀ Z (A₀ⁱ+B₀ⁱF₀).
pub fn check_newton_start(p: &ScareProblem, x0: &SymMatrix) -> Result<bool> {
    let n = p.n();
    if n * n > VECTORIZED_MAX {
        return Err(ScareError::OracleSizeExceeded {
            n,
            cap: VECTORIZED_MAX,
        });
    }
    let ops = newton_operators(p, x0)?;
    if linalg::spectral_abscissa(&ops.a_xk) >= 0.0 {
        return Ok(false);
    }
    let l_mat = linalg::lyapunov_operator_matrix(&ops.a_xk);
    let f0 = crate::problem::feedback_gain(p, x0)?;
    let mut p_mat = DMatrix::zeros(n * n, n * n);
    for (ai, bi) in p.a0().iter().zip(p.b0()) {
        let ci_t = (ai + bi * &f0).transpose();
        p_mat += ci_t.kronecker(&ci_t);
    }
    let (t, _) = lu_solve_rcond(&l_mat, &p_mat).ok_or(ScareError::SingularLyapunovOperator)?;
    Ok(linalg::spectral_radius(&t) < 1.0)
}

/// Convenience wrapper used by the benchmark preflight and the `verify`
/// command: NRes at X, feedback stabilization and closed-loop abscissa.
#[derive(Clone, Copy, Debug)]
pub struct VerifyReport {
    pub nres: f64,
    pub mean_square_stable: bool,
    pub closed_loop_abscissa: f64,
}

pub fn verify_solution(p: &ScareProblem, x: &SymMatrix) -> Result<VerifyReport> {
    let rep = normalized_residual(p, x)?;
    let gain = problem::feedback_gain(p, x)?;
    let stable = mean_square_stable(p, &gain)?;
    let cc = assemble_care(p, x)?;
    let closed = &cc.a_c - &cc.g_c * x.matrix();
    Ok(VerifyReport {
        nres: rep.nres,
        mean_square_stable: stable,
        closed_loop_abscissa: linalg::spectral_abscissa(&closed),
    })
}
