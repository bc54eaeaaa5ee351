//! Structure-preserving doubling algorithm for the continuous-time algebraic
//! Riccati equation AᵀX + XA − XGX + H = 0 with G, H ⪰ 0.
//!
//! First standard form: with A_γ = A − γI and W = A_γ + G A_γ⁻ᵀ H,
//!
//! ```text
//! E₀ = I + 2γ W⁻¹,   G₀ = 2γ W⁻¹ G A_γ⁻ᵀ,   H₀ = 2γ A_γ⁻ᵀ H W⁻¹,
//! E_{k+1} = E_k (I + G_k H_k)⁻¹ E_k,
//! G_{k+1} = G_k + E_k (I + G_k H_k)⁻¹ G_k E_kᵀ,
//! H_{k+1} = H_k + E_kᵀ H_k (I + G_k H_k)⁻¹ E_k,
//! ```
//!
//! and H_k converges quadratically to the stabilizing solution. H_k is
//! nondecreasing in the Loewner order along the way, which the tests lean on.

use nalgebra::DMatrix;

use crate::error::{Result, ScareError};
use crate::linalg::{self, lu_solve_rcond};
use crate::problem::SymMatrix;
use crate::solvers::SolverConfig;

/// Stabilizing CARE solution together with iteration metadata.
#[derive(Clone, Debug)]
pub struct CareSolution {
    pub x: SymMatrix,
    /// Number of doubling steps (total over shift retries).
    pub iterations: usize,
    /// ‖AᵀX + XA − XGX + H‖_F / (2‖AᵀX‖_F + ‖XGX‖_F + ‖H‖_F).
    pub care_residual: f64,
}

/// Default doubling shift, kept away from zero and scaled to the problem.
pub fn default_gamma(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    (a.norm() / n.sqrt()).max(1.0)
}

/// Solve AᵀX + XA − XGX + H = 0 for the stabilizing PSD solution.
///
/// The caller is responsible for (A, G) stabilizable and (H, A) detectable;
/// within the fixed-point outer loop both hold by construction. A singular
/// doubling initialization is retried with a doubled shift up to five times.
pub fn solve_care(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<CareSolution> {
    let n = a.nrows();
    if a.ncols() != n || g.shape() != (n, n) || h.shape() != (n, n) {
        return Err(ScareError::DimensionMismatch(
            "solve_care expects square coefficients of equal order".into(),
        ));
    }
    let mut gamma = cfg.gamma.unwrap_or_else(|| default_gamma(a));
    let mut total_steps = 0;
    let mut attempts = 0;
    loop {
        match doubling(a, g, h, gamma, cfg, &mut total_steps) {
            Ok(x) => {
                let care_residual = care_nres(a, g, h, &x);
                return Ok(CareSolution {
                    x,
                    iterations: total_steps,
                    care_residual,
                });
            }
            Err(ScareError::SingularPivot { .. }) if attempts < 5 => {
                attempts += 1;
                gamma *= 2.0;
            }
            Err(ScareError::SingularPivot { .. }) => {
                return Err(ScareError::SingularPivot { attempts })
            }
            Err(e) => return Err(e),
        }
    }
}

fn doubling(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
    cfg: &SolverConfig,
    total_steps: &mut usize,
) -> Result<SymMatrix> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let a_gamma = a - gamma * &eye;
    let singular = || ScareError::SingularPivot { attempts: 0 };

    // A_γ⁻ᵀ H via one transposed solve.
    let (agt_inv_h, _) = lu_solve_rcond(&a_gamma.transpose(), h).ok_or_else(singular)?;
    let w = &a_gamma + g * &agt_inv_h;
    let (w_inv_stack, _) = lu_solve_rcond(&w, &{
        // Solve W⁻¹ [I | G] in one factorization.
        let mut rhs = DMatrix::zeros(n, 2 * n);
        rhs.view_mut((0, 0), (n, n)).copy_from(&eye);
        rhs.view_mut((0, n), (n, n)).copy_from(g);
        rhs
    })
    .ok_or_else(singular)?;
    let w_inv = w_inv_stack.view((0, 0), (n, n)).into_owned();
    let w_inv_g = w_inv_stack.view((0, n), (n, n)).into_owned();

    let (agt_inv, _) = lu_solve_rcond(&a_gamma.transpose(), &eye).ok_or_else(singular)?;
    let mut e_k = &eye + 2.0 * gamma * &w_inv;
    let mut g_k = linalg::symmetrize(&(2.0 * gamma * &w_inv_g * &agt_inv));
    let mut h_k = linalg::symmetrize(&(2.0 * gamma * &agt_inv_h * &w_inv));

    for _ in 0..cfg.max_doubling {
        *total_steps += 1;
        // E_k → 0 quadratically; once it underflows the iterate is final even
        // if the pivot happens to be singular.
        let e_scale = e_k.norm();
        if e_scale * e_scale <= f64::MIN_POSITIVE {
            return Ok(SymMatrix::new(h_k));
        }
        let pivot = &eye + &g_k * &h_k;
        let solved = lu_solve_rcond(&pivot, &{
            let mut rhs = DMatrix::zeros(n, 2 * n);
            rhs.view_mut((0, 0), (n, n)).copy_from(&e_k);
            rhs.view_mut((0, n), (n, n)).copy_from(&g_k);
            rhs
        });
        let (piv_stack, _) = match solved {
            Some(v) => v,
            None => {
                // Treat as converged when the pending update is negligible.
                if e_scale <= (f64::EPSILON * (1.0 + h_k.norm())).sqrt() {
                    return Ok(SymMatrix::new(h_k));
                }
                return Err(ScareError::SingularPivot { attempts: 0 });
            }
        };
        let piv_e = piv_stack.view((0, 0), (n, n)).into_owned();
        let piv_g = piv_stack.view((0, n), (n, n)).into_owned();

        let h_next = linalg::symmetrize(&(&h_k + e_k.transpose() * &h_k * &piv_e));
        let g_next = linalg::symmetrize(&(&g_k + &e_k * &piv_g * e_k.transpose()));
        let e_next = &e_k * piv_e;

        let change = (&h_next - &h_k).norm();
        let min_h = linalg::eig_min_sym(&h_next);
        if min_h < -cfg.psd_tol * (1.0 + h_next.norm()) {
            return Err(ScareError::LossOfPsd(min_h));
        }
        e_k = e_next;
        g_k = g_next;
        h_k = h_next;
        if change <= cfg.inner_tol * (1.0 + h_k.norm()) {
            return Ok(SymMatrix::new(h_k));
        }
    }
    Err(ScareError::NotConverged {
        iterations: cfg.max_doubling,
        residual: f64::NAN,
    })
}

/// Normalized CARE residual used in [`CareSolution`].
pub fn care_nres(a: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>, x: &SymMatrix) -> f64 {
    let xm = x.matrix();
    let atx = a.transpose() * xm;
    let xgx = xm * g * xm;
    let res = &atx + atx.transpose() - &xgx + h;
    let denom = 2.0 * atx.norm() + xgx.norm() + h.norm();
    if denom > 0.0 {
        res.norm() / denom
    } else {
        res.norm()
    }
}
