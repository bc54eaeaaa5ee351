//! Doubling solver for the Lyapunov equation EᵀY + YE + C = 0 with E
//! Hurwitz, via the Möbius transform g(z) = (z+α)/(z−α) that turns it into
//! the discrete-time fixed point Y = A_dᵀ Y A_d + H_d.

use nalgebra::DMatrix;

use crate::error::{Result, ScareError};
use crate::linalg::{self, lu_solve_rcond};
use crate::problem::SymMatrix;
use crate::solvers::SolverConfig;

/// Default Cayley shift, mirroring the CARE solver's heuristic.
pub fn default_alpha(e: &DMatrix<f64>) -> f64 {
    let n = e.nrows().max(1) as f64;
    (e.norm() / n.sqrt()).max(1.0)
}

/// Cayley/Möbius image of the Lyapunov equation:
/// A_d = I + 2α(E − αI)⁻¹ and H_d = 2α(Eᵀ − αI)⁻¹ C (E − αI)⁻¹, so that the
/// solution of EᵀY + YE + C = 0 is the fixed point Y = A_dᵀ Y A_d + H_d.
pub fn cayley_dare_form(
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = e.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let shifted = e - alpha * &eye;
    let (inv, _) = lu_solve_rcond(&shifted, &eye).ok_or(ScareError::SingularShift)?;
    let a_d = &eye + 2.0 * alpha * &inv;
    let h_d = linalg::symmetrize(&(2.0 * alpha * inv.transpose() * c * &inv));
    Ok((a_d, h_d))
}

/// Solve EᵀY + YE + C = 0 by squaring the Cayley image:
/// E₀ = A_d, Y₀ = H_d, then E_{k+1} = E_k², Y_{k+1} = Y_k + E_kᵀY_kE_k until
/// the normalized residual ‖EᵀY + YE + C‖_F / (2‖EᵀY‖_F + ‖C‖_F) drops below
/// `cfg.inner_tol`. The returned Y is symmetric, and PSD whenever C ⪰ 0.
pub fn solve_lyapunov(
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<SymMatrix> {
    let n = e.nrows();
    if e.ncols() != n || c.shape() != (n, n) {
        return Err(ScareError::DimensionMismatch(
            "solve_lyapunov expects square coefficients of equal order".into(),
        ));
    }
    if n <= cfg.hurwitz_check_max {
        let abscissa = linalg::spectral_abscissa(e);
        if abscissa >= -cfg.stab_tol {
            return Err(ScareError::NotHurwitz(abscissa));
        }
    }

    let (mut e_k, mut y_k) = cayley_dare_form(e, c, alpha)?;
    let c_norm = c.norm();
    let mut last_res = f64::INFINITY;
    for _ in 0..cfg.max_doubling {
        let ety = e.transpose() * &y_k;
        let res = (&ety + ety.transpose() + c).norm();
        let denom = 2.0 * ety.norm() + c_norm;
        last_res = if denom > 0.0 { res / denom } else { res };
        if last_res <= cfg.inner_tol {
            return Ok(SymMatrix::new(y_k));
        }
        let update = e_k.transpose() * &y_k * &e_k;
        // Once the pending increment is below roundoff the iterate is final:
        // the residual sits at its floating-point floor.
        if update.norm() <= f64::EPSILON * (1.0 + y_k.norm()) {
            return Ok(SymMatrix::new(y_k));
        }
        y_k = linalg::symmetrize(&(&y_k + update));
        // Divergence guard for large problems that skipped the eigenvalue
        // pre-check: the squared iterate of a Cayley image must contract.
        let growth = e_k.norm();
        e_k = &e_k * &e_k;
        if n > cfg.hurwitz_check_max && e_k.norm() > growth.max(1.0) * 1e8 {
            return Err(ScareError::NotHurwitz(f64::NAN));
        }
    }
    // One final acceptance check: doubling may land exactly on the last step.
    let ety = e.transpose() * &y_k;
    let res = (&ety + ety.transpose() + c).norm();
    let denom = 2.0 * ety.norm() + c_norm;
    let nres = if denom > 0.0 { res / denom } else { res };
    if nres <= cfg.inner_tol {
        return Ok(SymMatrix::new(y_k));
    }
    Err(ScareError::NotConverged {
        iterations: cfg.max_doubling,
        residual: nres.min(last_res),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::NormalSampler;
    use crate::oracle;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_lyapunov() {
        let y = solve_lyapunov(&one(-1.0), &one(2.0), 1.0, &SolverConfig::default()).unwrap();
        assert!((y[(0, 0)] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn diagonal_lyapunov() {
        let e = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let y = solve_lyapunov(&e, &DMatrix::identity(2, 2), 1.5, &SolverConfig::default())
            .unwrap();
        assert!((y[(0, 0)] - 0.5).abs() < 1e-13);
        assert!((y[(1, 1)] - 0.25).abs() < 1e-13);
        assert!(y[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hurwitz() {
        assert!(matches!(
            solve_lyapunov(&one(0.5), &one(1.0), 1.0, &SolverConfig::default()),
            Err(ScareError::NotHurwitz(_))
        ));
    }

    #[test]
    fn cayley_scalar_and_fixed_point_identity() {
        // e = −1, α = 1: A_d = 0, H_d = c/2, and Y = c/2 solves −2Y + c = 0.
        let (a_d, h_d) = cayley_dare_form(&one(-1.0), &one(3.0), 1.0).unwrap();
        assert!(a_d[(0, 0)].abs() < 1e-15);
        assert!((h_d[(0, 0)] - 1.5).abs() < 1e-15);

        // The solved Y satisfies the discrete equation on random instances.
        let mut sampler = NormalSampler::new(0xCA11);
        for _ in 0..10 {
            let n = 4;
            let raw = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
            let e = raw - 4.0 * DMatrix::<f64>::identity(n, n);
            let f = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
            let c = linalg::symmetrize(&(&f * f.transpose()));
            let alpha = default_alpha(&e);
            let y = solve_lyapunov(&e, &c, alpha, &SolverConfig::default()).unwrap();
            let (a_d, h_d) = cayley_dare_form(&e, &c, alpha).unwrap();
            let gap = (y.matrix() - a_d.transpose() * y.matrix() * &a_d - h_d).norm();
            assert!(gap <= 1e-11 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn alpha_invariance_of_the_solution() {
        let mut sampler = NormalSampler::new(0xA1FA);
        let n = 5;
        let raw = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
        let e = raw - 4.0 * DMatrix::<f64>::identity(n, n);
        let f = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
        let c = linalg::symmetrize(&(&f * f.transpose()));
        let alpha = default_alpha(&e);
        let cfg = SolverConfig::default();
        let y1 = solve_lyapunov(&e, &c, alpha, &cfg).unwrap();
        let y2 = solve_lyapunov(&e, &c, 2.0 * alpha, &cfg).unwrap();
        assert!((y1.matrix() - y2.matrix()).norm() <= 1e-10 * (1.0 + y1.norm()));
    }

    #[test]
    fn cayley_image_is_contractive_for_hurwitz_input() {
        let mut sampler = NormalSampler::new(0x5AFE);
        for _ in 0..10 {
            let n = 6;
            let raw = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
            let e = raw - 5.0 * DMatrix::<f64>::identity(n, n);
            if linalg::spectral_abscissa(&e) >= 0.0 {
                continue;
            }
            let (a_d, _) = cayley_dare_form(&e, &DMatrix::identity(n, n), default_alpha(&e))
                .unwrap();
            assert!(linalg::spectral_radius(&a_d) < 1.0);
        }
    }

    #[test]
    fn matches_kronecker_oracle_on_random_hurwitz_instances() {
        let mut sampler = NormalSampler::new(0x0AC1E);
        for _ in 0..10 {
            let n = 10;
            let raw = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
            let e = raw - 6.0 * DMatrix::<f64>::identity(n, n);
            let f = DMatrix::from_fn(n, n, |_, _| sampler.next_normal());
            let c = linalg::symmetrize(&(&f * f.transpose()));
            let y = solve_lyapunov(&e, &c, default_alpha(&e), &SolverConfig::default()).unwrap();
            let oracle_y = oracle::kron_lyap_solve(&e, &c).unwrap();
            let rel = (y.matrix() - oracle_y.matrix()).norm() / (1.0 + oracle_y.norm());
            assert!(rel < 1e-10, "relative gap {rel}");
        }
    }

    #[test]
    fn monotone_in_loewner_order_along_doubling() {
        // Y_k is nondecreasing: compare truncated runs at growing caps.
        let e = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, -1.0, 0.5, 0.0, 0.0, -3.0]);
        let c = DMatrix::identity(3, 3);
        let mut prev: Option<SymMatrix> = None;
        for cap in 1..10 {
            let cfg = SolverConfig {
                max_doubling: cap,
                inner_tol: 0.0,
                ..SolverConfig::default()
            };
            let y = match solve_lyapunov(&e, &c, 1.0, &cfg) {
                Ok(y) => y,
                Err(_) => continue,
            };
            if let Some(p) = &prev {
                assert!(linalg::eig_min_sym(&(y.matrix() - p.matrix())) >= -1e-12);
            }
            prev = Some(y);
        }
    }
}
