//! Randomized invariants of the operator algebra and the file formats.

use nalgebra::DMatrix;
use proptest::prelude::*;
use scare::linalg;
use scare::lyap_sda;
use scare::problem::{normalized_residual, pi_of, ScareProblem, SymMatrix};
use scare::solvers::SolverConfig;

fn matrix(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * m)
        .prop_map(move |v| DMatrix::from_row_slice(n, m, &v))
}

fn psd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_map(|f| linalg::symmetrize(&(&f * f.transpose())))
}

fn problem(n: usize, m: usize, r: usize) -> impl Strategy<Value = ScareProblem> {
    (
        matrix(n, n),
        matrix(n, m),
        psd(n),
        psd(m),
        prop::collection::vec(matrix(n, n), r),
        prop::collection::vec(matrix(n, m), r),
    )
        .prop_map(move |(a, b, q, r_w, a0, b0)| {
            let r_pd = r_w + 0.5 * DMatrix::<f64>::identity(m, m);
            ScareProblem::new(a, b, q, r_pd, DMatrix::zeros(n, m), a0, b0)
                .expect("generated data is valid")
        })
}

proptest! {
    #[test]
    fn pi_is_monotone_on_the_psd_cone(
        (p, y, bump) in (1usize..=8).prop_flat_map(|n| (problem(n, 2, 2), psd(n), psd(n))),
    ) {
        let x = SymMatrix::new(&y + &bump);
        let y = SymMatrix::new(y);
        let diff = pi_of(&p, &x).unwrap().stacked() - pi_of(&p, &y).unwrap().stacked();
        prop_assert!(linalg::eig_min_sym(&diff) >= -1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn pi_at_psd_argument_is_psd(p in problem(3, 2, 2), x in psd(3)) {
        let stacked = pi_of(&p, &SymMatrix::new(x)).unwrap().stacked();
        prop_assert!(linalg::eig_min_sym(&stacked) >= -1e-10 * (1.0 + stacked.norm()));
    }

    #[test]
    fn normalized_residual_is_nonnegative_and_scale_free(
        p in problem(3, 2, 1),
        x in psd(3),
    ) {
        let rep = normalized_residual(&p, &SymMatrix::new(x)).unwrap();
        prop_assert!(rep.nres >= 0.0);
        let denom = rep.components.denominator();
        if denom > 0.0 {
            prop_assert!((rep.nres - rep.residual.norm() / denom).abs() <= 1e-15 * (1.0 + rep.nres));
        }
    }

    #[test]
    fn problem_json_round_trips(p in problem(2, 2, 2)) {
        let text = p.to_json_string();
        let back = ScareProblem::from_json_str(&text).unwrap();
        prop_assert_eq!(p, back);
    }

    #[test]
    fn sym_matrix_constructor_symmetrizes(f in matrix(4, 4)) {
        let s = SymMatrix::new(f);
        prop_assert!(linalg::asymmetry(s.matrix()) <= 1e-13 * (1.0 + s.norm()));
    }

    #[test]
    fn lyapunov_solution_residual_is_small(raw in matrix(4, 4), c in psd(4)) {
        let shift = linalg::spectral_norm(&raw) + 0.5;
        let e = raw - shift * DMatrix::<f64>::identity(4, 4);
        let y = lyap_sda::solve_lyapunov(&e, &c, lyap_sda::default_alpha(&e), &SolverConfig::default())
            .unwrap();
        let res = e.transpose() * y.matrix() + y.matrix() * &e + &c;
        let denom = 2.0 * (e.transpose() * y.matrix()).norm() + c.norm();
        prop_assert!(res.norm() <= 1e-12 * (1.0 + denom));
    }
}
