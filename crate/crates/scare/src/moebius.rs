//! Möbius-transform fixed point: the SCARE is mapped to a stochastic
//! discrete-time Riccati equation of order n(r+1) and iterated as
//!
//! ```text
//! X₁     = H_γ,
//! X_{k+1} = E_γᵀ (X_k ⊗ I_{r+1}) (I + G_γ (X_k ⊗ I_{r+1}))⁻¹ E_γ + H_γ.
//! ```
//!
//! The enlarged system order is the price of the transform; the iteration
//! also loses symmetry, so every iterate is symmetrized explicitly.

use nalgebra::DMatrix;

use crate::error::{Result, ScareError};
use crate::linalg::{self, lu_solve_rcond};
use crate::problem::{normalized_residual, ScareProblem, SymMatrix};
use crate::solvers::{Phase, SolveCounts, SolverConfig, SolveReport};

/// Row permutation stored as the positions of the ones: the matrix P has
/// `P[target[j], j] = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    target: Vec<usize>,
}

impl Permutation {
    pub fn order(&self) -> usize {
        self.target.len()
    }

    /// P · M.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, &t) in self.target.iter().enumerate() {
            out.row_mut(t).copy_from(&m.row(j));
        }
        out
    }

    /// Pᵀ · M.
    pub fn apply_transpose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, &t) in self.target.iter().enumerate() {
            out.row_mut(j).copy_from(&m.row(t));
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut out = DMatrix::zeros(n, n);
        for (j, &t) in self.target.iter().enumerate() {
            out[(t, j)] = 1.0;
        }
        out
    }
}

/// The shuffle of order n·r with Πᵀ (X ⊗ I_r) Π = I_r ⊗ X for all n×n X.
pub fn shuffle_permutation(n: usize, r: usize) -> Permutation {
    let mut target = vec![0; n * r];
    for a in 0..n {
        for b in 0..r {
            target[b * n + a] = a * r + b;
        }
    }
    Permutation { target }
}

/// The augmented shuffle of order n(r+1) with
/// diag(X, X ⊗ I_r) = Π̂ᵀ (X ⊗ I_{r+1}) Π̂.
pub fn hat_permutation(n: usize, r: usize) -> Permutation {
    let mut target = vec![0; n * (r + 1)];
    for a in 0..n {
        target[a] = a * (r + 1);
        for b in 0..r {
            target[n + a * r + b] = a * (r + 1) + b + 1;
        }
    }
    Permutation { target }
}

/// Assembled data of the transformed discrete-time fixed point.
#[derive(Clone, Debug)]
pub struct MoebiusData {
    /// Â = A − B R⁻¹ Lᵀ.
    pub a_hat: DMatrix<f64>,
    /// B̂ = B R^{−1/2}.
    pub b_hat: DMatrix<f64>,
    /// Full-rank factor with ĈᵀĈ = Q − L R⁻¹ Lᵀ, ℓ×n where ℓ is the
    /// numerical rank.
    pub c_hat: DMatrix<f64>,
    pub perm_shuffle: Permutation,
    pub perm_hat: Permutation,
    /// 𝒜 = Π (stack(A₀ⁱ) − stack(B₀ⁱ) R⁻¹ Lᵀ), nr×n.
    pub script_a: DMatrix<f64>,
    /// ℬ = Π stack(B₀ⁱ) R^{−1/2}, nr×m.
    pub script_b: DMatrix<f64>,
    pub gamma: f64,
    /// Z_γ = Ĉ Â_γ⁻¹ B̂.
    pub z_gamma: DMatrix<f64>,
    pub e_gamma: DMatrix<f64>,
    pub h_gamma: DMatrix<f64>,
    pub g_gamma: DMatrix<f64>,
    /// True when ℓ < n; carried as data, not fatal.
    pub rank_deficient: bool,
}

/// Symmetric inverse square root via eigendecomposition. R must be PD.
fn inv_sqrt_spd(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = linalg::symmetrize(r).symmetric_eigen();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min <= 0.0 {
        return Err(ScareError::WeightNotPositiveDefinite(min));
    }
    let mut scaled = eig.eigenvectors.clone();
    for i in 0..scaled.ncols() {
        let lambda = eig.eigenvalues[i];
        scaled.column_mut(i).scale_mut(1.0 / lambda.sqrt());
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Full-rank factor Ĉ with ĈᵀĈ = S for a PSD S: symmetric eigendecomposition
/// keeping eigenpairs above n·ε·λ_max, Ĉ = Λ^{1/2} Vᵀ on the kept subspace.
fn full_rank_factor(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let eig = linalg::symmetrize(s).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let tol = (n as f64) * f64::EPSILON * lmax;
    let kept: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let mut c = DMatrix::zeros(kept.len(), n);
    for (row, &i) in kept.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        for j in 0..n {
            c[(row, j)] = scale * eig.eigenvectors[(j, i)];
        }
    }
    c
}

/// Assemble E_γ, H_γ, G_γ and the shuffles for the given shift. Fails with
/// [`ScareError::SingularShift`] when Â − γI is numerically singular.
pub fn build_moebius(p: &ScareProblem, gamma: f64) -> Result<MoebiusData> {
    let n = p.n();
    let m = p.m();
    let r = p.noise_count();

    let r_solve = linalg::SymSolve::new(p.r())?;
    let rinv_lt = r_solve.solve(&p.l().transpose());
    let r_inv_sqrt = inv_sqrt_spd(p.r())?;

    let a_hat = p.a() - p.b() * &rinv_lt;
    let b_hat = p.b() * &r_inv_sqrt;
    let cost = linalg::symmetrize(&(p.q() - p.l() * &rinv_lt));
    let c_hat = full_rank_factor(&cost);
    let ell = c_hat.nrows();

    let perm_shuffle = shuffle_permutation(n, r);
    let perm_hat = hat_permutation(n, r);

    let mut stack_a0 = DMatrix::zeros(n * r, n);
    let mut stack_b0 = DMatrix::zeros(n * r, m);
    for i in 0..r {
        stack_a0.rows_mut(i * n, n).copy_from(&p.a0()[i]);
        stack_b0.rows_mut(i * n, n).copy_from(&p.b0()[i]);
    }
    let script_a = perm_shuffle.apply(&(&stack_a0 - &stack_b0 * &rinv_lt));
    let script_b = perm_shuffle.apply(&(&stack_b0 * &r_inv_sqrt));

    let eye = DMatrix::<f64>::identity(n, n);
    let a_gamma = &a_hat - gamma * &eye;
    let (a_gamma_inv, _) = lu_solve_rcond(&a_gamma, &eye).ok_or(ScareError::SingularShift)?;

    let z_gamma = &c_hat * &a_gamma_inv * &b_hat;

    // E_γ = Π̂ [Â_γ + 2γI + B̂Z_γᵀĈ; √(2γ)(𝒜 + ℬZ_γᵀĈ)] (I + Â_γ⁻¹B̂Z_γᵀĈ)⁻¹ Â_γ⁻¹
    let ztc = z_gamma.transpose() * &c_hat;
    let bztc = &b_hat * &ztc;
    let sqrt_2g = (2.0 * gamma).sqrt();
    let mut top_stack = DMatrix::zeros(n * (r + 1), n);
    top_stack
        .rows_mut(0, n)
        .copy_from(&(&a_gamma + 2.0 * gamma * &eye + &bztc));
    if r > 0 {
        top_stack
            .rows_mut(n, n * r)
            .copy_from(&(sqrt_2g * (&script_a + &script_b * &ztc)));
    }
    let inner = &eye + &a_gamma_inv * &bztc;
    let (inner_inv_agi, _) =
        lu_solve_rcond(&inner, &a_gamma_inv).ok_or(ScareError::SingularShift)?;
    let e_gamma = perm_hat.apply(&(top_stack * inner_inv_agi));

    // H_γ = 2γ Â_γ⁻ᵀ Ĉᵀ (I_ℓ + Z_γZ_γᵀ)⁻¹ Ĉ Â_γ⁻¹
    let c_agi = &c_hat * &a_gamma_inv;
    let gram_l = DMatrix::<f64>::identity(ell, ell) + &z_gamma * z_gamma.transpose();
    let (gram_l_inv_cagi, _) = lu_solve_rcond(&gram_l, &c_agi).ok_or(ScareError::SingularShift)?;
    let h_gamma = linalg::symmetrize(&(2.0 * gamma * c_agi.transpose() * gram_l_inv_cagi));

    // G_γ = Π̂ [√(2γ)Â_γ⁻¹B̂; 𝒜Â_γ⁻¹B̂ − ℬ] (I_m + Z_γᵀZ_γ)⁻¹ [·]ᵀ Π̂ᵀ
    let agi_b = &a_gamma_inv * &b_hat;
    let mut factor = DMatrix::zeros(n * (r + 1), m);
    factor.rows_mut(0, n).copy_from(&(sqrt_2g * &agi_b));
    if r > 0 {
        factor
            .rows_mut(n, n * r)
            .copy_from(&(&script_a * &agi_b - &script_b));
    }
    let factor = perm_hat.apply(&factor);
    let gram_m = DMatrix::<f64>::identity(m, m) + z_gamma.transpose() * &z_gamma;
    let (gram_m_inv_ft, _) =
        lu_solve_rcond(&gram_m, &factor.transpose()).ok_or(ScareError::SingularShift)?;
    let g_gamma = linalg::symmetrize(&(&factor * gram_m_inv_ft));

    Ok(MoebiusData {
        a_hat,
        b_hat,
        c_hat,
        perm_shuffle,
        perm_hat,
        script_a,
        script_b,
        gamma,
        z_gamma,
        e_gamma,
        h_gamma,
        g_gamma,
        rank_deficient: ell < n,
    })
}

/// Run the fixed point X₁ = H_γ, X_{k+1} = E_γᵀ(X_k⊗I)(I + G_γ(X_k⊗I))⁻¹E_γ
/// + H_γ, stopping on the normalized residual of the original SCARE.
pub fn fp_scare(p: &ScareProblem, gamma: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    let data = build_moebius(p, gamma)?;
    fp_scare_with(p, &data, cfg)
}

fn fp_scare_with(p: &ScareProblem, data: &MoebiusData, cfg: &SolverConfig) -> Result<SolveReport> {
    let n = p.n();
    let block = p.noise_count() + 1;
    let big = n * block;
    let eye_big = DMatrix::<f64>::identity(big, big);
    let start = std::time::Instant::now();

    let mut history = Vec::new();
    let mut counts = SolveCounts::default();
    let mut iterates = cfg.trace_iterates.then(Vec::<SymMatrix>::new);
    let mut nondecreasing = true;
    let mut nonincreasing = true;

    let mut x = SymMatrix::new(data.h_gamma.clone());
    let mut nres = normalized_residual(p, &x)?.nres;
    history.push(crate::solvers::HistoryEntry {
        iter: 0,
        phase: Phase::Gl,
        nres,
        wall_ns: start.elapsed().as_nanos(),
    });
    if let Some(tr) = &mut iterates {
        tr.push(x.clone());
    }

    while nres > cfg.outer_tol {
        if counts.fp_iters >= cfg.max_outer {
            return Err(ScareError::NotConverged {
                iterations: counts.fp_iters,
                residual: nres,
            });
        }
        // M = I + G_γ (X_k ⊗ I); solve M W = E_γ; X₊ = E_γᵀ (X_k ⊗ I) W + H_γ.
        let g_xk = linalg::right_mul_kron_identity(&data.g_gamma, x.matrix(), block);
        let system = &eye_big + g_xk;
        let (w, _) =
            lu_solve_rcond(&system, &data.e_gamma).ok_or(ScareError::SingularInnerSystem)?;
        let xw = linalg::left_mul_kron_identity(x.matrix(), &w, block);
        let x_next = SymMatrix::new(data.e_gamma.transpose() * xw + &data.h_gamma);
        counts.fp_iters += 1;

        let diff = x_next.matrix() - x.matrix();
        let slack = cfg.psd_tol * (1.0 + x.norm());
        if linalg::eig_min_sym(&diff) < -slack {
            nondecreasing = false;
        }
        if linalg::eig_max_sym(&diff) > slack {
            nonincreasing = false;
        }

        x = x_next;
        nres = normalized_residual(p, &x)?.nres;
        history.push(crate::solvers::HistoryEntry {
            iter: history.len(),
            phase: Phase::Gl,
            nres,
            wall_ns: start.elapsed().as_nanos(),
        });
        if let Some(tr) = &mut iterates {
            tr.push(x.clone());
        }
    }

    let monotone_direction = match (nondecreasing, nonincreasing) {
        (true, _) => crate::solvers::MonotoneDirection::Nondecreasing,
        (false, true) => crate::solvers::MonotoneDirection::Nonincreasing,
        (false, false) => crate::solvers::MonotoneDirection::NotMonotone,
    };
    Ok(SolveReport {
        x,
        converged: true,
        history,
        counts,
        monotone_direction,
        iterates,
    })
}

/// Driver with the default shift and up to five doubling retries. The limit
/// is shift-invariant; the rate is not, and the plain unit shift tracks the
/// iteration counts this method is known for. A shift that leaves Â − γI
/// singular or contracts too slowly to converge within the iteration cap is
/// doubled and the run restarted.
pub fn gl_fp(p: &ScareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut gamma = cfg.gamma.unwrap_or(1.0);
    let mut attempts = 0;
    loop {
        match fp_scare(p, gamma, cfg) {
            Err(ScareError::SingularShift) | Err(ScareError::NotConverged { .. })
                if cfg.gamma.is_none() && attempts < 5 =>
            {
                attempts += 1;
                gamma *= 2.0;
            }
            other => return other,
        }
    }
}
