//! The five SCARE iterations: the fixed point over frozen CAREs, Newton and
//! modified Newton with Lyapunov inner solves, and the two warm-started
//! hybrids that run the fixed point first.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::care_sda;
use crate::error::{Result, ScareError};
use crate::linalg;
use crate::lyap_sda;
use crate::problem::{
    assemble_care, mnt_rhs_from_ops, newton_operators, normalized_residual, ScareProblem,
    SymMatrix,
};

/// Tolerances, iteration caps and shift parameters shared by every solver.
#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    /// Stopping tolerance on the normalized SCARE residual.
    pub outer_tol: f64,
    /// Relative-change / residual tolerance of the doubling primitives.
    pub inner_tol: f64,
    /// Tolerance of the Newton inner fixed-point sweep; `None` ties it to
    /// `outer_tol`. A looser value saves sweeps at early outer steps.
    pub nt_inner_tol: Option<f64>,
    /// Cap on outer iterations.
    pub max_outer: usize,
    /// Cap on inner fixed-point sweeps per Newton step.
    pub max_inner: usize,
    /// Cap on doubling steps inside the CARE/Lyapunov solvers.
    pub max_doubling: usize,
    /// Spectral-norm step threshold at which the hybrids hand over.
    pub warm_threshold: f64,
    /// Shift of the CARE doubling and the Möbius transform; `None` picks a
    /// per-solver default.
    pub gamma: Option<f64>,
    /// Cayley shift for the Lyapunov solver; `None` picks a scaled default.
    pub alpha: Option<f64>,
    /// Positive-semidefiniteness slack.
    pub psd_tol: f64,
    /// Stability margin for Hurwitz checks.
    pub stab_tol: f64,
    /// Largest order for which a Lyapunov solve runs an eigenvalue
    /// pre-check; beyond it divergence detection raises `NotHurwitz`.
    pub hurwitz_check_max: usize,
    /// Record every iterate in the report (memory proportional to n²·steps).
    pub trace_iterates: bool,
    /// How driver code picks the starting matrix.
    pub x0_policy: X0Policy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_tol: 1e-12,
            inner_tol: 1e-14,
            nt_inner_tol: None,
            max_outer: 500,
            max_inner: 200,
            max_doubling: 60,
            warm_threshold: 0.01,
            gamma: None,
            alpha: None,
            psd_tol: 1e-10,
            stab_tol: 1e-8,
            hurwitz_check_max: 200,
            trace_iterates: false,
            x0_policy: X0Policy::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum X0Policy {
    /// Start from the zero matrix (the nondecreasing branch).
    Zero,
    /// Start from a caller-provided matrix.
    Given,
    /// Start from the stabilizing solution of the frozen CARE at X = 0.
    WarmCare,
}

/// Resolve the starting matrix for a run according to the configured policy.
pub fn initial_matrix(
    p: &ScareProblem,
    cfg: &SolverConfig,
    given: Option<SymMatrix>,
) -> Result<SymMatrix> {
    match cfg.x0_policy {
        X0Policy::Zero => Ok(SymMatrix::zeros(p.n())),
        X0Policy::Given => given.ok_or_else(|| {
            ScareError::InvalidProblem("x0_policy is `given` but no matrix was provided".into())
        }),
        X0Policy::WarmCare => {
            let cc = assemble_care(p, &SymMatrix::zeros(p.n()))?;
            Ok(care_sda::solve_care(&cc.a_c, &cc.g_c, &cc.h_c, cfg)?.x)
        }
    }
}

/// Phase tag attached to every history row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Fpc,
    Nt,
    Mnt,
    Gl,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Fpc => "fpc",
            Phase::Nt => "nt",
            Phase::Mnt => "mnt",
            Phase::Gl => "gl",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub phase: Phase,
    pub nres: f64,
    /// Nanoseconds since the solve started when this row was recorded.
    pub wall_ns: u128,
}

/// Equation-solve counters with the same semantics as the benchmark tables:
/// one CARE solve per fixed-point outer step, one Lyapunov solve per
/// doubling call inside Newton/modified-Newton, one fixed-point update per
/// Möbius iteration.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SolveCounts {
    pub care_solves: usize,
    pub lyap_solves: usize,
    pub fp_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MonotoneDirection {
    Nondecreasing,
    Nonincreasing,
    NotMonotone,
}

impl fmt::Display for MonotoneDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonotoneDirection::Nondecreasing => "nondecreasing",
            MonotoneDirection::Nonincreasing => "nonincreasing",
            MonotoneDirection::NotMonotone => "none",
        })
    }
}

/// Outcome of one solver run: the final iterate, residual history with phase
/// tags, equation-solve counters and the observed Loewner direction of the
/// iterate sequence.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub x: SymMatrix,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
    pub counts: SolveCounts,
    pub monotone_direction: MonotoneDirection,
    /// Iterate trail, present when `cfg.trace_iterates` was set. Contains
    /// the starting matrix followed by every outer iterate.
    pub iterates: Option<Vec<SymMatrix>>,
}

impl SolveReport {
    pub fn final_nres(&self) -> f64 {
        self.history.last().map(|h| h.nres).unwrap_or(f64::NAN)
    }
}

/// Shared bookkeeping while a solve runs.
struct RunState {
    start: Instant,
    history: Vec<HistoryEntry>,
    counts: SolveCounts,
    iterates: Option<Vec<SymMatrix>>,
    nondecreasing: bool,
    nonincreasing: bool,
    psd_tol: f64,
}

impl RunState {
    fn new(cfg: &SolverConfig) -> Self {
        RunState {
            start: Instant::now(),
            history: Vec::new(),
            counts: SolveCounts::default(),
            iterates: cfg.trace_iterates.then(Vec::new),
            nondecreasing: true,
            nonincreasing: true,
            psd_tol: cfg.psd_tol,
        }
    }

    fn record(&mut self, phase: Phase, nres: f64, x: &SymMatrix) {
        let iter = self.history.len();
        self.history.push(HistoryEntry {
            iter,
            phase,
            nres,
            wall_ns: self.start.elapsed().as_nanos(),
        });
        if let Some(tr) = &mut self.iterates {
            tr.push(x.clone());
        }
    }

    fn observe_step(&mut self, prev: &SymMatrix, next: &SymMatrix) {
        let diff = next.matrix() - prev.matrix();
        let slack = self.psd_tol * (1.0 + prev.norm());
        if linalg::eig_min_sym(&diff) < -slack {
            self.nondecreasing = false;
        }
        if linalg::eig_max_sym(&diff) > slack {
            self.nonincreasing = false;
        }
    }

    fn finish(self, x: SymMatrix, converged: bool) -> SolveReport {
        let monotone_direction = match (self.nondecreasing, self.nonincreasing) {
            (true, _) => MonotoneDirection::Nondecreasing,
            (false, true) => MonotoneDirection::Nonincreasing,
            (false, false) => MonotoneDirection::NotMonotone,
        };
        SolveReport {
            x,
            converged,
            history: self.history,
            counts: self.counts,
            monotone_direction,
            iterates: self.iterates,
        }
    }
}

/// Why a fixed-point phase stopped.
enum FpExit {
    Converged,
    WarmStep,
}

/// One fixed-point phase: freeze the coefficients at X_k, solve the CARE by
/// doubling, repeat. With `warm_stop` set the phase also exits once the
/// spectral-norm step drops under `cfg.warm_threshold`.
fn fp_phase(
    p: &ScareProblem,
    x0: &SymMatrix,
    cfg: &SolverConfig,
    warm_stop: bool,
    state: &mut RunState,
) -> Result<(SymMatrix, FpExit)> {
    let phase = Phase::Fpc;
    let mut x = x0.clone();
    if state.history.is_empty() {
        let nres0 = normalized_residual(p, &x)?.nres;
        state.record(phase, nres0, &x);
    }
    let mut outer = 0;
    loop {
        if outer >= cfg.max_outer {
            return Err(ScareError::NotConverged {
                iterations: outer,
                residual: state.history.last().map(|h| h.nres).unwrap_or(f64::NAN),
            });
        }
        let cc = assemble_care(p, &x).map_err(|e| e.at_outer(outer, phase.as_str()))?;
        let sol = care_sda::solve_care(&cc.a_c, &cc.g_c, &cc.h_c, cfg)
            .map_err(|e| e.at_outer(outer, phase.as_str()))?;
        state.counts.care_solves += 1;
        let x_next = sol.x;
        let nres = normalized_residual(p, &x_next)?.nres;
        state.observe_step(&x, &x_next);
        state.record(phase, nres, &x_next);
        let step = linalg::spectral_norm(&(x_next.matrix() - x.matrix()));
        x = x_next;
        outer += 1;
        if nres <= cfg.outer_tol {
            return Ok((x, FpExit::Converged));
        }
        if warm_stop && step < cfg.warm_threshold {
            return Ok((x, FpExit::WarmStep));
        }
    }
}

/// Normalized residual of the Newton equation
/// A_{X_k}ᵀY + YA_{X_k} + Π_{X_k}(Y) + M_{X_k} = 0 at Y.
fn newton_eq_nres(
    p: &ScareProblem,
    ops: &crate::problem::NewtonOperators,
    y: &SymMatrix,
) -> Result<f64> {
    let aty = ops.a_xk.transpose() * y.matrix();
    let pi_y = ops.project_pi(p, y)?;
    let res = (&aty + aty.transpose() + &pi_y + &ops.m_xk).norm();
    let denom = 2.0 * aty.norm() + (pi_y + &ops.m_xk).norm();
    Ok(if denom > 0.0 { res / denom } else { res })
}

/// Newton phase: outer Newton steps, each solving its correction equation by
/// a fixed-point sweep of Lyapunov solves started from Y₀ = X_k.
fn newton_phase(
    p: &ScareProblem,
    x0: &SymMatrix,
    cfg: &SolverConfig,
    state: &mut RunState,
) -> Result<SymMatrix> {
    let phase = Phase::Nt;
    let mut x = x0.clone();
    if state.history.is_empty() {
        let nres0 = normalized_residual(p, &x)?.nres;
        state.record(phase, nres0, &x);
    }
    let nt_tol = cfg.nt_inner_tol.unwrap_or(cfg.outer_tol);
    let mut outer = 0;
    loop {
        if outer >= cfg.max_outer {
            return Err(ScareError::NotConverged {
                iterations: outer,
                residual: state.history.last().map(|h| h.nres).unwrap_or(f64::NAN),
            });
        }
        let ops = newton_operators(p, &x).map_err(|e| e.at_outer(outer, phase.as_str()))?;
        let alpha = cfg.alpha.unwrap_or_else(|| lyap_sda::default_alpha(&ops.a_xk));

        let mut y = x.clone();
        let mut sweeps = 0;
        loop {
            let c_j = SymMatrix::new(
                ops.project_pi(p, &y)
                    .map_err(|e| e.at_outer(outer, phase.as_str()))?
                    + &ops.m_xk,
            );
            let y_next = lyap_sda::solve_lyapunov(&ops.a_xk, c_j.matrix(), alpha, cfg)
                .map_err(|e| e.at_outer(outer, phase.as_str()))?;
            state.counts.lyap_solves += 1;
            sweeps += 1;
            let delta_f = newton_eq_nres(p, &ops, &y_next)?;
            y = y_next;
            if delta_f <= nt_tol {
                break;
            }
            if sweeps >= cfg.max_inner {
                return Err(ScareError::InnerStalled {
                    sweeps,
                    residual: delta_f,
                }
                .at_outer(outer, phase.as_str()));
            }
        }

        let nres = normalized_residual(p, &y)?.nres;
        state.observe_step(&x, &y);
        state.record(phase, nres, &y);
        x = y;
        outer += 1;
        if nres <= cfg.outer_tol {
            return Ok(x);
        }
    }
}

/// Modified-Newton phase: one Lyapunov solve per outer step with the frozen
/// right-hand side C_k = Π_{X_k}(X_k) + M_{X_k}.
fn modified_newton_phase(
    p: &ScareProblem,
    x0: &SymMatrix,
    cfg: &SolverConfig,
    state: &mut RunState,
) -> Result<SymMatrix> {
    let phase = Phase::Mnt;
    let mut x = x0.clone();
    if state.history.is_empty() {
        let nres0 = normalized_residual(p, &x)?.nres;
        state.record(phase, nres0, &x);
    }
    let mut outer = 0;
    loop {
        if outer >= cfg.max_outer {
            return Err(ScareError::NotConverged {
                iterations: outer,
                residual: state.history.last().map(|h| h.nres).unwrap_or(f64::NAN),
            });
        }
        let ops = newton_operators(p, &x).map_err(|e| e.at_outer(outer, phase.as_str()))?;
        let c_k = mnt_rhs_from_ops(p, &ops, &x).map_err(|e| e.at_outer(outer, phase.as_str()))?;
        let alpha = cfg.alpha.unwrap_or_else(|| lyap_sda::default_alpha(&ops.a_xk));
        let x_next = lyap_sda::solve_lyapunov(&ops.a_xk, c_k.matrix(), alpha, cfg)
            .map_err(|e| e.at_outer(outer, phase.as_str()))?;
        state.counts.lyap_solves += 1;

        #[cfg(debug_assertions)]
        if let Ok(gap) = mnt_step_identity_gap(p, &x, &x_next) {
            let scale = (1.0 + x_next.norm()) * (1.0 + c_k.norm());
            debug_assert!(
                gap <= 1e-10 * scale,
                "modified-Newton step violates its quadratic form: gap {gap:e}, scale {scale:e}"
            );
        }

        let nres = normalized_residual(p, &x_next)?.nres;
        state.observe_step(&x, &x_next);
        state.record(phase, nres, &x_next);
        x = x_next;
        outer += 1;
        if nres <= cfg.outer_tol {
            return Ok(x);
        }
    }
}

/// Gap in the quadratic form the modified-Newton step satisfies:
/// ‖A_kᵀX₊ + X₊A_k − X₊G_kX₊ + H_k + (X₊−X_k)G_k(X₊−X_k)‖_F.
/// Up to the inner Lyapunov residual this is zero for every step.
pub fn mnt_step_identity_gap(
    p: &ScareProblem,
    xk: &SymMatrix,
    x_next: &SymMatrix,
) -> Result<f64> {
    let cc = assemble_care(p, xk)?;
    let xm = x_next.matrix();
    let diff = xm - xk.matrix();
    let form = cc.a_c.transpose() * xm + xm * &cc.a_c - xm * &cc.g_c * xm
        + &cc.h_c
        + &diff * &cc.g_c * &diff;
    Ok(form.norm())
}

/// Fixed point over frozen CAREs. With X₀ = 0 the iterates are Loewner
/// nondecreasing with ℛ(X_k) ⪰ 0; from a start passing
/// [`crate::oracle::check_decreasing_start`] they are nonincreasing with
/// ℛ(X_k) ⪯ 0.
pub fn fp_care_sda(p: &ScareProblem, x0: &SymMatrix, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut state = RunState::new(cfg);
    let (x, _) = fp_phase(p, x0, cfg, false, &mut state)?;
    Ok(state.finish(x, true))
}

/// Newton's method with the fixed-point-of-Lyapunov inner solver. Requires a
/// start whose closed loop A_{X₀} is Hurwitz; a bad start surfaces as
/// [`ScareError::NotHurwitz`].
pub fn nt_fp_lyap_sda(p: &ScareProblem, x0: &SymMatrix, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut state = RunState::new(cfg);
    let x = newton_phase(p, x0, cfg, &mut state)?;
    Ok(state.finish(x, true))
}

/// Modified Newton: a single Lyapunov solve per outer step.
pub fn mnt_fp_lyap_sda(
    p: &ScareProblem,
    x0: &SymMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let mut state = RunState::new(cfg);
    let x = modified_newton_phase(p, x0, cfg, &mut state)?;
    Ok(state.finish(x, true))
}

/// Warm-started hybrid: the fixed point runs from zero until the spectral
/// step drops under `cfg.warm_threshold`, then Newton finishes from the warm
/// iterate.
pub fn fpc_nt(p: &ScareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut state = RunState::new(cfg);
    let (warm, _) = fp_phase(p, &SymMatrix::zeros(p.n()), cfg, true, &mut state)?;
    let x = newton_phase(p, &warm, cfg, &mut state)?;
    Ok(state.finish(x, true))
}

/// Warm-started hybrid with the modified-Newton finisher.
pub fn fpc_mnt(p: &ScareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut state = RunState::new(cfg);
    let (warm, _) = fp_phase(p, &SymMatrix::zeros(p.n()), cfg, true, &mut state)?;
    let x = modified_newton_phase(p, &warm, cfg, &mut state)?;
    Ok(state.finish(x, true))
}

/// Solver selector used by the campaign driver and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverKind {
    Fpc,
    Nt,
    Mnt,
    FpcNt,
    FpcMnt,
    GlFp,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Fpc,
        SolverKind::Nt,
        SolverKind::Mnt,
        SolverKind::FpcNt,
        SolverKind::FpcMnt,
        SolverKind::GlFp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Fpc => "fpc",
            SolverKind::Nt => "nt",
            SolverKind::Mnt => "mnt",
            SolverKind::FpcNt => "fpc-nt",
            SolverKind::FpcMnt => "fpc-mnt",
            SolverKind::GlFp => "gl-fp",
        }
    }

    /// Whether the solver consumes a caller-supplied starting matrix.
    pub fn takes_x0(self) -> bool {
        matches!(self, SolverKind::Fpc | SolverKind::Nt | SolverKind::Mnt)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = ScareError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpc" => Ok(SolverKind::Fpc),
            "nt" => Ok(SolverKind::Nt),
            "mnt" => Ok(SolverKind::Mnt),
            "fpc-nt" => Ok(SolverKind::FpcNt),
            "fpc-mnt" => Ok(SolverKind::FpcMnt),
            "gl-fp" => Ok(SolverKind::GlFp),
            other => Err(ScareError::InvalidProblem(format!(
                "unknown solver `{other}` (expected fpc|nt|mnt|fpc-nt|fpc-mnt|gl-fp)"
            ))),
        }
    }
}

/// Run the selected solver. `x0` is honored by the plain iterations and
/// ignored by the hybrids and the Möbius fixed point, which define their own
/// starting points.
pub fn solve(
    kind: SolverKind,
    p: &ScareProblem,
    x0: Option<&SymMatrix>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let zero = SymMatrix::zeros(p.n());
    let start = x0.unwrap_or(&zero);
    match kind {
        SolverKind::Fpc => fp_care_sda(p, start, cfg),
        SolverKind::Nt => nt_fp_lyap_sda(p, start, cfg),
        SolverKind::Mnt => mnt_fp_lyap_sda(p, start, cfg),
        SolverKind::FpcNt => fpc_nt(p, cfg),
        SolverKind::FpcMnt => fpc_mnt(p, cfg),
        SolverKind::GlFp => crate::moebius::gl_fp(p, cfg),
    }
}

/// State-trace access for tests: spectral-norm steps of a traced report.
pub fn iterate_steps(report: &SolveReport) -> Option<Vec<f64>> {
    let tr = report.iterates.as_ref()?;
    Some(
        tr.windows(2)
            .map(|w| linalg::spectral_norm(&(w[1].matrix() - w[0].matrix())))
            .collect(),
    )
}

#[allow(unused)]
fn _assert_traits() {
    fn is_send_sync<T: Send + Sync>() {}
    is_send_sync::<SolverConfig>();
    is_send_sync::<SolveReport>();
    is_send_sync::<DMatrix<f64>>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{make_benchmark, BenchId, BenchmarkSpec};
    use crate::oracle;
    use crate::problem::residual;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_problem(a: f64, b: f64, q: f64, r: f64, noise: &[(f64, f64)]) -> ScareProblem {
        ScareProblem::new(
            one(a),
            one(b),
            one(q),
            one(r),
            one(0.0),
            noise.iter().map(|&(ai, _)| one(ai)).collect(),
            noise.iter().map(|&(_, bi)| one(bi)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn fp_without_noise_is_one_care_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = ScareProblem::without_noise(
            a,
            b,
            DMatrix::identity(2, 2),
            one(1.0),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let rep = fp_care_sda(&p, &SymMatrix::zeros(2), &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.counts.care_solves, 1);
        let s3 = 3f64.sqrt();
        let expect = DMatrix::from_row_slice(2, 2, &[s3, 1.0, 1.0, s3]);
        assert!((rep.x.matrix() - expect).norm() < 1e-11);
    }

    #[test]
    fn fp_matches_scalar_root() {
        let p = scalar_problem(1.0, 1.0, 1.0, 1.0, &[(0.5, 0.5)]);
        let root = oracle::scalar_scare_solve(&p).unwrap();
        let rep = fp_care_sda(&p, &SymMatrix::zeros(1), &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.x[(0, 0)] - root).abs() < 1e-10);
        assert_eq!(rep.monotone_direction, MonotoneDirection::Nondecreasing);
    }

    #[test]
    fn fp_on_example1_is_nondecreasing_to_tolerance() {
        let p = make_benchmark(&BenchmarkSpec::new(BenchId::Ex1)).unwrap();
        let cfg = SolverConfig {
            trace_iterates: true,
            ..SolverConfig::default()
        };
        let rep = fp_care_sda(&p, &SymMatrix::zeros(2), &cfg).unwrap();
        assert!(rep.converged);
        assert!(rep.final_nres() <= 1e-12);
        assert_eq!(rep.monotone_direction, MonotoneDirection::Nondecreasing);
        // ℛ(X_k) ⪰ 0 along the way.
        for x in rep.iterates.as_ref().unwrap() {
            let res = residual(&p, x).unwrap();
            assert!(
                linalg::eig_min_sym(res.matrix()) >= -1e-10 * (1.0 + res.norm()),
                "residual lost PSD along the nondecreasing branch"
            );
        }
    }

    #[test]
    fn newton_without_noise_is_newton_kleinman() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = ScareProblem::without_noise(
            a.clone(),
            b.clone(),
            DMatrix::identity(2, 2),
            one(1.0),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        // Stabilizing start.
        let x0 = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 5.0]));
        let rep = nt_fp_lyap_sda(&p, &x0, &SolverConfig::default()).unwrap();
        let g = &b * b.transpose();
        let nk = oracle::newton_kleinman_care(&a, &g, &DMatrix::identity(2, 2), &x0).unwrap();
        assert!((rep.x.matrix() - nk.matrix()).norm() / nk.norm() < 1e-10);
        // With Π ≡ 0 every Newton step needs exactly one Lyapunov solve.
        let outer_steps = rep
            .history
            .iter()
            .filter(|h| h.phase == Phase::Nt)
            .count()
            - 1;
        assert_eq!(rep.counts.lyap_solves, outer_steps);
    }

    #[test]
    fn newton_rejects_unstable_start() {
        // At X₀ = 0 the closed loop is A itself, which is not Hurwitz here.
        let p = scalar_problem(1.0, 1.0, 1.0, 1.0, &[(0.5, 0.5)]);
        let err = nt_fp_lyap_sda(&p, &SymMatrix::zeros(1), &SolverConfig::default()).unwrap_err();
        assert!(err.is_convergence_failure(), "unexpected error {err}");
    }

    #[test]
    fn newton_quadratic_tail_from_qualifying_start() {
        let p = make_benchmark(&BenchmarkSpec::new(BenchId::Ex1)).unwrap();
        let cfg = SolverConfig::default();
        let up = fp_care_sda(&p, &SymMatrix::zeros(2), &cfg).unwrap();
        let x_hat = up.x;
        let scale = 1.0 + linalg::spectral_norm(x_hat.matrix());
        let mut start = None;
        'grid: for s in [0.0, 0.25, 0.5, 1.0] {
            for t in [1e-3, 1e-2, 0.1, 0.5, 1.0] {
                let cand = SymMatrix::new(
                    x_hat.matrix() * (1.0 + s) + DMatrix::identity(2, 2) * (t * scale),
                );
                if crate::oracle::check_decreasing_start(&p, &cand, &x_hat).unwrap_or(false) {
                    start = Some(cand);
                    break 'grid;
                }
            }
        }
        let rep = nt_fp_lyap_sda(&p, &start.expect("qualifying start exists"), &cfg).unwrap();
        assert_eq!(rep.monotone_direction, MonotoneDirection::Nonincreasing);

        // Log-residual ratios of at least 1.7 over the final steps, floor
        // transitions (within 100x of the final residual) excluded.
        let vals: Vec<f64> = rep.history.iter().map(|h| h.nres).collect();
        let floor = vals.last().unwrap() * 100.0;
        let tail = &vals[vals.len().saturating_sub(4)..];
        let mut checked = 0;
        for w in tail.windows(2) {
            if w[1] <= floor {
                continue;
            }
            let ratio = w[1].log10() / w[0].log10();
            assert!(ratio >= 1.7, "log-residual ratio {ratio} below 1.7");
            checked += 1;
        }
        assert!(checked >= 1, "no tail transitions above the floor");
    }

    #[test]
    fn modified_newton_agrees_with_fp_when_started_stabilizing() {
        let p = scalar_problem(-0.2, 1.0, 1.0, 1.0, &[]);
        let fp = fp_care_sda(&p, &SymMatrix::zeros(1), &SolverConfig::default()).unwrap();
        let x0 = SymMatrix::new(one(fp.x[(0, 0)] * 2.0 + 1.0));
        let mnt = mnt_fp_lyap_sda(&p, &x0, &SolverConfig::default()).unwrap();
        assert!((mnt.x[(0, 0)] - fp.x[(0, 0)]).abs() < 1e-9);
        assert_eq!(mnt.monotone_direction, MonotoneDirection::Nonincreasing);
    }

    #[test]
    fn mnt_step_identity_holds_per_step() {
        let p = make_benchmark(&BenchmarkSpec::new(BenchId::Ex1)).unwrap();
        let fp = fp_care_sda(&p, &SymMatrix::zeros(2), &SolverConfig::default()).unwrap();
        // A decreasing-branch start.
        let x0 = SymMatrix::new(fp.x.matrix() * 1.5 + DMatrix::identity(2, 2) * 0.5);
        let cfg = SolverConfig {
            trace_iterates: true,
            max_outer: 50,
            outer_tol: 1e-10,
            ..SolverConfig::default()
        };
        if let Ok(rep) = mnt_fp_lyap_sda(&p, &x0, &cfg) {
            let tr = rep.iterates.unwrap();
            for w in tr.windows(2) {
                let gap = mnt_step_identity_gap(&p, &w[0], &w[1]).unwrap();
                assert!(gap <= 1e-10 * (1.0 + w[1].norm()), "identity gap {gap}");
            }
        }
    }

    #[test]
    fn hybrids_converge_on_example1_with_phase_tags() {
        let p = make_benchmark(&BenchmarkSpec::new(BenchId::Ex1)).unwrap();
        let cfg = SolverConfig::default();
        for kind in [SolverKind::FpcNt, SolverKind::FpcMnt] {
            let rep = solve(kind, &p, None, &cfg).unwrap();
            assert!(rep.converged, "{kind} failed");
            assert!(rep.final_nres() <= 1e-12);
            // Phase switches exactly once.
            let switches = rep
                .history
                .windows(2)
                .filter(|w| w[0].phase != w[1].phase)
                .count();
            assert_eq!(switches, 1, "{kind} should switch phase exactly once");
            assert!(rep.counts.care_solves > 0);
            assert!(rep.counts.lyap_solves > 0);
        }
    }

    #[test]
    fn hybrid_on_deterministic_problem_confirms_quickly() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = ScareProblem::without_noise(
            a,
            b,
            DMatrix::identity(2, 2),
            one(1.0),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let rep = fpc_nt(&p, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.counts.care_solves, 1);
        let newton_steps = rep.history.iter().filter(|h| h.phase == Phase::Nt).count();
        assert!(newton_steps <= 2, "expected ≤ 2 confirming Newton steps");
    }

    #[test]
    fn solver_kind_round_trip() {
        for kind in SolverKind::ALL {
            assert_eq!(kind.as_str().parse::<SolverKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<SolverKind>().is_err());
    }

    #[test]
    fn initial_matrix_policies() {
        let p = scalar_problem(-1.0, 1.0, 1.0, 1.0, &[]);
        let cfg = SolverConfig::default();
        assert_eq!(
            initial_matrix(&p, &cfg, None).unwrap().matrix(),
            SymMatrix::zeros(1).matrix()
        );
        let warm_cfg = SolverConfig {
            x0_policy: X0Policy::WarmCare,
            ..SolverConfig::default()
        };
        let warm = initial_matrix(&p, &warm_cfg, None).unwrap();
        // Warm start is already the deterministic solution here.
        let rep = normalized_residual(&p, &warm).unwrap();
        assert!(rep.nres < 1e-12);
        let given_cfg = SolverConfig {
            x0_policy: X0Policy::Given,
            ..SolverConfig::default()
        };
        assert!(initial_matrix(&p, &given_cfg, None).is_err());
    }
}
