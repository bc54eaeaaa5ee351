//! Solvers for stochastic continuous-time algebraic Riccati equations (SCAREs)
//!
//! A SCARE is the rational matrix equation
//!
//! ```text
//! AᵀX + XA + Q + Π₁₁(X)
//!   − (XB + L + Π₁₂(X)) (R + Π₂₂(X))⁻¹ (XB + L + Π₁₂(X))ᵀ = 0,
//! ```
//!
//! where the blocks `Π₁₁(X) = Σᵢ A₀ⁱᵀ X A₀ⁱ`, `Π₁₂(X) = Σᵢ A₀ⁱᵀ X B₀ⁱ` and
//! `Π₂₂(X) = Σᵢ B₀ⁱᵀ X B₀ⁱ` collect the multiplicative-noise channels of a
//! stochastic LQ control problem. The crate computes the positive
//! semidefinite stabilizing solution by several iterations built on two
//! doubling primitives:
//!
//! * [`solvers::fp_care_sda`] — outer fixed point over frozen CAREs, each
//!   solved by the structure-preserving doubling algorithm ([`care_sda`]);
//! * [`solvers::nt_fp_lyap_sda`] — Newton's method with an inner fixed-point
//!   sweep of Lyapunov solves ([`lyap_sda`]);
//! * [`solvers::mnt_fp_lyap_sda`] — modified Newton, one Lyapunov solve per
//!   outer step;
//! * [`solvers::fpc_nt`] / [`solvers::fpc_mnt`] — warm-started hybrids that
//!   run the robust fixed point first and hand over to (modified) Newton;
//! * [`moebius::fp_scare`] — the Möbius-transform fixed point on the
//!   equivalent discrete-time equation of order `n(r+1)`.
//!
//! [`oracle`] holds independent brute-force checks (Kronecker-vectorized
//! equation solves, a bisection root finder for scalar problems, Hautus
//! tests, mean-square stability, a R-linear rate certificate) and
//! [`bench`](mod@bench) generates the benchmark problem collection plus
//! campaign/CSV plumbing used by the `scare` command-line tool.
//!
//! All operations are pure functions of their inputs; every type is an
//! immutable value that can be shared or sent across threads freely.

pub mod bench;
pub mod care_sda;
pub mod error;
pub mod linalg;
pub mod lyap_sda;
pub mod moebius;
pub mod oracle;
pub mod problem;
pub mod solvers;

pub use error::{Result, ScareError};
pub use problem::{ScareProblem, SymMatrix};
pub use solvers::{SolveReport, SolverConfig, SolverKind};
