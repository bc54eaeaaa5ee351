//! Error type shared by the problem model, the equation solvers and the
//! diagnostics.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ScareError>;

#[derive(Debug, Error)]
pub enum ScareError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix `{name}` is not symmetric (‖M − Mᵀ‖_F = {asymmetry:.3e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("control weight R is not positive definite (λ_min = {0:.3e})")]
    WeightNotPositiveDefinite(f64),

    #[error("cost matrix Q − L R⁻¹ Lᵀ is not positive semidefinite (λ_min = {0:.3e})")]
    CostNotPsd(f64),

    #[error("weight R + Π₂₂(X) is numerically singular (condition estimate {cond:.3e})")]
    SingularWeight { cond: f64 },

    #[error("doubling initialization is singular after {attempts} shift retries")]
    SingularPivot { attempts: usize },

    #[error("iteration did not converge within {iterations} steps (last residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("doubling iterate lost positive semidefiniteness (λ_min = {0:.3e})")]
    LossOfPsd(f64),

    #[error("coefficient matrix is not Hurwitz (spectral abscissa {0:.3e})")]
    NotHurwitz(f64),

    #[error("inner fixed-point loop stalled after {sweeps} sweeps (residual {residual:.3e})")]
    InnerStalled { sweeps: usize, residual: f64 },

    #[error("shifted matrix is numerically singular")]
    SingularShift,

    #[error("inner system I + G_γ(X ⊗ I) is numerically singular")]
    SingularInnerSystem,

    #[error("no nonnegative root with a stable closed loop was found")]
    NoPsdRoot,

    #[error("vectorized Lyapunov operator is singular")]
    SingularLyapunovOperator,

    #[error("problem order {n} exceeds the oracle cap {cap}")]
    OracleSizeExceeded { n: usize, cap: usize },

    #[error("unknown benchmark id `{0}`")]
    UnknownBenchmark(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("outer iteration {index} ({phase}): {source}")]
    AtOuterStep {
        index: usize,
        phase: &'static str,
        #[source]
        source: Box<ScareError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ScareError {
    /// Wrap an error with the outer-iteration index and phase it occurred in.
    pub fn at_outer(self, index: usize, phase: &'static str) -> Self {
        ScareError::AtOuterStep {
            index,
            phase,
            source: Box::new(self),
        }
    }

    /// True for statuses that mean "no solution was produced" rather than
    /// "the input is malformed".
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            ScareError::NotConverged { .. }
            | ScareError::NotHurwitz(_)
            | ScareError::InnerStalled { .. }
            | ScareError::LossOfPsd(_) => true,
            ScareError::AtOuterStep { source, .. } => source.is_convergence_failure(),
            _ => false,
        }
    }
}
