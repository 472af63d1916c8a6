//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model, spec, or argument violates its invariants.
    #[error("validation: {0}")]
    Validation(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A quantity carries the wrong units tag for the slot it was passed to.
    #[error("unit mismatch ({context}): expected {expected}, got {got}")]
    UnitMismatch {
        expected: String,
        got: String,
        context: String,
    },

    /// A linear system that must be invertible was singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// Newton iteration failed to reach the residual tolerance.
    #[error("newton iteration did not converge at step {step} (relative residual {residual:.3e})")]
    NonConvergence { step: usize, residual: f64 },

    /// The time-stepping produced a non-finite value.
    #[error("response diverged (non-finite value) at step {step}")]
    Diverged { step: usize },

    /// The gain optimizer could not start from its initial simplex.
    #[error("optimizer initialization: {0}")]
    OptimizerInit(String),

    /// The intensity calibration could not reach the coverage target.
    #[error("calibration failed: best coverage {best_coverage:.3} below target {target:.3}")]
    CalibrationFailure { best_coverage: f64, target: f64 },

    /// Exhaustive placement would enumerate too many subsets.
    #[error(
        "{subsets} candidate subsets exceed the enumeration cap of {cap}; use greedy placement"
    )]
    EnumerationCap { subsets: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

/// True for finite, strictly positive values; rejects NaN and infinities.
pub(crate) fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}
