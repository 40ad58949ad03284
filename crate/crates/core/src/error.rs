use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid {what}: {detail}")]
    InvalidParameter { what: &'static str, detail: String },

    /// A numerically certified assumption failed. `name` is the semantic name
    /// of the violated condition (e.g. "strong monotonicity", "weight balance").
    #[error("assumption violated ({name}): {detail}")]
    AssumptionViolation { name: &'static str, detail: String },

    #[error("equilibrium oracle did not converge after {iterations} iterations: residual {residual:.3e} > tol {tol:.3e}")]
    OracleFailure {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("state diverged at t = {t:.6}: norm {norm:.3e} exceeds {limit:.1e}")]
    Divergence { t: f64, norm: f64, limit: f64 },

    #[error("schedule exhausted: t = {t:.6} lies beyond the finite horizon {horizon:.6}")]
    ScheduleExhausted { t: f64, horizon: f64 },

    #[error("quadrature horizon {horizon} too short: fitted tail bound {tail:.3e} exceeds {required:.1e} (suggested horizon: {suggested:.1})")]
    HorizonTooShort {
        horizon: f64,
        tail: f64,
        required: f64,
        suggested: f64,
    },

    #[error("too few usable samples for decay fit: {usable} after transient discard and tail truncation (need at least {needed})")]
    TooFewSamples { usable: usize, needed: usize },

    #[error("invalid scenario config: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code contract: 2 schema violation, 3 assumption violation,
    /// 4 divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Json(_) => 2,
            Error::AssumptionViolation { .. } => 3,
            Error::Divergence { .. } => 4,
            _ => 1,
        }
    }
}
