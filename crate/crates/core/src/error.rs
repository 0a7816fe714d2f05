use thiserror::Error;

/// Errors produced by the battery toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate eigensystem: {0}")]
    DegenerateEigensystem(String),

    #[error("singular gap (Ω1² + Ω2² = 0) at sample {index}")]
    SingularGap { index: usize },

    #[error("numerical-unconstrained schedule requested without a solver result")]
    MissingSolution,

    #[error("solver did not converge after {iterations} iterations (residual norm {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("schedule is not a critical point: residual {residual:e} exceeds {threshold:e}")]
    NotCriticalPoint { residual: f64, threshold: f64 },

    #[error("step size too large: {quantity} drifted by {drift:e} at t = {time:e} s; reduce dt")]
    StepSize {
        quantity: &'static str,
        drift: f64,
        time: f64,
    },

    #[error("no crossing found for populations {pair} on the search interval")]
    NoCrossing { pair: &'static str },

    #[error("threshold {threshold} of the maximum ergotropy never reached")]
    NotCharged { threshold: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn require_finite(what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be finite, got {value}")))
    }
}
