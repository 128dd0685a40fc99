use thiserror::Error;

/// Failures raised by the geodesic-flow laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "implicit solver did not converge at step {step} (t = {time:.6}): \
         update norm {update:.3e} after {iterations} iterations"
    )]
    Integration {
        step: usize,
        time: f64,
        update: f64,
        iterations: usize,
    },

    #[error("no return to the section within time budget {budget:.4}")]
    NoReturn { budget: f64 },

    #[error("grazing crossing of the section (normal flux {flux:.3e})")]
    Transversality { flux: f64 },

    #[error("periodic-orbit search failed: {reason} (residual trace {residuals:?})")]
    SearchFailure { reason: String, residuals: Vec<f64> },

    #[error("ill-conditioned section frame: {0}")]
    Frame(String),

    #[error("certification refused: {0}")]
    Refused(String),

    #[error("construction failed: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
