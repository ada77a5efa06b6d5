use thiserror::Error;

/// Errors raised while building models, validating scenarios, or integrating.
#[derive(Debug, Error)]
pub enum TesError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("graph construction failed: {0}")]
    Graph(String),

    #[error("non-finite {quantity} at {location} (value {value})")]
    NonFinite {
        quantity: &'static str,
        location: String,
        value: f64,
    },

    #[error("step size underflow at t = {t} s (h = {h:e}); state = {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("Newton iteration failed repeatedly at t = {t} s")]
    NewtonFailure { t: f64 },

    #[error("inconsistent phase: T = {temperature} °C cannot be {phase}")]
    InconsistentPhase {
        temperature: f64,
        phase: &'static str,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TesError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        TesError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable category used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            TesError::InvalidParameter { .. } => "invalid_parameter",
            TesError::Graph(_) => "graph",
            TesError::NonFinite { .. } => "non_finite",
            TesError::StepUnderflow { .. } => "step_underflow",
            TesError::NewtonFailure { .. } => "newton_failure",
            TesError::InconsistentPhase { .. } => "inconsistent_phase",
            TesError::Scenario(_) => "scenario",
            TesError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, TesError>;
