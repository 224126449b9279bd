use thiserror::Error;

/// Errors raised while designing or simulating pulses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PulseError {
    /// `sin(gamma)` vanished where the Rabi synthesis needs `cot(gamma)`.
    #[error("SingularGamma: |sin(gamma)| < 1e-9 at t = {t} us")]
    SingularGamma { t: f64 },

    /// The integrator drifted off the unit sphere; more steps are needed.
    #[error("StepTooCoarse: norm drift {drift:.3e} exceeds 1e-6 with {steps} steps")]
    StepTooCoarse { drift: f64, steps: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(String),

    /// A parameter file could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),
}

impl PulseError {
    /// Short name of the error case, used for CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            PulseError::SingularGamma { .. } => "SingularGamma",
            PulseError::StepTooCoarse { .. } => "StepTooCoarse",
            PulseError::InvalidParams(_) => "InvalidParams",
            PulseError::Domain(_) => "Domain",
            PulseError::Io(_) => "Io",
            PulseError::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, PulseError>;
