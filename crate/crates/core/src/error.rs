use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("no trajectory or replicate met the selection criterion")]
    EmptySelection,
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("inconsistent histogram: {0}")]
    InconsistentHistogram(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error originates in the numerical layer (as opposed to
    /// configuration or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateState(_)
                | Error::StepSizeUnderflow { .. }
                | Error::EmptySelection
                | Error::InsufficientSamples { .. }
                | Error::InconsistentHistogram(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
