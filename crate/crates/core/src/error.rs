use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The objective became non-finite or grew past the divergence guard.
    #[error("solver diverged in epoch {epoch}: objective {objective}")]
    Divergence { epoch: usize, objective: f64 },

    /// Rescaling factors left the representable range (the unscaled ADSG form).
    #[error("numerical breakdown in epoch {epoch}, iteration {iteration}: {message}")]
    NumericalBreakdown {
        epoch: usize,
        iteration: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by the configuration rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::EmptyInput
                | Error::DimensionMismatch { .. }
        )
    }
}
