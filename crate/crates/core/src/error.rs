use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `key` names the offending config path.
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite model evaluation at position ({x}, {y}), time {t}")]
    ModelEvaluation { x: f64, y: f64, t: f64 },

    #[error("walker failed to re-enter the domain after {0} reflections; reduce dt")]
    DegenerateStep(usize),

    #[error("swarm extinction at step {step}: {absorbed} absorbed, {survivors} survivors")]
    SwarmExtinction {
        step: usize,
        absorbed: usize,
        survivors: usize,
    },

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("smoothing degenerate: {0}")]
    SmoothingDegenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("quadrature under-resolved: estimated error {estimate:e} exceeds {limit:e}")]
    Resolution { estimate: f64, limit: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::GeometryMismatch(_) | Error::Parse(_) => 2,
            _ => 3,
        }
    }
}
