use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {message}")]
    Numeric { message: String, diagnostics: Vec<String> },

    /// Subset enumeration would exceed the configured cap.
    #[error("capacity error: {contenders} contending links exceed the enumeration cap of {cap}; reduce the topology")]
    Capacity { contenders: usize, cap: usize },

    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:e})")]
    Solver {
        iterations: usize,
        last_residual: f64,
        residual_trace: Vec<f64>,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { message: String, line: Option<usize> },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("simulation setup error: {0}")]
    Setup(String),

    #[error("delay undefined: {0}")]
    UndefinedDelay(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::Capacity { .. } => "capacity",
            Error::Solver { .. } => "solver",
            Error::Topology(_) => "topology",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Consistency(_) => "consistency",
            Error::Setup(_) => "setup",
            Error::UndefinedDelay(_) => "undefined_delay",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}
