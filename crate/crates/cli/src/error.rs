use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] mspline::Error),
}

impl CliError {
    /// 2 for bad input or configuration, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        use mspline::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Config(_) | CliError::Csv(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Core(e) => match e {
                E::SingularSystem
                | E::AllFitsFailed
                | E::OutOfDomain { .. }
                | E::DerivativeOrder { .. }
                | E::ZeroFunction => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
