use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("schema error: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("dimension error: {}", .0.join("; "))]
    Dimension(Vec<String>),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Usage(String),

    #[error("oracle found {violations} sample(s) outside the reported error bound")]
    OracleViolation { violations: usize },

    #[error(transparent)]
    Core(#[from] descriptor_minimax::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
