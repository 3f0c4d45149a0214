use thiserror::Error;

/// Errors raised across the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("formulation error: {0}")]
    Formulation(String),
    #[error("export error: {0}")]
    Export(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("extraction error: {0}")]
    Extraction(String),
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
