use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("graph parse error at line {line}: {msg}")]
    GraphParse { line: usize, msg: String },
    #[error("graph is not a DAG")]
    NotADag,
    #[error("estimated and true graphs are over different variables")]
    VariableMismatch,
    #[error("continuous variable `{0}` has zero variance")]
    ZeroVariance(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}
