use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("node {0} is not in the knowledge base")]
    UnknownNode(String),
    #[error("record from {0} carries no timestamp")]
    MissingTimestamp(String),
    #[error("no {kind} factor for {foi}/{property}")]
    MissingFactor {
        kind: &'static str,
        foi: String,
        property: String,
    },
    #[error("no assessed observations for {0} in the window")]
    NoData(String),
    #[error("invalid quality factor: {0}")]
    InvalidFactor(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<std::io::Error> for QualityError {
    fn from(e: std::io::Error) -> Self {
        QualityError::Storage(e.to_string())
    }
}

pub type Result<T, E = QualityError> = std::result::Result<T, E>;
