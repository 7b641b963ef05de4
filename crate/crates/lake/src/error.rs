#[derive(Debug, thiserror::Error)]
pub enum LakeError {
    #[error("no vertical in labels {0:?}")]
    UnknownVertical(Vec<String>),
    #[error("unknown tenant {0}")]
    UnknownTenant(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate key ({node}, {ts})")]
    DuplicateKey { node: String, ts: i64 },
    #[error("malformed notification: {0}")]
    Malformed(String),
    #[error("source {0} not allowed")]
    Forbidden(String),
    #[error("bad record: {0}")]
    BadRecord(String),
    #[error("store offline")]
    Offline,
    #[error("storage: {0}")]
    Storage(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl From<std::io::Error> for LakeError {
    fn from(e: std::io::Error) -> Self {
        LakeError::Storage(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LakeError>;
