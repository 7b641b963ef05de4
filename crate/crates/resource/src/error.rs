use thiserror::Error;

use crate::acp::Permission;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResourceError {
    #[error("resource not found: {0}")]
    NotFound(String),
    #[error("originator is not allowed to {op} {target}")]
    AccessDenied { op: Permission, target: String },
    #[error("a sibling named {0} already exists")]
    DuplicateName(String),
    #[error("container {0} holds no content instance")]
    Empty(String),
    #[error("acop {0} is outside 0..=63")]
    InvalidAcop(i64),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("payload has {found} values but the descriptor lists {expected} parameters")]
    ArityMismatch { expected: usize, found: usize },
    #[error("malformed content: {0}")]
    MalformedContent(String),
    #[error("storage error: {0}")]
    Storage(String),
}

impl From<std::io::Error> for ResourceError {
    fn from(e: std::io::Error) -> Self {
        ResourceError::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for ResourceError {
    fn from(e: serde_json::Error) -> Self {
        ResourceError::Storage(e.to_string())
    }
}

pub type Result<T, E = ResourceError> = std::result::Result<T, E>;
