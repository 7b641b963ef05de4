use serde_json::{json, Value};

/// Why a token was refused. Every variant reaches the client as the same
/// invalid-token body; the variant is kept for logs and tests.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("token missing")]
    Missing,
    #[error("bad signature or format")]
    Invalid,
    #[error("token expired")]
    Expired,
    #[error("token is for another server")]
    WrongAudience,
    #[error("token does not cover {0}")]
    NotCovered(String),
    #[error("token revoked")]
    Revoked,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("unknown resource {0}")]
    UnknownResource(String),
    #[error("no data for {0}")]
    NoData(String),
    #[error("span {days:.2} days exceeds {max} days")]
    SpanTooLarge { days: f64, max: i64 },
    #[error("bad query: {0}")]
    BadQuery(String),
    #[error("user not registered")]
    NotRegistered,
    #[error("no policy grants {user} access to {item}")]
    NoPolicy { user: String, item: String },
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("not authenticated")]
    Unauthenticated,
    #[error("backend: {0}")]
    Backend(String),
}

pub const INVALID_TOKEN_TYPE: &str = "urn:dx:rs:InvalidAuthorizationToken";

/// The verbatim body for any token failure.
pub fn invalid_token_body() -> Value {
    json!({
        "type": INVALID_TOKEN_TYPE,
        "title": "Not Authorized",
        "detail": "Token is invalid"
    })
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::Token(_) | ApiError::NotRegistered | ApiError::Unauthenticated => 401,
            ApiError::NoPolicy { .. } => 403,
            ApiError::UnknownResource(_) | ApiError::UnknownItem(_) | ApiError::NoData(_) => 404,
            ApiError::SpanTooLarge { .. } | ApiError::BadQuery(_) => 400,
            ApiError::Backend(_) => 503,
        }
    }

    pub fn body(&self) -> Value {
        let (ty, title) = match self {
            ApiError::Token(_) => return invalid_token_body(),
            ApiError::UnknownResource(_) | ApiError::UnknownItem(_) => ("urn:dx:rs:resourceNotFound", "Not Found"),
            ApiError::NoData(_) => ("urn:dx:rs:noContent", "No Data"),
            ApiError::SpanTooLarge { .. } | ApiError::BadQuery(_) => ("urn:dx:rs:badRequest", "Bad Request"),
            ApiError::NotRegistered | ApiError::Unauthenticated => ("urn:dx:as:InvalidClient", "Not Authorized"),
            ApiError::NoPolicy { .. } => ("urn:dx:as:Forbidden", "Forbidden"),
            ApiError::Backend(_) => ("urn:dx:rs:backendError", "Backend Unavailable"),
        };
        json!({"type": ty, "title": title, "detail": self.to_string()})
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
