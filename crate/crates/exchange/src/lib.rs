//! Data exchange: an embedded catalogue and token service in front of a
//! resource server that reads the monitor for fresh values and the lake
//! for history.

pub mod catalogue;
pub mod error;
pub mod http;
pub mod query;
pub mod server;
pub mod token;

pub use catalogue::{campus_catalogue, AccessClass, Catalogue, CatalogueItem, DataModel, ItemLocation, Lookup, ResourceGroup};
pub use error::{invalid_token_body, ApiError, ApiResult, TokenError};
pub use http::{router, Exchange};
pub use query::{CmpOp, Literal, TemporalQuery, TimeRel, ValueFilter};
pub use server::{ExchangeConfig, ResourceServer};
pub use token::{ItemType, Revocations, Signer, TokenClaims, TokenRequest, TokenService, Verifier};
