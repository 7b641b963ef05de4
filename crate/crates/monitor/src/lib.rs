//! oneM2M-style request surface: `la`/`ol`/`rcn=4` retrieval, group
//! fan-out via `fopt`, label discovery with `fu=1`, resource creation by
//! `ty`, and subscription delivery to notification URIs.

pub mod api;
pub mod dispatch;
pub mod envelope;
pub mod http;
pub mod transport;

pub use api::{ApiRequest, ApiResponse, Method, Monitor};
pub use dispatch::{
    notification_body, read_dead_letters, DeadLetter, DispatchConfig, DispatchStats, Dispatcher,
    NotificationSink, Outcome,
};
pub use http::router;
pub use transport::{HttpTransport, Transport, Unreachable};
