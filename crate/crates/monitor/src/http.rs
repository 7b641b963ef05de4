use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method as HttpMethod, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use crate::api::{split_uri, ApiRequest, Method, Monitor, ORIGIN_HEADER, RSC_HEADER};

/// Every path is handled by [`Monitor::handle`].
pub fn router(monitor: Arc<Monitor>) -> Router {
    Router::new().fallback(handle).with_state(monitor)
}

async fn handle(
    State(monitor): State<Arc<Monitor>>,
    method: HttpMethod,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let method = match method {
        HttpMethod::GET => Some(Method::Get),
        HttpMethod::POST => Some(Method::Post),
        HttpMethod::PUT => Some(Method::Put),
        HttpMethod::DELETE => Some(Method::Delete),
        _ => None,
    };
    let (path, query) = split_uri(&uri.to_string());
    let path = percent_decode(&path);
    let text = |name: &str| {
        headers
            .get(name)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned)
    };
    let req = ApiRequest {
        method,
        path,
        query,
        origin: text(ORIGIN_HEADER),
        content_type: text(header::CONTENT_TYPE.as_str()),
        body: body.to_vec(),
    };
    let resp = monitor.handle(&req);
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut out = match resp.body {
        Some(b) => (
            status,
            [(header::CONTENT_TYPE, "application/json")],
            serde_json::to_vec(&b).expect("json"),
        )
            .into_response(),
        None => status.into_response(),
    };
    out.headers_mut()
        .insert(RSC_HEADER, HeaderValue::from(resp.rsc));
    out
}

fn percent_decode(path: &str) -> String {
    // reuse the query decoder; it also maps '+' to space, which never
    // appears in resource names
    if !path.contains('%') {
        return path.to_owned();
    }
    form_urlencoded::parse(format!("p={}", path.replace('+', "%2B")).as_bytes())
        .next()
        .map(|(_, v)| v.into_owned())
        .unwrap_or_else(|| path.to_owned())
}
