use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::QualityError;
use crate::pipeline::Pipeline;
use crate::report::{report, DEFAULT_BIN_SECS};
use crate::triples::write_triples;

fn error(status: StatusCode, e: impl std::fmt::Display) -> Response {
    (status, Json(json!({"error": e.to_string()}))).into_response()
}

fn epoch(s: &str) -> Option<i64> {
    s.parse()
        .ok()
        .or_else(|| chrono::DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp()))
}

fn window(q: &HashMap<String, String>) -> Result<(String, i64, i64), Response> {
    let node = q
        .get("node")
        .cloned()
        .ok_or_else(|| error(StatusCode::BAD_REQUEST, "node missing"))?;
    let bound = |k: &str, dflt: i64| match q.get(k) {
        Some(v) => epoch(v).ok_or_else(|| error(StatusCode::BAD_REQUEST, format!("{k}: {v:?}"))),
        None => Ok(dflt),
    };
    Ok((node, bound("start", i64::MIN)?, bound("end", i64::MAX)?))
}

async fn notify(State(p): State<Arc<Pipeline>>, Json(body): Json<Value>) -> Response {
    match p.ingest_notification(&body) {
        Ok(o) => Json(json!({"assessed": o.len()})).into_response(),
        // dead-lettered, the sender need not retry
        Err(e) => Json(json!({"assessed": 0, "deadLettered": e.to_string()})).into_response(),
    }
}

async fn get_report(State(p): State<Arc<Pipeline>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let (node, start, end) = match window(&q) {
        Ok(w) => w,
        Err(r) => return r,
    };
    let bin = q.get("bin").and_then(|b| b.parse().ok()).unwrap_or(DEFAULT_BIN_SECS);
    match report(p.store(), &node, start, end, bin) {
        Ok(r) => Json(r).into_response(),
        Err(e @ QualityError::NoData(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn triples(State(p): State<Arc<Pipeline>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let (node, start, end) = match window(&q) {
        Ok(w) => w,
        Err(r) => return r,
    };
    let obs = p.store().observations(&node, start, end);
    let mut buf = Vec::new();
    write_triples(&mut buf, &obs).expect("in-memory write");
    ([("content-type", "text/plain; charset=utf-8")], buf).into_response()
}

/// `POST /notify`, `GET /report`, `GET /triples`, `GET /stats`.
pub fn router(p: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/notify", post(notify))
        .route("/report", get(get_report))
        .route("/triples", get(triples))
        .route("/stats", get(|State(p): State<Arc<Pipeline>>| async move { Json(p.stats()) }))
        .with_state(p)
}
