//! HTTP notification endpoint. Any POST path is an intake; `GET /stats`
//! reports counters.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;

use crate::error::LakeError;
use crate::intake::{Ack, Lake, Source};

pub const ORIGIN_HEADER: &str = "X-M2M-Origin";

pub fn router(lake: Lake) -> Router {
    Router::new()
        .route("/stats", get(stats))
        .fallback(intake)
        .with_state(lake)
}

async fn stats(State(lake): State<Lake>) -> Json<crate::intake::LakeStats> {
    Json(lake.stats())
}

async fn intake(State(lake): State<Lake>, req: Request) -> Response {
    if req.method() != axum::http::Method::POST {
        return StatusCode::METHOD_NOT_ALLOWED.into_response();
    }
    let src = Source {
        origin: req
            .headers()
            .get(ORIGIN_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned),
        ip: req
            .extensions()
            .get::<ConnectInfo<SocketAddr>>()
            .map(|c| c.0.ip()),
    };
    let body: Bytes = match axum::body::to_bytes(req.into_body(), 4 << 20).await {
        Ok(b) => b,
        Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    };
    // journaling is a short blocking write
    let res = tokio::task::block_in_place(|| lake.receive(&body, &src));
    match res {
        Ok(Ack::Queued { seq, tenant }) => Json(json!({"status": "queued", "seq": seq, "tenant": tenant})).into_response(),
        Ok(Ack::Verification) => Json(json!({"status": "verified"})).into_response(),
        Ok(Ack::DeadLettered) => Json(json!({"status": "dead-lettered"})).into_response(),
        Err(e) => {
            let status = match e {
                LakeError::Forbidden(_) => StatusCode::FORBIDDEN,
                LakeError::Malformed(_) => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            (status, Json(json!({"error": e.to_string()}))).into_response()
        }
    }
}
