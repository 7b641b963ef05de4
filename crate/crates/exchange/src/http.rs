//! HTTP surface of the exchange. Tokens travel in a `token` header or as
//! `Authorization: Bearer`.

use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tower_http::compression::CompressionLayer;

use crate::error::{ApiError, ApiResult};
use crate::query::TemporalQuery;
use crate::server::ResourceServer;
use crate::token::{TokenRequest, TokenService};

pub struct Exchange {
    pub rs: ResourceServer,
    pub auth: TokenService,
}

type Params = Query<Vec<(String, String)>>;

pub fn router(ex: Arc<Exchange>, gzip: bool) -> Router {
    let r = Router::new()
        .route("/catalogue", get(catalogue))
        .route("/token", post(token))
        .route("/revoke", post(revoke))
        .route("/meta", get(meta))
        .route("/entities/latest", get(latest))
        .route("/temporal/entities", get(temporal))
        .with_state(ex);
    if gzip {
        r.layer(CompressionLayer::new())
    } else {
        r
    }
}

fn reply(res: ApiResult<Value>) -> Response {
    match res {
        Ok(v) => Json(v).into_response(),
        Err(e) => {
            let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(e.body())).into_response()
        }
    }
}

fn token_of(h: &HeaderMap) -> Option<String> {
    if let Some(t) = h.get("token").and_then(|v| v.to_str().ok()) {
        return Some(t.to_owned());
    }
    h.get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::to_owned)
}

fn param<'a>(p: &'a [(String, String)], k: &str) -> ApiResult<&'a str> {
    p.iter()
        .find(|(n, _)| n == k)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| ApiError::BadQuery(format!("{k} missing")))
}

async fn catalogue(State(ex): State<Arc<Exchange>>, Query(p): Params) -> Response {
    reply(param(&p, "id").and_then(|id| ex.rs.catalogue().lookup(id)).map(|l| l.to_json()))
}

async fn token(State(ex): State<Arc<Exchange>>, h: HeaderMap, body: axum::body::Bytes) -> Response {
    let header = |k: &str| h.get(k).and_then(|v| v.to_str().ok()).unwrap_or_default().to_owned();
    let (user, secret) = (header("clientId"), header("clientSecret"));
    let res = ex.auth.authenticate(&user, &secret).and_then(|_| {
        let req: TokenRequest =
            serde_json::from_slice(&body).map_err(|e| ApiError::BadQuery(format!("token request: {e}")))?;
        let t = ex.auth.issue(&user, &req)?;
        Ok(json!({
            "type": "urn:dx:as:Success",
            "title": "Token created",
            "results": {"accessToken": t, "server": ex.rs.catalogue().server()},
        }))
    });
    reply(res)
}

async fn revoke(State(ex): State<Arc<Exchange>>, h: HeaderMap) -> Response {
    reply(ex.rs.revoke(token_of(&h).as_deref()))
}

async fn meta(State(ex): State<Arc<Exchange>>, h: HeaderMap, Query(p): Params) -> Response {
    let res = match param(&p, "id") {
        Ok(id) => ex.rs.metadata(token_of(&h).as_deref(), id).await,
        Err(e) => Err(e),
    };
    reply(res)
}

async fn latest(State(ex): State<Arc<Exchange>>, h: HeaderMap, Query(p): Params) -> Response {
    let res = match param(&p, "id") {
        Ok(id) => ex.rs.latest(token_of(&h).as_deref(), id).await,
        Err(e) => Err(e),
    };
    reply(res)
}

async fn temporal(State(ex): State<Arc<Exchange>>, h: HeaderMap, Query(p): Params) -> Response {
    let token = token_of(&h);
    let res = async {
        let id = param(&p, "id")?;
        // reject a bad token before complaining about the query
        if token.is_none() {
            ex.rs.authorize(None, id)?;
        }
        let q = TemporalQuery::from_params(&p)?;
        ex.rs.temporal(token.as_deref(), id, &q).await
    }
    .await;
    reply(res)
}
