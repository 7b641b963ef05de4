//! One interface for talking to the monitor, whether it lives in this
//! process or behind HTTP.

use std::time::Duration;

use async_trait::async_trait;

use crate::api::{ApiRequest, ApiResponse, Method, Monitor, ORIGIN_HEADER, RSC_HEADER};

#[derive(Debug, thiserror::Error)]
#[error("platform unreachable: {0}")]
pub struct Unreachable(pub String);

#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(&self, req: ApiRequest) -> Result<ApiResponse, Unreachable>;
}

#[async_trait]
impl Transport for Monitor {
    async fn send(&self, req: ApiRequest) -> Result<ApiResponse, Unreachable> {
        Ok(self.handle(&req))
    }
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    async fn send(&self, req: ApiRequest) -> Result<ApiResponse, Unreachable> {
        (**self).send(req).await
    }
}

/// Speaks the monitor's HTTP binding, e.g. `http://127.0.0.1:8080`.
#[derive(Clone)]
pub struct HttpTransport {
    base: String,
    client: reqwest::Client,
}

impl HttpTransport {
    pub fn new(base: &str, timeout: Duration) -> Result<Self, Unreachable> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Unreachable(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_owned(),
            client,
        })
    }
}

#[async_trait]
impl Transport for HttpTransport {
    async fn send(&self, req: ApiRequest) -> Result<ApiResponse, Unreachable> {
        let method = match req.method {
            Some(Method::Get) => reqwest::Method::GET,
            Some(Method::Post) => reqwest::Method::POST,
            Some(Method::Put) => reqwest::Method::PUT,
            Some(Method::Delete) => reqwest::Method::DELETE,
            None => return Err(Unreachable("request without method".into())),
        };
        let mut url = format!("{}/~{}", self.base, encode_path(&req.path));
        if !req.query.is_empty() {
            let q: String = form_urlencoded::Serializer::new(String::new())
                .extend_pairs(req.query.iter())
                .finish();
            url.push('?');
            url.push_str(&q);
        }
        let mut rb = self.client.request(method, &url);
        if let Some(o) = &req.origin {
            rb = rb.header(ORIGIN_HEADER, o);
        }
        if let Some(ct) = &req.content_type {
            rb = rb.header("Content-Type", ct);
        }
        if !req.body.is_empty() {
            rb = rb.body(req.body.clone());
        }
        let resp = rb.send().await.map_err(|e| Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let rsc = resp
            .headers()
            .get(RSC_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let bytes = resp.bytes().await.map_err(|e| Unreachable(e.to_string()))?;
        let body = if bytes.is_empty() {
            None
        } else {
            Some(serde_json::from_slice(&bytes).map_err(|e| Unreachable(format!("bad body: {e}")))?)
        };
        Ok(ApiResponse { status, rsc, body })
    }
}

fn encode_path(path: &str) -> String {
    let p = path.strip_prefix("/~").unwrap_or(path);
    p.split('/')
        .map(|seg| {
            seg.bytes()
                .map(|b| match b {
                    b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
                    _ => format!("%{b:02X}"),
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("/")
}
