//! Thin typed client over a monitor [`Transport`], shared by the charger,
//! the simulators and the seeder.

use std::sync::Arc;

use citylab_monitor::{ApiRequest, ApiResponse, Transport};
use citylab_resource::ResourceType;
use serde_json::{json, Value};

pub const CSE_PATH: &str = "/in-cse/in-name";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("platform unreachable: {0}")]
    Unreachable(String),
    #[error("platform answered {status}: {body}")]
    Api { status: u16, body: Value },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Unreachable(_) => None,
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

#[derive(Clone)]
pub struct PlatformClient {
    transport: Arc<dyn Transport>,
    origin: String,
}

impl PlatformClient {
    pub fn new(transport: Arc<dyn Transport>, origin: impl Into<String>) -> Self {
        Self {
            transport,
            origin: origin.into(),
        }
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub async fn send(&self, req: ApiRequest) -> ClientResult<ApiResponse> {
        self.transport
            .send(req)
            .await
            .map_err(|e| ClientError::Unreachable(e.0))
    }

    async fn expect_ok(&self, req: ApiRequest) -> ClientResult<ApiResponse> {
        let resp = self.send(req).await?;
        if (200..300).contains(&resp.status) {
            Ok(resp)
        } else {
            Err(ClientError::Api {
                status: resp.status,
                body: resp.body.unwrap_or(Value::Null),
            })
        }
    }

    pub async fn get(&self, uri: &str) -> ClientResult<ApiResponse> {
        self.send(ApiRequest::get(uri, &self.origin)).await
    }

    pub async fn exists(&self, path: &str) -> ClientResult<bool> {
        let resp = self.get(path).await?;
        match resp.status {
            200..=299 => Ok(true),
            404 => Ok(false),
            status => Err(ClientError::Api {
                status,
                body: resp.body.unwrap_or(Value::Null),
            }),
        }
    }

    /// The latest instance of a container, `None` when it holds none.
    pub async fn latest(&self, container: &str) -> ClientResult<Option<Value>> {
        let resp = self
            .expect_ok(ApiRequest::get(&format!("{container}/la"), &self.origin))
            .await?;
        if resp.status == 204 {
            return Ok(None);
        }
        Ok(resp.body.map(|mut b| b["m2m:cin"].take()))
    }

    pub async fn create(
        &self,
        parent: &str,
        ty: ResourceType,
        body: &Value,
    ) -> ClientResult<Value> {
        let resp = self
            .expect_ok(ApiRequest::post(parent, &self.origin, ty, body))
            .await?;
        Ok(resp.body.unwrap_or(Value::Null))
    }

    /// Creates unless the name is already taken.
    pub async fn ensure(&self, parent: &str, ty: ResourceType, body: &Value) -> ClientResult<bool> {
        match self.create(parent, ty, body).await {
            Ok(_) => Ok(true),
            Err(ClientError::Api { status: 409, .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub async fn ensure_ae(&self, rn: &str, labels: &[String]) -> ClientResult<bool> {
        let body = json!({ "m2m:ae": { "rn": rn, "api": rn, "rr": true, "lbl": labels } });
        self.ensure(CSE_PATH, ResourceType::Ae, &body).await
    }

    pub async fn ensure_container(
        &self,
        parent: &str,
        rn: &str,
        labels: &[String],
        mni: Option<u64>,
    ) -> ClientResult<bool> {
        let mut cnt = json!({ "rn": rn, "lbl": labels });
        if let Some(m) = mni {
            cnt["mni"] = json!(m);
        }
        self.ensure(parent, ResourceType::Container, &json!({ "m2m:cnt": cnt }))
            .await
    }

    pub async fn post_cin(
        &self,
        container: &str,
        con: &str,
        labels: &[String],
    ) -> ClientResult<Value> {
        let body = json!({ "m2m:cin": { "cnf": "text", "con": con, "lbl": labels } });
        let mut created = self
            .create(container, ResourceType::ContentInstance, &body)
            .await?;
        Ok(created["m2m:cin"].take())
    }

    pub async fn subscribe(&self, container: &str, rn: &str, nu: &str) -> ClientResult<bool> {
        let body = json!({ "m2m:sub": { "rn": rn, "nu": [nu], "nct": 1 } });
        self.ensure(container, ResourceType::Subscription, &body)
            .await
    }
}
