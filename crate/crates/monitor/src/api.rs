//! Transport-independent request handling. [`Monitor::handle`] maps one
//! request onto resource-tree operations; the HTTP layer only converts
//! to and from these types.

use std::sync::Arc;

use citylab_resource::{FanoutPayload, FanoutVerb, ResourceError, ResourceTree, ResourceType};
use serde_json::{json, Value};

use crate::envelope::{self, CreateBody};

pub const ORIGIN_HEADER: &str = "X-M2M-Origin";
pub const RSC_HEADER: &str = "X-M2M-RSC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Put,
    Delete,
}

#[derive(Debug, Clone, Default)]
pub struct ApiRequest {
    pub method: Option<Method>,
    /// Path as sent, with or without the `/~` prefix.
    pub path: String,
    pub query: Vec<(String, String)>,
    pub origin: Option<String>,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    pub fn get(uri: &str, origin: &str) -> Self {
        let (path, query) = split_uri(uri);
        Self {
            method: Some(Method::Get),
            path,
            query,
            origin: Some(origin.to_owned()),
            ..Default::default()
        }
    }

    pub fn post(uri: &str, origin: &str, ty: ResourceType, body: &Value) -> Self {
        let (path, query) = split_uri(uri);
        Self {
            method: Some(Method::Post),
            path,
            query,
            origin: Some(origin.to_owned()),
            content_type: Some(format!("application/json;ty={}", ty.code())),
            body: serde_json::to_vec(body).expect("json"),
        }
    }

    pub fn put(uri: &str, origin: &str, body: &Value) -> Self {
        Self {
            method: Some(Method::Put),
            body: serde_json::to_vec(body).expect("json"),
            content_type: Some("application/json".into()),
            ..Self::get(uri, origin)
        }
    }

    pub fn delete(uri: &str, origin: &str) -> Self {
        Self {
            method: Some(Method::Delete),
            ..Self::get(uri, origin)
        }
    }

    fn query_values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.query
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn query_value<'a>(&'a self, key: &'a str) -> Option<&'a str> {
        self.query_values(key).next()
    }

    /// The `ty` parameter of the content type (`application/json;ty=9`).
    pub fn resource_type(&self) -> Option<u64> {
        self.content_type.as_deref()?.split(';').find_map(|part| {
            let (k, v) = part.split_once('=')?;
            (k.trim() == "ty").then(|| v.trim().parse().ok()).flatten()
        })
    }
}

/// Splits `path?query` and percent-decodes the query.
pub fn split_uri(uri: &str) -> (String, Vec<(String, String)>) {
    match uri.split_once('?') {
        Some((p, q)) => (
            p.to_owned(),
            form_urlencoded::parse(q.as_bytes()).into_owned().collect(),
        ),
        None => (uri.to_owned(), Vec::new()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    /// oneM2M response status code.
    pub rsc: u16,
    pub body: Option<Value>,
}

impl ApiResponse {
    fn ok(status: u16, rsc: u16, body: Value) -> Self {
        Self {
            status,
            rsc,
            body: Some(body),
        }
    }

    fn error(status: u16, rsc: u16, msg: &str) -> Self {
        Self::ok(status, rsc, envelope::debug(msg))
    }
}

/// oneM2M response status code of a failed operation.
pub fn rsc_of(e: &ResourceError) -> u16 {
    match e {
        ResourceError::NotFound(_) => 4004,
        ResourceError::AccessDenied { .. } => 4103,
        ResourceError::DuplicateName(_) => 4105,
        ResourceError::Empty(_) => 4004,
        ResourceError::Storage(_) => 5000,
        _ => 4000,
    }
}

pub struct Monitor {
    tree: Arc<ResourceTree>,
}

impl Monitor {
    pub fn new(tree: Arc<ResourceTree>) -> Self {
        Self { tree }
    }

    pub fn tree(&self) -> &Arc<ResourceTree> {
        &self.tree
    }

    fn fail(&self, e: ResourceError, origin: &str) -> ApiResponse {
        let msg = e.to_string();
        match e {
            ResourceError::AccessDenied { .. } if !self.tree.is_known_originator(origin) => {
                ApiResponse::error(401, 4103, "unknown originator")
            }
            ResourceError::AccessDenied { .. } => ApiResponse::error(403, 4103, &msg),
            ResourceError::NotFound(_) => ApiResponse::error(404, 4004, &msg),
            ResourceError::DuplicateName(_) => ApiResponse::error(409, 4105, &msg),
            ResourceError::Empty(_) => ApiResponse {
                status: 204,
                rsc: 4004,
                body: None,
            },
            ResourceError::Storage(_) => ApiResponse::error(500, 5000, &msg),
            _ => ApiResponse::error(400, 4000, &msg),
        }
    }

    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        let Some(origin) = req.origin.as_deref().filter(|o| !o.is_empty()) else {
            return ApiResponse::error(401, 4000, "missing X-M2M-Origin");
        };
        if !self.tree.is_known_originator(origin) {
            return ApiResponse::error(401, 4103, "unknown originator");
        }
        let path = normalize(&req.path);
        let result = match req.method {
            Some(Method::Get) => self.get(&path, req, origin),
            Some(Method::Post) => self.post(&path, req, origin),
            Some(Method::Put) => self.put(&path, req, origin),
            Some(Method::Delete) => self
                .tree
                .delete_resource(&path, origin)
                .map(|_| ApiResponse::ok(200, 2002, json!({}))),
            None => return ApiResponse::error(405, 4000, "unsupported method"),
        };
        result.unwrap_or_else(|e| self.fail(e, origin))
    }

    fn get(&self, path: &str, req: &ApiRequest, origin: &str) -> Result<ApiResponse, ResourceError> {
        let rcn4 = req.query_value("rcn") == Some("4");

        if req.query_value("fu") == Some("1") {
            let labels: Vec<String> = req.query_values("lbl").map(str::to_owned).collect();
            let paths = self.tree.discover_under(path, &labels, origin)?;
            return Ok(ApiResponse::ok(200, 2000, envelope::uril(&paths)));
        }

        if let Some((grp, rest)) = split_fopt(path) {
            let verb = match rest {
                "la" => FanoutVerb::Latest,
                "ol" => FanoutVerb::Oldest,
                "" if rcn4 => FanoutVerb::All,
                _ => return Err(ResourceError::BadRequest(format!("unsupported fan-out {rest:?}"))),
            };
            let results = self.tree.group_fanout(grp, verb, origin)?;
            let rsp: Vec<Value> = results
                .into_iter()
                .map(|m| match m.result {
                    Ok(FanoutPayload::One(c)) => json!({ "rsc": 2000, "to": m.member, "pc": envelope::cin(&c) }),
                    Ok(FanoutPayload::All(cs)) => json!({ "rsc": 2000, "to": m.member, "pc": { "m2m:cin": cs } }),
                    Err(e) => json!({ "rsc": rsc_of(&e), "to": m.member, "pc": envelope::debug(&e.to_string()) }),
                })
                .collect();
            return Ok(ApiResponse::ok(200, 2000, json!({ "m2m:agr": { "m2m:rsp": rsp } })));
        }

        if let Some((parent, last)) = path.rsplit_once('/') {
            let virtual_child = match last {
                "la" => Some(true),
                "ol" => Some(false),
                _ => None,
            };
            if let Some(latest) = virtual_child {
                if self.tree.exists(parent) {
                    let c = if latest {
                        self.tree.latest(parent, origin)?
                    } else {
                        self.tree.oldest(parent, origin)?
                    };
                    return Ok(ApiResponse::ok(200, 2000, envelope::cin(&c)));
                }
            }
        }

        if self.tree.exists(path) {
            let view = self.tree.retrieve(path, origin)?;
            if rcn4 && view.resource.ty == ResourceType::Container {
                let (view, cins) = self.tree.container_with_data(path, origin)?;
                return Ok(ApiResponse::ok(200, 2000, envelope::container_with_children(&view, &cins)));
            }
            return Ok(ApiResponse::ok(200, 2000, envelope::resource(&view)));
        }

        let c = self.tree.retrieve_instance(path, origin)?;
        Ok(ApiResponse::ok(200, 2000, envelope::cin(&c)))
    }

    fn post(&self, path: &str, req: &ApiRequest, origin: &str) -> Result<ApiResponse, ResourceError> {
        let ty = req
            .resource_type()
            .and_then(ResourceType::from_code)
            .ok_or_else(|| ResourceError::BadRequest("content type carries no known ty".into()))?;
        let body: Value = serde_json::from_slice(&req.body)
            .map_err(|e| ResourceError::BadRequest(format!("body is not JSON: {e}")))?;
        match envelope::parse_create(ty, &body)? {
            CreateBody::Instance(spec) => {
                let ins = self.tree.insert_cin(path, spec, origin)?;
                Ok(ApiResponse::ok(201, 2001, envelope::cin(&ins.cin)))
            }
            CreateBody::Resource(spec) => {
                let id = self.tree.create_resource(path, spec, origin)?;
                let view = self.tree.retrieve(&id.ri, &self.tree.config().admin_originator)?;
                Ok(ApiResponse::ok(201, 2001, envelope::resource(&view)))
            }
        }
    }

    fn put(&self, path: &str, req: &ApiRequest, origin: &str) -> Result<ApiResponse, ResourceError> {
        let body: Value = serde_json::from_slice(&req.body)
            .map_err(|e| ResourceError::BadRequest(format!("body is not JSON: {e}")))?;
        let ty = {
            let admin = self.tree.config().admin_originator.clone();
            self.tree.retrieve(path, &admin)?.resource.ty
        };
        let update = envelope::parse_update(ty, &body)?;
        let id = self.tree.update_resource(path, update, origin)?;
        let view = self.tree.retrieve(&id.ri, &self.tree.config().admin_originator)?;
        Ok(ApiResponse::ok(200, 2004, envelope::resource(&view)))
    }
}

fn normalize(path: &str) -> String {
    let p = path.strip_prefix("/~").unwrap_or(path);
    let p = p.trim_end_matches('/');
    if p.is_empty() {
        "/".into()
    } else {
        p.to_owned()
    }
}

/// `/x/AQ-GRP/fopt/la` -> (`/x/AQ-GRP`, `la`).
fn split_fopt(path: &str) -> Option<(&str, &str)> {
    if let Some(grp) = path.strip_suffix("/fopt") {
        return Some((grp, ""));
    }
    let idx = path.find("/fopt/")?;
    Some((&path[..idx], &path[idx + "/fopt/".len()..]))
}
