//! The resource server: authorizes each request against the catalogue and
//! answers from the monitor (latest) or the lake (metadata, temporal).

use std::sync::Arc;

use citylab_lake::{Lake, LakeError};
use citylab_monitor::{ApiRequest, Transport};
use citylab_resource::clock::{deployment_offset, epoch_to_utc, iso_with_offset, parse_m2m_timestamp};
use citylab_resource::{parse_positional_payload, Clock, DescriptorRecord, PayloadValue};
use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use crate::catalogue::{Catalogue, CatalogueItem, DataModel, ResourceGroup};
use crate::error::{ApiError, ApiResult, TokenError};
use crate::query::TemporalQuery;
use crate::token::Verifier;

pub const SUCCESS_TYPE: &str = "urn:dx:rs:success";
pub const OPEN_END: &str = "9999-12-31T23:59:59+05:30";
pub const OBSERVATION_TIME: &str = "observationDateTime";

#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub page_size: usize,
    pub max_span_days: i64,
    /// Originator used for monitor reads.
    pub monitor_origin: String,
    pub cse_path: String,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            page_size: 2000,
            max_span_days: 10,
            monitor_origin: "admin:admin".into(),
            cse_path: "/in-cse/in-name".into(),
        }
    }
}

pub struct ResourceServer {
    cfg: ExchangeConfig,
    catalogue: Arc<Catalogue>,
    verifier: Verifier,
    lake: Lake,
    monitor: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
}

fn success(title: &str, results: Vec<Value>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("title".into(), title.into());
    m.insert("type".into(), SUCCESS_TYPE.into());
    m.insert("results".into(), Value::Array(results));
    m
}

fn inst_value(v: &PayloadValue) -> Value {
    match v {
        PayloadValue::Number(x) => json!(x),
        PayloadValue::Text(s) => json!(s),
        PayloadValue::Null => json!("nan"),
    }
}

fn plain_value(v: &PayloadValue) -> Value {
    match v {
        PayloadValue::Number(x) => json!(x.to_string()),
        PayloadValue::Text(s) => json!(s),
        PayloadValue::Null => json!("nan"),
    }
}

/// One data point in the exchange data model: mapped attributes, then the
/// observation time and version.
pub fn render_record(
    item_id: Option<&str>,
    model: &DataModel,
    values: &IndexMap<String, PayloadValue>,
    ts: i64,
    version: &str,
) -> Map<String, Value> {
    let mut m = Map::new();
    if let Some(id) = item_id {
        m.insert("id".into(), id.into());
    }
    for (name, v) in values {
        if name == "Timestamp" {
            continue;
        }
        let a = model.map(name);
        let rendered = if a.plain { plain_value(v) } else { json!({"instValue": inst_value(v)}) };
        m.insert(a.name, rendered);
    }
    let t = epoch_to_utc(ts).unwrap_or_default();
    m.insert(OBSERVATION_TIME.into(), iso_with_offset(t, deployment_offset()).into());
    m.insert("versionInfo".into(), json!({"versionName": version}));
    m
}

fn is_lake_miss(e: &LakeError) -> bool {
    matches!(e, LakeError::UnknownTenant(_) | LakeError::UnknownNode(_))
}

impl ResourceServer {
    pub fn new(
        cfg: ExchangeConfig,
        catalogue: Arc<Catalogue>,
        verifier: Verifier,
        lake: Lake,
        monitor: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            cfg,
            catalogue,
            verifier,
            lake,
            monitor,
            clock,
        }
    }

    pub fn catalogue(&self) -> &Arc<Catalogue> {
        &self.catalogue
    }

    pub fn config(&self) -> &ExchangeConfig {
        &self.cfg
    }

    pub fn verifier(&self) -> &Verifier {
        &self.verifier
    }

    /// Token first; a valid token naming an unknown item is a 404.
    pub fn authorize(&self, token: Option<&str>, id: &str) -> ApiResult<(CatalogueItem, ResourceGroup)> {
        let token = token.filter(|t| !t.is_empty()).ok_or(TokenError::Missing)?;
        let now = self.clock.now().timestamp();
        match self.verifier.verify(token, id, &self.catalogue, now) {
            Ok(_) => self.catalogue.resolve(id),
            Err(TokenError::NotCovered(_)) if self.catalogue.item(id).is_none() => {
                Err(ApiError::UnknownResource(id.to_owned()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn node_path(&self, group: &ResourceGroup, node: &str, cnt: &str) -> String {
        format!("{}/{}/{}/{}", self.cfg.cse_path, group.ae, node, cnt)
    }

    async fn latest_cin(&self, path: &str) -> ApiResult<Option<Value>> {
        let resp = self
            .monitor
            .send(ApiRequest::get(&format!("{path}/la"), &self.cfg.monitor_origin))
            .await
            .map_err(|e| ApiError::Backend(e.to_string()))?;
        match resp.status {
            200 => Ok(resp.body.and_then(|mut b| b.get_mut("m2m:cin").map(Value::take))),
            204 | 404 => Ok(None),
            s => Err(ApiError::Backend(format!("monitor answered {s} for {path}"))),
        }
    }

    fn tenant(&self, group: &ResourceGroup, node: &str) -> String {
        self.lake.locate(node).unwrap_or_else(|| self.lake.tenant_of(&group.vertical))
    }

    /// The lake's copy when it has one, otherwise the monitor's.
    async fn descriptor(&self, group: &ResourceGroup, node: &str) -> ApiResult<Option<DescriptorRecord>> {
        let tenant = self.tenant(group, node);
        if let Some(d) = self.lake.store(&tenant).and_then(|s| s.descriptor(node)) {
            return Ok(Some(d));
        }
        let Some(cin) = self.latest_cin(&self.node_path(group, node, "Descriptor")).await? else {
            return Ok(None);
        };
        let con = cin.get("con").and_then(Value::as_str).unwrap_or_default();
        DescriptorRecord::from_content(con)
            .map(Some)
            .map_err(|e| ApiError::Backend(format!("descriptor of {node}: {e}")))
    }

    pub async fn latest(&self, token: Option<&str>, id: &str) -> ApiResult<Value> {
        let (item, group) = self.authorize(token, id)?;
        let desc = self
            .descriptor(&group, &item.name)
            .await?
            .ok_or_else(|| ApiError::NoData(id.to_owned()))?;
        let cin = self
            .latest_cin(&self.node_path(&group, &item.name, "Data"))
            .await?
            .ok_or_else(|| ApiError::NoData(id.to_owned()))?;
        let con = cin.get("con").and_then(Value::as_str).unwrap_or_default();
        let values = parse_positional_payload(&desc, con).map_err(|e| ApiError::Backend(e.to_string()))?;
        let ts = match values.get("Timestamp") {
            Some(PayloadValue::Number(t)) => *t as i64,
            _ => cin
                .get("ct")
                .and_then(Value::as_str)
                .and_then(parse_m2m_timestamp)
                .map(|t| t.timestamp())
                .unwrap_or_default(),
        };
        // the CIN's own version label is what the node reported; the
        // descriptor interval is the fallback
        let labels: Vec<String> = cin
            .get("lbl")
            .and_then(|l| serde_json::from_value(l.clone()).ok())
            .unwrap_or_default();
        let version = citylab_lake::version_label(&labels)
            .map(str::to_owned)
            .or_else(|| {
                epoch_to_utc(ts)
                    .and_then(|t| desc.version_at(t, deployment_offset()).ok().flatten())
                    .map(|v| v.ver.clone())
            })
            .unwrap_or_default();
        let rec = render_record(Some(&item.id), &group.data_model, &values, ts, &version);
        Ok(Value::Object(success("Successful Operation", vec![Value::Object(rec)])))
    }

    pub async fn metadata(&self, token: Option<&str>, id: &str) -> ApiResult<Value> {
        let (item, group) = self.authorize(token, id)?;
        let desc = self
            .descriptor(&group, &item.name)
            .await?
            .ok_or_else(|| ApiError::NoData(id.to_owned()))?;
        let offset = deployment_offset();
        let tenant = self.tenant(&group, &item.name);
        let dims = self.lake.store(&tenant).map(|s| s.versions(&item.name)).unwrap_or_default();
        let mut versions = Vec::new();
        for v in &desc.versions {
            let (start, end) = match dims.iter().find(|d| d.ver == v.ver) {
                Some(d) => (Some(d.start), d.end),
                None => (
                    v.start(offset).ok().map(|t| t.timestamp()),
                    v.end(offset).ok().flatten().map(|t| t.timestamp()),
                ),
            };
            let stamp = |t: Option<i64>| {
                t.and_then(epoch_to_utc)
                    .map(|t| iso_with_offset(t, offset))
                    .unwrap_or_else(|| OPEN_END.into())
            };
            let mut spec = Map::new();
            for p in &desc.parameters {
                if let Some(sensor) = v.sensors.get(p) {
                    spec.insert(group.data_model.map(p).name, sensor.clone().into());
                }
            }
            if !desc.device_model.controller.is_empty() {
                spec.insert("controller".into(), desc.device_model.controller.clone().into());
            }
            versions.push(json!({
                "versionName": v.ver,
                "startDateTime": stamp(start),
                "endDateTime": stamp(end),
                "versionSpec": spec,
                "comments": v.comments,
            }));
        }
        let result = json!({
            "id": format!("{}-version/version-info", group.id),
            "deviceInfo": {"deviceID": item.name, "deviceName": item.label},
            "versionInfo": versions,
        });
        Ok(Value::Object(success("Successful operation", vec![result])))
    }

    pub async fn temporal(&self, token: Option<&str>, id: &str, q: &TemporalQuery) -> ApiResult<Value> {
        let (item, group) = self.authorize(token, id)?;
        let (start, end) = q.window(self.cfg.max_span_days)?;
        let node = &item.name;
        let tenant = self.tenant(&group, node);
        let rows = match self.lake.query_temporal(&tenant, node, start, end, None) {
            Ok(r) => r,
            Err(e) if is_lake_miss(&e) => Vec::new(),
            Err(e) => return Err(ApiError::Backend(e.to_string())),
        };
        let params: Vec<String> = match self.lake.store(&tenant).and_then(|s| s.descriptor(node)) {
            Some(d) => d.parameters,
            None => rows.first().map(|r| r.values.keys().cloned().collect()).unwrap_or_default(),
        };
        let model = &group.data_model;
        let known = |a: &str| {
            a == OBSERVATION_TIME || a == "id" || a == "versionInfo" || model.reverse(&params, a).is_some()
        };
        if let Some(attrs) = &q.attrs {
            if let Some(bad) = attrs.iter().find(|a| !known(a)) {
                return Err(ApiError::BadQuery(format!("unknown attribute {bad}")));
            }
        }
        let filter = match &q.filter {
            Some(f) => {
                let src = model
                    .reverse(&params, &f.attr)
                    .ok_or_else(|| ApiError::BadQuery(format!("unknown attribute {}", f.attr)))?;
                Some((f, src.to_owned()))
            }
            None => None,
        };
        let matching: Vec<_> = rows
            .into_iter()
            .filter(|r| match &filter {
                Some((f, src)) => r.values.get(src).is_some_and(|v| f.matches(v)),
                None => true,
            })
            .collect();
        let total = matching.len();
        let page: Vec<Value> = matching
            .iter()
            .skip(q.offset)
            .take(self.cfg.page_size)
            .map(|r| {
                let mut rec = render_record(Some(&item.id), model, &r.values, r.ts, &r.version);
                if let Some(attrs) = &q.attrs {
                    rec.retain(|k, _| attrs.iter().any(|a| a == k));
                }
                Value::Object(rec)
            })
            .collect();
        let mut body = success("Successful Operation", page);
        body.insert("limit".into(), self.cfg.page_size.into());
        body.insert("offset".into(), q.offset.into());
        body.insert("totalHits".into(), total.into());
        Ok(Value::Object(body))
    }

    pub fn revoke(&self, token: Option<&str>) -> ApiResult<Value> {
        let token = token.ok_or(ApiError::Unauthenticated)?;
        let now = self.clock.now();
        let (sub, cutoff) = self.verifier.accept_revocation(token, now.timestamp())?;
        let at = epoch_to_utc(cutoff).unwrap_or(now);
        Ok(json!({
            "type": SUCCESS_TYPE,
            "title": "Token revoked",
            "results": [{"sub": sub, "revokedAt": iso_with_offset(at, deployment_offset())}],
        }))
    }
}
