//! JSON representations of resources and request bodies, with attribute
//! order matching what the platform shows.

use citylab_resource::{
    acop_decode, AccessPolicy, AccessRule, Attributes, ContainerStats, ContentInstance, Resource,
    ResourceError, ResourceSpec, ResourceType, ResourceView, UpdateSpec,
};
use serde::Deserialize;
use serde_json::{json, Map, Value};

pub fn cin(c: &ContentInstance) -> Value {
    json!({ "m2m:cin": c })
}

pub fn uril(paths: &[String]) -> Value {
    json!({ "m2m:uril": paths })
}

pub fn debug(msg: &str) -> Value {
    json!({ "m2m:dbg": msg })
}

fn rules_json(rules: &[AccessRule]) -> Value {
    let acr: Vec<Value> = rules
        .iter()
        .map(|r| json!({ "acor": [r.originator], "acop": r.acop.mask() }))
        .collect();
    json!({ "acr": acr })
}

/// Attribute map of a resource, without the `m2m:*` wrapper.
pub fn attributes(r: &Resource, stats: Option<&ContainerStats>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("rn".into(), json!(r.rn));
    m.insert("ty".into(), json!(r.ty.code()));
    m.insert("ri".into(), json!(r.ri));
    if let Some(pi) = &r.pi {
        m.insert("pi".into(), json!(pi));
    }
    m.insert("ct".into(), json!(r.ct));
    m.insert("lt".into(), json!(r.lt));
    match &r.attrs {
        Attributes::CseBase { csi } => {
            m.insert("acpi".into(), json!(r.acpi));
            m.insert("csi".into(), json!(csi));
        }
        Attributes::Ae { api } => {
            m.insert("lbl".into(), json!(r.labels));
            m.insert("acpi".into(), json!(r.acpi));
            m.insert("api".into(), json!(api));
        }
        Attributes::Container { mni, mbs, mia } => {
            m.insert("lbl".into(), json!(r.labels));
            m.insert("acpi".into(), json!(r.acpi));
            if let Some(et) = &r.et {
                m.insert("et".into(), json!(et));
            }
            let st = stats.map(|s| s.st).unwrap_or(0);
            m.insert("st".into(), json!(st));
            m.insert("mni".into(), json!(mni));
            m.insert("mbs".into(), json!(mbs));
            m.insert("mia".into(), json!(mia));
            if let Some(s) = stats {
                m.insert("cni".into(), json!(s.cni));
                m.insert("cbs".into(), json!(s.cbs));
                m.insert("ol".into(), json!(s.ol));
                m.insert("la".into(), json!(s.la));
            }
        }
        Attributes::AccessControlPolicy(p) => {
            m.insert("pv".into(), rules_json(&p.rules));
            m.insert("pvs".into(), rules_json(&p.self_rules));
        }
        Attributes::Group { mt, mid, mnm } => {
            m.insert("lbl".into(), json!(r.labels));
            m.insert("acpi".into(), json!(r.acpi));
            m.insert("mt".into(), json!(mt));
            m.insert("mid".into(), json!(mid));
            m.insert("mnm".into(), json!(mnm));
            m.insert("cnm".into(), json!(mid.len()));
            m.insert("fopt".into(), json!(format!("{}/fopt", r.path)));
        }
        Attributes::Subscription { nu, .. } => {
            m.insert("nu".into(), json!(nu));
            m.insert("nct".into(), json!(1));
        }
    }
    m
}

pub fn resource(view: &ResourceView) -> Value {
    let mut outer = Map::new();
    outer.insert(
        view.resource.ty.envelope().into(),
        Value::Object(attributes(&view.resource, view.container.as_ref())),
    );
    Value::Object(outer)
}

/// `rcn=4` style container: attributes plus every stored instance.
pub fn container_with_children(view: &ResourceView, cins: &[ContentInstance]) -> Value {
    let mut attrs = attributes(&view.resource, view.container.as_ref());
    attrs.insert("m2m:cin".into(), json!(cins));
    json!({ "m2m:cnt": attrs })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => s.split_whitespace().map(str::to_owned).collect(),
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
struct AeBody {
    rn: String,
    #[serde(default)]
    lbl: Vec<String>,
    #[serde(default)]
    acpi: Vec<String>,
}

#[derive(Deserialize)]
struct CntBody {
    rn: String,
    #[serde(default)]
    lbl: Vec<String>,
    #[serde(default)]
    acpi: Vec<String>,
    mni: Option<usize>,
    mbs: Option<u64>,
    mia: Option<u64>,
}

#[derive(Deserialize)]
struct RuleBody {
    acor: OneOrMany,
    acop: i64,
}

#[derive(Deserialize)]
struct RulesBody {
    #[serde(default)]
    acr: Vec<RuleBody>,
}

#[derive(Deserialize)]
struct AcpBody {
    rn: Option<String>,
    pv: Option<RulesBody>,
    pvs: Option<RulesBody>,
}

#[derive(Deserialize)]
struct GrpBody {
    #[serde(alias = "m")]
    rn: String,
    mt: u8,
    mid: Vec<String>,
    mnm: usize,
    #[serde(default)]
    lbl: Vec<String>,
    #[serde(default)]
    acpi: Vec<String>,
}

#[derive(Deserialize)]
struct SubBody {
    rn: String,
    nu: OneOrMany,
}

#[derive(Deserialize)]
struct CinBody {
    rn: Option<String>,
    con: Value,
    #[serde(default)]
    lbl: Vec<String>,
    cnf: Option<String>,
}

#[derive(Deserialize)]
struct UpdateBody {
    lbl: Option<Vec<String>>,
    acpi: Option<Vec<String>>,
    pv: Option<RulesBody>,
    pvs: Option<RulesBody>,
}

fn bad(e: impl std::fmt::Display) -> ResourceError {
    ResourceError::BadRequest(e.to_string())
}

fn unwrap_envelope(body: &Value, ty: ResourceType) -> Result<Value, ResourceError> {
    body.get(ty.envelope())
        .cloned()
        .ok_or_else(|| bad(format!("body must be wrapped in {:?}", ty.envelope())))
}

fn rules(body: Option<RulesBody>) -> Result<Vec<AccessRule>, ResourceError> {
    let mut out = Vec::new();
    for r in body.map(|b| b.acr).unwrap_or_default() {
        let acop = acop_decode(r.acop)?;
        for o in r.acor.into_vec() {
            out.push(AccessRule::new(o, acop));
        }
    }
    Ok(out)
}

/// Request body of a creation, decoded according to the `ty` of the
/// content type.
pub enum CreateBody {
    Resource(ResourceSpec),
    Instance(citylab_resource::CinSpec),
}

pub fn parse_create(ty: ResourceType, body: &Value) -> Result<CreateBody, ResourceError> {
    let inner = unwrap_envelope(body, ty)?;
    let spec = match ty {
        ResourceType::Ae => {
            let b: AeBody = serde_json::from_value(inner).map_err(bad)?;
            ResourceSpec::Ae {
                rn: b.rn,
                labels: b.lbl,
                acpi: b.acpi,
            }
        }
        ResourceType::Container => {
            let b: CntBody = serde_json::from_value(inner).map_err(bad)?;
            ResourceSpec::Container {
                rn: b.rn,
                labels: b.lbl,
                acpi: b.acpi,
                mni: b.mni,
                mbs: b.mbs,
                mia: b.mia,
            }
        }
        ResourceType::AccessControlPolicy => {
            let b: AcpBody = serde_json::from_value(inner).map_err(bad)?;
            let rn = b.rn.ok_or_else(|| bad("acp needs rn"))?;
            let policy = AccessPolicy::new(rules(b.pv)?, rules(b.pvs)?)?;
            ResourceSpec::AccessControlPolicy { rn, policy }
        }
        ResourceType::Group => {
            let b: GrpBody = serde_json::from_value(inner).map_err(bad)?;
            ResourceSpec::Group {
                rn: b.rn,
                mt: b.mt,
                mid: b.mid,
                mnm: b.mnm,
                labels: b.lbl,
                acpi: b.acpi,
            }
        }
        ResourceType::Subscription => {
            let b: SubBody = serde_json::from_value(inner).map_err(bad)?;
            ResourceSpec::Subscription {
                rn: b.rn,
                nu: b.nu.into_vec(),
            }
        }
        ResourceType::ContentInstance => {
            let b: CinBody = serde_json::from_value(inner).map_err(bad)?;
            let con = match b.con {
                Value::String(s) => s,
                other => other.to_string(),
            };
            return Ok(CreateBody::Instance(citylab_resource::CinSpec {
                rn: b.rn,
                con,
                labels: b.lbl,
                cnf: b.cnf,
            }));
        }
        ResourceType::CseBase => return Err(bad("the CSE cannot be created")),
    };
    Ok(CreateBody::Resource(spec))
}

pub fn parse_update(ty: ResourceType, body: &Value) -> Result<UpdateSpec, ResourceError> {
    let inner = unwrap_envelope(body, ty)?;
    let b: UpdateBody = serde_json::from_value(inner).map_err(bad)?;
    let policy = if b.pv.is_some() || b.pvs.is_some() {
        Some(AccessPolicy::new(rules(b.pv)?, rules(b.pvs)?)?)
    } else {
        None
    };
    Ok(UpdateSpec {
        labels: b.lbl,
        acpi: b.acpi,
        policy,
    })
}
