use serde::{Deserialize, Serialize};

use crate::acp::AccessPolicy;

/// oneM2M resource types with their numeric `ty` codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceType {
    AccessControlPolicy,
    Ae,
    Container,
    ContentInstance,
    CseBase,
    Group,
    Subscription,
}

impl ResourceType {
    pub const fn code(self) -> u8 {
        match self {
            ResourceType::AccessControlPolicy => 1,
            ResourceType::Ae => 2,
            ResourceType::Container => 3,
            ResourceType::ContentInstance => 4,
            ResourceType::CseBase => 5,
            ResourceType::Group => 9,
            ResourceType::Subscription => 23,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Some(match code {
            1 => ResourceType::AccessControlPolicy,
            2 => ResourceType::Ae,
            3 => ResourceType::Container,
            4 => ResourceType::ContentInstance,
            5 => ResourceType::CseBase,
            9 => ResourceType::Group,
            23 => ResourceType::Subscription,
            _ => return None,
        })
    }

    /// Prefix of generated `ri` values (`cnt-12`).
    pub const fn prefix(self) -> &'static str {
        match self {
            ResourceType::AccessControlPolicy => "acp",
            ResourceType::Ae => "ae",
            ResourceType::Container => "cnt",
            ResourceType::ContentInstance => "cin",
            ResourceType::CseBase => "cb",
            ResourceType::Group => "grp",
            ResourceType::Subscription => "sub",
        }
    }

    /// Response envelope key (`m2m:cnt`).
    pub const fn envelope(self) -> &'static str {
        match self {
            ResourceType::AccessControlPolicy => "m2m:acp",
            ResourceType::Ae => "m2m:ae",
            ResourceType::Container => "m2m:cnt",
            ResourceType::ContentInstance => "m2m:cin",
            ResourceType::CseBase => "m2m:cb",
            ResourceType::Group => "m2m:grp",
            ResourceType::Subscription => "m2m:sub",
        }
    }
}

/// Both addresses of a resource: the unstructured `ri` (`/in-cse/cnt-7`) and
/// the hierarchical path (`/in-cse/in-name/AE-AQ/AQ-MG00-00/Data`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceId {
    pub ri: String,
    pub path: String,
}

impl ResourceId {
    pub fn rn(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attributes {
    CseBase {
        csi: String,
    },
    Ae {
        api: String,
    },
    /// `mbs` and `mia` are stored and reported but not enforced.
    Container {
        mni: usize,
        mbs: u64,
        mia: u64,
    },
    AccessControlPolicy(AccessPolicy),
    Group {
        mt: u8,
        mid: Vec<String>,
        mnm: usize,
    },
    Subscription {
        nu: Vec<String>,
        creator: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub ty: ResourceType,
    pub rn: String,
    pub ri: String,
    pub pi: Option<String>,
    pub path: String,
    pub ct: String,
    pub lt: String,
    #[serde(default)]
    pub et: Option<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub acpi: Vec<String>,
    pub attrs: Attributes,
}

impl Resource {
    pub fn id(&self) -> ResourceId {
        ResourceId {
            ri: self.ri.clone(),
            path: self.path.clone(),
        }
    }

    pub fn policy(&self) -> Option<&AccessPolicy> {
        match &self.attrs {
            Attributes::AccessControlPolicy(p) => Some(p),
            _ => None,
        }
    }
}

/// Immutable once created. Field order follows the platform's `m2m:cin`
/// representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentInstance {
    pub rn: String,
    pub ty: u8,
    pub ri: String,
    pub pi: String,
    pub ct: String,
    pub lt: String,
    pub lbl: Vec<String>,
    pub st: u64,
    pub cnf: String,
    pub cs: usize,
    pub con: String,
}

/// Live counters of a container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerStats {
    pub st: u64,
    pub cni: usize,
    pub cbs: u64,
    pub ol: String,
    pub la: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceView {
    pub resource: Resource,
    pub container: Option<ContainerStats>,
}

/// What a caller asks to create.
#[derive(Debug, Clone, PartialEq)]
pub enum ResourceSpec {
    Ae {
        rn: String,
        labels: Vec<String>,
        acpi: Vec<String>,
    },
    Container {
        rn: String,
        labels: Vec<String>,
        acpi: Vec<String>,
        mni: Option<usize>,
        mbs: Option<u64>,
        mia: Option<u64>,
    },
    AccessControlPolicy {
        rn: String,
        policy: AccessPolicy,
    },
    Group {
        rn: String,
        mt: u8,
        mid: Vec<String>,
        mnm: usize,
        labels: Vec<String>,
        acpi: Vec<String>,
    },
    Subscription {
        rn: String,
        nu: Vec<String>,
    },
}

impl ResourceSpec {
    pub fn ty(&self) -> ResourceType {
        match self {
            ResourceSpec::Ae { .. } => ResourceType::Ae,
            ResourceSpec::Container { .. } => ResourceType::Container,
            ResourceSpec::AccessControlPolicy { .. } => ResourceType::AccessControlPolicy,
            ResourceSpec::Group { .. } => ResourceType::Group,
            ResourceSpec::Subscription { .. } => ResourceType::Subscription,
        }
    }

    pub fn rn(&self) -> &str {
        match self {
            ResourceSpec::Ae { rn, .. }
            | ResourceSpec::Container { rn, .. }
            | ResourceSpec::AccessControlPolicy { rn, .. }
            | ResourceSpec::Group { rn, .. }
            | ResourceSpec::Subscription { rn, .. } => rn,
        }
    }

    pub fn container(rn: impl Into<String>, labels: Vec<String>, acpi: Vec<String>) -> Self {
        ResourceSpec::Container {
            rn: rn.into(),
            labels,
            acpi,
            mni: None,
            mbs: None,
            mia: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CinSpec {
    pub rn: Option<String>,
    pub con: String,
    pub labels: Vec<String>,
    pub cnf: Option<String>,
}

impl CinSpec {
    pub fn new(con: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            rn: None,
            con: con.into(),
            labels,
            cnf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inserted {
    pub cin: ContentInstance,
    pub evicted: Option<ResourceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanoutVerb {
    Latest,
    Oldest,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FanoutPayload {
    One(ContentInstance),
    All(Vec<ContentInstance>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberResult {
    pub member: String,
    pub result: Result<FanoutPayload, crate::error::ResourceError>,
}

/// Partial update of an existing resource.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateSpec {
    pub labels: Option<Vec<String>>,
    pub acpi: Option<Vec<String>>,
    pub policy: Option<AccessPolicy>,
}
