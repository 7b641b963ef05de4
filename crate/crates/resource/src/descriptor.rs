//! Node descriptors: the content of the single CIN stored in a node's
//! `Descriptor` container. Keys mirror the attribute names shown on the
//! platform (`Node ID`, `Data String Parameters`, ...).

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::clock::{parse_descriptor_stamp, OPEN_END_STAMP};
use crate::error::{ResourceError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    #[serde(rename = "Latitude")]
    pub latitude: f64,
    #[serde(rename = "Longitude")]
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceModel {
    #[serde(rename = "Controller", default)]
    pub controller: String,
    #[serde(rename = "Device", default)]
    pub device: String,
    #[serde(rename = "Sensors", default)]
    pub sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionEntry {
    pub ver: String,
    pub dt_start: String,
    pub dt_end: String,
    /// Parameter name to sensor model, e.g. `PM2.5 -> SDS011`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sensors: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub comments: String,
}

impl VersionEntry {
    pub fn start(&self, offset: FixedOffset) -> Result<DateTime<Utc>> {
        parse_descriptor_stamp(&self.dt_start, offset)
            .ok_or_else(|| ResourceError::MalformedContent(format!("bad dt_start {}", self.dt_start)))
    }

    /// `None` for the open-ended sentinel.
    pub fn end(&self, offset: FixedOffset) -> Result<Option<DateTime<Utc>>> {
        if self.dt_end.trim() == OPEN_END_STAMP {
            return Ok(None);
        }
        parse_descriptor_stamp(&self.dt_end, offset)
            .map(Some)
            .ok_or_else(|| ResourceError::MalformedContent(format!("bad dt_end {}", self.dt_end)))
    }

    pub fn covers(&self, t: DateTime<Utc>, offset: FixedOffset) -> Result<bool> {
        let start = self.start(offset)?;
        let end = self.end(offset)?;
        Ok(t >= start && end.is_none_or(|e| t < e))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterDescription {
    pub description: String,
    pub datatype: String,
    pub unit: String,
    pub resolution: String,
    pub accuracy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    #[serde(rename = "Node ID")]
    pub node_id: String,
    #[serde(rename = "Node Location", default)]
    pub location: Location,
    #[serde(rename = "Device Model", default)]
    pub device_model: DeviceModel,
    #[serde(rename = "Version History", default)]
    pub versions: Vec<VersionEntry>,
    #[serde(rename = "Data String Parameters")]
    pub parameters: Vec<String>,
    #[serde(rename = "Parameters Description", default)]
    pub descriptions: IndexMap<String, ParameterDescription>,
}

impl DescriptorRecord {
    /// Bare descriptor with only the parameter list filled in.
    pub fn with_parameters<I, S>(node_id: impl Into<String>, params: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            node_id: node_id.into(),
            location: Location::default(),
            device_model: DeviceModel::default(),
            versions: Vec::new(),
            parameters: params.into_iter().map(Into::into).collect(),
            descriptions: IndexMap::new(),
        }
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.parameters.iter().map(String::as_str).collect()
    }

    pub fn describe(&self, parameter: &str) -> Option<&ParameterDescription> {
        self.descriptions.get(parameter)
    }

    pub fn version_at(&self, t: DateTime<Utc>, offset: FixedOffset) -> Result<Option<&VersionEntry>> {
        for v in &self.versions {
            if v.covers(t, offset)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    /// Parameter list nonempty and unique; version intervals well formed and
    /// pairwise disjoint.
    pub fn validate(&self, offset: FixedOffset) -> Result<()> {
        if self.parameters.is_empty() {
            return Err(ResourceError::BadRequest("descriptor lists no parameters".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.parameters {
            if !seen.insert(p.as_str()) {
                return Err(ResourceError::BadRequest(format!("parameter {p} listed twice")));
            }
        }
        let mut spans = Vec::with_capacity(self.versions.len());
        for v in &self.versions {
            let s = v.start(offset)?;
            let e = v.end(offset)?;
            if e.is_some_and(|e| e <= s) {
                return Err(ResourceError::BadRequest(format!("version {} ends before it starts", v.ver)));
            }
            spans.push((s, e, v.ver.as_str()));
        }
        spans.sort_by_key(|(s, _, _)| *s);
        for w in spans.windows(2) {
            let (_, prev_end, prev) = w[0];
            let (next_start, _, next) = w[1];
            if prev_end.is_none_or(|e| e > next_start) {
                return Err(ResourceError::BadRequest(format!("versions {prev} and {next} overlap")));
            }
        }
        Ok(())
    }

    pub fn from_content(con: &str) -> Result<Self> {
        serde_json::from_str(con).map_err(|e| ResourceError::MalformedContent(e.to_string()))
    }

    pub fn to_content(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }
}
