//! Galaxy-schema rows: two fact tables (data, parameters) sharing node,
//! version, vertical and sensor dimensions.

use citylab_resource::PayloadValue;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub type TenantId = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub node: String,
    pub vertical: String,
    /// Observation time, epoch seconds.
    pub ts: i64,
    pub version: String,
    pub values: IndexMap<String, PayloadValue>,
    /// Parameter-fact ids of `values`, same order.
    pub params: Vec<u64>,
}

impl DataRow {
    pub fn project(&self, attrs: &[String]) -> DataRow {
        let values = self
            .values
            .iter()
            .filter(|(k, _)| attrs.iter().any(|a| a == *k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let params = self
            .values
            .keys()
            .zip(&self.params)
            .filter(|(k, _)| attrs.iter().any(|a| a == *k))
            .map(|(_, id)| *id)
            .collect();
        DataRow {
            values,
            params,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub id: u64,
    pub vertical: String,
    pub version: String,
    pub parameter: String,
    pub sensor: String,
    pub datatype: String,
    pub unit: String,
    pub accuracy: String,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDim {
    pub node: String,
    pub vertical: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// Version interval `[start, end)`; `end = None` is the open sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionDim {
    pub node: String,
    pub ver: String,
    pub start: i64,
    pub end: Option<i64>,
    /// Parameter to sensor model.
    #[serde(default)]
    pub sensors: std::collections::BTreeMap<String, String>,
    #[serde(default)]
    pub comments: String,
}

impl VersionDim {
    pub fn covers(&self, ts: i64) -> bool {
        ts >= self.start && self.end.is_none_or(|e| ts < e)
    }
}
