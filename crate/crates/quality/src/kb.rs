//! Knowledge base: static sensor descriptions per node, replaced only when
//! the device version changes.

use std::collections::BTreeMap;
use std::path::Path;

use citylab_resource::DescriptorRecord;
use serde::{Deserialize, Serialize};

use crate::error::Result;

const TIMESTAMP: &str = "Timestamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedProperty {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    #[serde(default = "float")]
    pub datatype: String,
    /// The sensor that makes this observation.
    #[serde(default)]
    pub sensor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_range: Option<(f64, f64)>,
    /// accuracy, frequency, sensitivity, precision.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capabilities: BTreeMap<String, String>,
}

fn float() -> String {
    "float".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBaseEntry {
    pub node: String,
    pub foi: String,
    #[serde(default)]
    pub version: String,
    /// Positional payload order, `Timestamp` included.
    pub parameters: Vec<String>,
    pub properties: Vec<ObservedProperty>,
}

impl KnowledgeBaseEntry {
    /// Builds the entry from a node descriptor. Sensor models come from the
    /// latest version entry, then from `Name = Model` items of the device
    /// model, then from the device itself.
    pub fn from_descriptor(desc: &DescriptorRecord, foi: impl Into<String>) -> Self {
        let latest = desc.versions.last();
        let listed: BTreeMap<&str, &str> = desc
            .device_model
            .sensors
            .iter()
            .filter_map(|s| s.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let properties = desc
            .parameters
            .iter()
            .filter(|p| p.as_str() != TIMESTAMP)
            .map(|p| {
                let d = desc.describe(p);
                let sensor = latest
                    .and_then(|v| v.sensors.get(p))
                    .map(String::as_str)
                    .or_else(|| listed.get(p.as_str()).copied())
                    .unwrap_or(&desc.device_model.device)
                    .to_owned();
                let mut capabilities = BTreeMap::new();
                if let Some(d) = d {
                    if !d.accuracy.is_empty() {
                        capabilities.insert("accuracy".into(), d.accuracy.clone());
                    }
                    if !d.resolution.is_empty() {
                        capabilities.insert("precision".into(), d.resolution.clone());
                    }
                }
                ObservedProperty {
                    name: p.clone(),
                    unit: d.map(|d| d.unit.clone()).unwrap_or_default(),
                    datatype: d.map(|d| d.datatype.clone()).filter(|s| !s.is_empty()).unwrap_or_else(float),
                    sensor,
                    operating_range: None,
                    capabilities,
                }
            })
            .collect();
        Self {
            node: desc.node_id.clone(),
            foi: foi.into(),
            version: latest.map(|v| v.ver.clone()).unwrap_or_default(),
            parameters: desc.parameters.clone(),
            properties,
        }
    }

    pub fn property(&self, name: &str) -> Option<&ObservedProperty> {
        self.properties.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeBase {
    entries: BTreeMap<String, KnowledgeBaseEntry>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when an entry for the same node and version is
    /// already present; that case leaves the stored entry untouched.
    pub fn upsert(&mut self, entry: KnowledgeBaseEntry) -> bool {
        match self.entries.get(&entry.node) {
            Some(e) if e.version == entry.version && !entry.version.is_empty() => false,
            _ => {
                self.entries.insert(entry.node.clone(), entry);
                true
            }
        }
    }

    pub fn get(&self, node: &str) -> Option<&KnowledgeBaseEntry> {
        self.entries.get(node)
    }

    pub fn entries(&self) -> impl Iterator<Item = &KnowledgeBaseEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes).map_err(|e| crate::QualityError::Malformed(format!("{}: {e}", path.display())))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self).expect("json"))?;
        Ok(())
    }
}
