//! Enrichment: bind each value of a raw record to its property, unit,
//! feature of interest and sensor, and mint the observation's uri.

use citylab_resource::payload::NamedValues;
use citylab_resource::PayloadValue;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QualityError, Result};
use crate::kb::KnowledgeBase;

pub const TIMESTAMP: &str = "Timestamp";
pub const URI_PREFIX: &str = "urn:citylab:obs:";

/// One data instance as the platform received it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub node: String,
    /// When the platform recorded it, epoch seconds.
    pub t_rec: i64,
    /// Named values, `Timestamp` included.
    pub values: NamedValues,
}

impl RawRecord {
    pub fn new(node: impl Into<String>, t_rec: i64, values: NamedValues) -> Self {
        Self {
            node: node.into(),
            t_rec,
            values,
        }
    }

    pub fn timestamp(&self) -> Option<i64> {
        let t = self.values.get(TIMESTAMP)?.as_f64()?;
        (t.is_finite() && t.fract() == 0.0).then_some(t as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedObservation {
    pub uri: String,
    pub node: String,
    pub foi: String,
    pub property: String,
    /// `None` for a missing reading or a non-numeric one.
    pub value: Option<f64>,
    pub unit: String,
    pub datatype: String,
    pub sensor: String,
    /// Result time, from the payload.
    pub t_new: i64,
    /// Recorded time, from the platform.
    pub t_rec: i64,
}

/// Same (node, property, result time) gives the same uri, so every
/// retransmission of an observation lands on one identifier.
pub fn mint_uri(node: &str, property: &str, t_new: i64) -> String {
    let mut h = Sha256::new();
    h.update(node.as_bytes());
    h.update([0]);
    h.update(property.as_bytes());
    h.update([0]);
    h.update(t_new.to_be_bytes());
    let d = h.finalize();
    let mut s = String::with_capacity(URI_PREFIX.len() + 32);
    s.push_str(URI_PREFIX);
    for b in &d[..16] {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// One observation per knowledge-base property, in knowledge-base order.
/// Properties absent from the record come out as missing readings.
pub fn enrich(raw: &RawRecord, kb: &KnowledgeBase) -> Result<Vec<EnrichedObservation>> {
    let entry = kb.get(&raw.node).ok_or_else(|| QualityError::UnknownNode(raw.node.clone()))?;
    let t_new = raw.timestamp().ok_or_else(|| QualityError::MissingTimestamp(raw.node.clone()))?;
    Ok(entry
        .properties
        .iter()
        .map(|p| EnrichedObservation {
            uri: mint_uri(&raw.node, &p.name, t_new),
            node: raw.node.clone(),
            foi: entry.foi.clone(),
            property: p.name.clone(),
            value: raw.values.get(&p.name).and_then(PayloadValue::as_f64),
            unit: p.unit.clone(),
            datatype: p.datatype.clone(),
            sensor: p.sensor.clone(),
            t_new,
            t_rec: raw.t_rec,
        })
        .collect())
}
