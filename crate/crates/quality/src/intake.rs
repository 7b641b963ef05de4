//! Turning monitor notifications and lake journal lines into raw records.

use citylab_lake::node_of;
use citylab_resource::clock::parse_m2m_timestamp;
use citylab_resource::{parse_positional, DescriptorRecord};
use serde_json::Value;

use crate::enrich::RawRecord;
use crate::error::{QualityError, Result};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, PartialEq)]
pub enum Intake {
    Data(RawRecord),
    /// A node (re)described itself.
    Descriptor(DescriptorRecord),
    /// Subscription verification or anything without a content instance.
    Ignored,
}

fn malformed(msg: impl Into<String>) -> QualityError {
    QualityError::Malformed(msg.into())
}

/// Reads `{"m2m:sgn": {"nev": {"rep": {"m2m:cin": ..}}, "sur": ..}}`. The
/// payload order comes from the node's knowledge-base entry and the
/// recorded time from the instance's creation time.
pub fn parse_notification(body: &Value, kb: &KnowledgeBase) -> Result<Intake> {
    let sgn = body.get("m2m:sgn").ok_or_else(|| malformed("no m2m:sgn"))?;
    if sgn.get("vrq").and_then(Value::as_bool) == Some(true) {
        return Ok(Intake::Ignored);
    }
    let Some(cin) = sgn.pointer("/nev/rep/m2m:cin") else {
        return Ok(Intake::Ignored);
    };
    let sur = sgn.get("sur").and_then(Value::as_str).unwrap_or("");
    let con = cin.get("con").and_then(Value::as_str).ok_or_else(|| malformed("cin without con"))?;
    if sur.split('/').any(|s| s == "Descriptor") {
        return DescriptorRecord::from_content(con)
            .map(Intake::Descriptor)
            .map_err(|e| malformed(e.to_string()));
    }
    let labels: Vec<String> = cin
        .get("lbl")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_owned).collect())
        .unwrap_or_default();
    let node = node_of(sur, &labels).ok_or_else(|| malformed(format!("no node in {sur:?} / {labels:?}")))?;
    let entry = kb.get(&node).ok_or_else(|| QualityError::UnknownNode(node.clone()))?;
    let values = parse_positional(con).map_err(|e| malformed(e.to_string()))?;
    if values.len() != entry.parameters.len() {
        return Err(malformed(format!(
            "{node}: {} values for {} parameters",
            values.len(),
            entry.parameters.len()
        )));
    }
    let ct = cin.get("ct").and_then(Value::as_str).unwrap_or("");
    let t_rec = parse_m2m_timestamp(ct).ok_or_else(|| malformed(format!("ct {ct:?}")))?.timestamp();
    Ok(Intake::Data(RawRecord::new(
        node,
        t_rec,
        entry.parameters.iter().cloned().zip(values).collect(),
    )))
}
