#![allow(dead_code)]

use citylab_ingest::sim::{SimProfile, SimRecord, TIMESTAMP};
use citylab_quality::{FactorTable, KnowledgeBase, KnowledgeBaseEntry, QualityFactor, RawRecord};
use citylab_resource::payload::NamedValues;
use citylab_resource::PayloadValue;

pub const FOI: &str = "test site";

pub fn kb_for(profiles: &[&SimProfile]) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for p in profiles {
        kb.upsert(KnowledgeBaseEntry::from_descriptor(&p.descriptor(), FOI));
    }
    kb
}

pub fn factors_for(profiles: &[&SimProfile]) -> FactorTable {
    let mut f = Vec::new();
    for p in profiles {
        for s in &p.params {
            f.push(QualityFactor::range(FOI, &s.name, s.min, s.max));
            f.push(QualityFactor::delay(FOI, &s.name, p.period_secs));
        }
    }
    // the same property on two profiles sharing a site carries one factor
    f.dedup_by(|a, b| a.property == b.property && a.kind == b.kind);
    let mut seen = std::collections::BTreeSet::new();
    f.retain(|q| seen.insert((q.property.clone(), format!("{:?}", std::mem::discriminant(&q.kind)))));
    FactorTable::new(f).unwrap()
}

pub fn raw(p: &SimProfile, r: &SimRecord) -> RawRecord {
    let mut v = NamedValues::new();
    v.insert(TIMESTAMP.into(), PayloadValue::Number(r.observed_at as f64));
    for (spec, x) in p.params.iter().zip(&r.values) {
        v.insert(spec.name.clone(), x.map_or(PayloadValue::Null, PayloadValue::Number));
    }
    RawRecord::new(&r.node, r.recorded_at, v)
}
