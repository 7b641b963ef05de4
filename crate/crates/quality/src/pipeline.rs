//! Enrich, then duplicacy, then (non-duplicates only) delay and range,
//! then store. Each (node, foi, property) stream is processed strictly in
//! order; distinct streams may run concurrently.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use citylab_lake::JournalEntry;
use citylab_monitor::NotificationSink;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assess::{assess_delay, assess_duplicacy, is_out_of_range, AssessmentResult, Duplicacy, StreamState};
use crate::enrich::{enrich, EnrichedObservation, RawRecord};
use crate::error::{QualityError, Result};
use crate::factor::FactorTable;
use crate::intake::{parse_notification, Intake};
use crate::kb::{KnowledgeBase, KnowledgeBaseEntry};
use crate::store::{duplicate_update, AssessedObservation, AssessedStore, StoreRecord};

pub const ASSESSED_FILE: &str = "assessed.jsonl";
pub const DEAD_LETTER_FILE: &str = "quality-dead-letters.jsonl";

type StreamKey = (String, String, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Intake,
    Enrich,
    Store,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub stage: Stage,
    pub reason: String,
    pub record: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    /// Raw records offered.
    pub fed: u64,
    pub observations: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub dead_lettered: u64,
    /// Per "kind foi/property".
    pub missing_factors: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Stored { uri: String, result: AssessmentResult },
    Duplicate { uri: String, receptions: u32 },
}

pub struct Pipeline {
    kb: RwLock<KnowledgeBase>,
    factors: RwLock<FactorTable>,
    store: AssessedStore,
    streams: Mutex<HashMap<StreamKey, Arc<Mutex<StreamState>>>>,
    stats: Mutex<PipelineStats>,
    dead: Mutex<Vec<DeadLetter>>,
    dead_path: Option<PathBuf>,
}

impl Pipeline {
    pub fn in_memory(kb: KnowledgeBase, factors: FactorTable) -> Self {
        Self::with_store(kb, factors, AssessedStore::in_memory(), None)
    }

    /// Persists under `dir`; stream states resume from what is stored.
    pub fn open(dir: &Path, kb: KnowledgeBase, factors: FactorTable) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let store = AssessedStore::open(&dir.join(ASSESSED_FILE))?;
        Ok(Self::with_store(kb, factors, store, Some(dir.join(DEAD_LETTER_FILE))))
    }

    fn with_store(kb: KnowledgeBase, factors: FactorTable, store: AssessedStore, dead_path: Option<PathBuf>) -> Self {
        let streams = store
            .streams()
            .into_iter()
            .map(|(k, s)| (k, Arc::new(Mutex::new(s))))
            .collect();
        Self {
            kb: RwLock::new(kb),
            factors: RwLock::new(factors),
            store,
            streams: Mutex::new(streams),
            stats: Mutex::default(),
            dead: Mutex::default(),
            dead_path,
        }
    }

    pub fn store(&self) -> &AssessedStore {
        &self.store
    }

    pub fn kb(&self) -> KnowledgeBase {
        self.kb.read().clone()
    }

    pub fn set_factors(&self, f: FactorTable) {
        *self.factors.write() = f;
    }

    /// A descriptor update keeps the node's feature of interest, or uses
    /// the node id for a node never seen before.
    pub fn describe(&self, desc: &citylab_resource::DescriptorRecord) -> bool {
        let mut kb = self.kb.write();
        let foi = kb.get(&desc.node_id).map(|e| e.foi.clone()).unwrap_or_else(|| desc.node_id.clone());
        kb.upsert(KnowledgeBaseEntry::from_descriptor(desc, foi))
    }

    pub fn upsert_kb(&self, entry: KnowledgeBaseEntry) -> bool {
        self.kb.write().upsert(entry)
    }

    pub fn stats(&self) -> PipelineStats {
        self.stats.lock().clone()
    }

    pub fn dead_letters(&self) -> Vec<DeadLetter> {
        self.dead.lock().clone()
    }

    fn dead_letter(&self, stage: Stage, err: &QualityError, record: Value) {
        tracing::warn!("quality {stage:?}: {err}");
        let d = DeadLetter {
            stage,
            reason: err.to_string(),
            record,
        };
        if let Some(p) = &self.dead_path {
            let res = std::fs::OpenOptions::new().create(true).append(true).open(p).and_then(|mut f| {
                let mut line = serde_json::to_vec(&d).expect("json");
                line.push(b'\n');
                f.write_all(&line)
            });
            if let Err(e) = res {
                tracing::error!("writing quality dead letter: {e}");
            }
        }
        self.stats.lock().dead_lettered += 1;
        self.dead.lock().push(d);
    }

    fn stream(&self, o: &EnrichedObservation) -> Arc<Mutex<StreamState>> {
        self.streams
            .lock()
            .entry((o.node.clone(), o.foi.clone(), o.property.clone()))
            .or_default()
            .clone()
    }

    pub fn process(&self, raw: &RawRecord) -> Result<Vec<Outcome>> {
        self.stats.lock().fed += 1;
        let obs = match enrich(raw, &self.kb.read()) {
            Ok(o) => o,
            Err(e) => {
                self.dead_letter(Stage::Enrich, &e, serde_json::to_value(raw).expect("json"));
                return Err(e);
            }
        };
        self.stats.lock().observations += obs.len() as u64;
        let mut out = Vec::with_capacity(obs.len());
        for o in obs {
            match self.assess(o) {
                Ok(r) => out.push(r),
                Err((e, o)) => {
                    self.dead_letter(Stage::Store, &e, serde_json::to_value(&o).expect("json"));
                    return Err(e);
                }
            }
        }
        Ok(out)
    }

    fn assess(&self, o: EnrichedObservation) -> std::result::Result<Outcome, (QualityError, EnrichedObservation)> {
        let stream = self.stream(&o);
        let mut st = stream.lock();
        // undo needs only what duplicacy assessment may touch
        let before = (st.t_last, st.last_uri.clone(), st.receptions.get(&o.uri).copied());
        let (rec, outcome) = match assess_duplicacy(&o, &mut st) {
            Duplicacy::Duplicate { count } => (
                duplicate_update(&o, count),
                Outcome::Duplicate {
                    uri: o.uri.clone(),
                    receptions: count,
                },
            ),
            Duplicacy::NonDuplicate { prev } => {
                let factors = self.factors.read();
                let mut missing = Vec::new();
                let (transmission_delay, time_delay) = match factors.delay_for(&o.foi, &o.property, o.t_new) {
                    Some(t) => {
                        let (a, b) = assess_delay(&o, prev, t);
                        (Some(a), Some(b))
                    }
                    None => {
                        missing.push("ExpectedDelay".to_owned());
                        (None, None)
                    }
                };
                let out_of_range = match factors.range_for(&o.foi, &o.property, o.t_new) {
                    Some((min, max)) => is_out_of_range(o.value, min, max),
                    None => {
                        missing.push("RangeValue".to_owned());
                        false
                    }
                };
                if !missing.is_empty() {
                    let mut s = self.stats.lock();
                    for m in &missing {
                        tracing::debug!("missing {m} factor for {}/{}", o.foi, o.property);
                        *s.missing_factors.entry(format!("{m} {}/{}", o.foi, o.property)).or_insert(0) += 1;
                    }
                }
                let result = AssessmentResult {
                    num_of_duplicates: 0,
                    transmission_delay,
                    time_delay,
                    is_out_of_range: Some(out_of_range),
                };
                (
                    StoreRecord::Observation(AssessedObservation {
                        obs: o.clone(),
                        result: result.clone(),
                        missing,
                    }),
                    Outcome::Stored {
                        uri: o.uri.clone(),
                        result,
                    },
                )
            }
        };
        if let Err(e) = self.store.append(rec) {
            st.t_last = before.0;
            st.last_uri = before.1;
            match before.2 {
                Some(c) => st.receptions.insert(o.uri.clone(), c),
                None => st.receptions.remove(&o.uri),
            };
            return Err((e, o));
        }
        let mut s = self.stats.lock();
        match outcome {
            Outcome::Stored { .. } => s.accepted += 1,
            Outcome::Duplicate { .. } => s.duplicates += 1,
        }
        Ok(outcome)
    }

    /// Data notifications are assessed; descriptor notifications refresh
    /// the knowledge base.
    pub fn ingest_notification(&self, body: &Value) -> Result<Vec<Outcome>> {
        let parsed = parse_notification(body, &self.kb.read());
        match parsed {
            Ok(Intake::Data(raw)) => self.process(&raw),
            Ok(Intake::Descriptor(d)) => {
                self.describe(&d);
                Ok(Vec::new())
            }
            Ok(Intake::Ignored) => Ok(Vec::new()),
            Err(e) => {
                self.stats.lock().fed += 1;
                self.dead_letter(Stage::Intake, &e, body.clone());
                Err(e)
            }
        }
    }

    /// Replays a lake intake journal through the pipeline. Returns the
    /// number of notifications that failed.
    pub fn ingest_journal(&self, path: &Path) -> Result<JournalRun> {
        let mut run = JournalRun::default();
        for line in BufReader::new(std::fs::File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) else {
                run.unreadable += 1;
                continue;
            };
            match entry {
                JournalEntry::Node { descriptor, .. } => {
                    self.describe(&descriptor);
                    run.nodes += 1;
                }
                JournalEntry::Notification { notification, .. } => {
                    run.notifications += 1;
                    if self.ingest_notification(&notification).is_err() {
                        run.failed += 1;
                    }
                }
            }
        }
        Ok(run)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalRun {
    pub nodes: usize,
    pub notifications: usize,
    pub failed: usize,
    pub unreadable: usize,
}

#[async_trait]
impl NotificationSink for Pipeline {
    /// Failed records are dead-lettered here, so the sender never retries.
    async fn deliver(&self, body: &Value) -> std::result::Result<u16, String> {
        let _ = self.ingest_notification(body);
        Ok(200)
    }
}
