//! Assessed-observation store: an append-only record log, folded into an
//! in-memory index. Duplicate receptions append a count update only.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::assess::{AssessmentResult, StreamState};
use crate::enrich::EnrichedObservation;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessedObservation {
    #[serde(flatten)]
    pub obs: EnrichedObservation,
    #[serde(flatten)]
    pub result: AssessmentResult,
    /// Factor kinds that were missing when it was assessed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

impl AssessedObservation {
    /// Times it was received.
    pub fn receptions(&self) -> u32 {
        self.result.num_of_duplicates.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DuplicateUpdate {
    pub uri: String,
    pub node: String,
    pub foi: String,
    pub property: String,
    pub t_new: i64,
    pub num_of_duplicates: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum StoreRecord {
    Observation(AssessedObservation),
    Duplicate(DuplicateUpdate),
}

#[derive(Default)]
struct Inner {
    obs: Vec<AssessedObservation>,
    index: HashMap<String, usize>,
    /// Duplicates whose uri was never accepted: late arrivals older than the
    /// stream's last result time.
    orphans: BTreeMap<String, DuplicateUpdate>,
    file: Option<File>,
}

impl Inner {
    fn fold(&mut self, rec: StoreRecord) {
        match rec {
            StoreRecord::Observation(o) => {
                self.index.insert(o.obs.uri.clone(), self.obs.len());
                self.obs.push(o);
            }
            StoreRecord::Duplicate(d) => match self.index.get(&d.uri) {
                Some(&i) => self.obs[i].result.num_of_duplicates = d.num_of_duplicates,
                None => {
                    self.orphans.insert(d.uri.clone(), d);
                }
            },
        }
    }
}

#[derive(Default)]
pub struct AssessedStore {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
}

impl AssessedStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads the log at `path`, dropping a torn final line.
    pub fn open(path: &Path) -> Result<Self> {
        let mut inner = Inner::default();
        let mut good = 0u64;
        if path.exists() {
            let mut r = BufReader::new(File::open(path)?);
            let mut line = String::new();
            loop {
                line.clear();
                let n = r.read_line(&mut line)?;
                if n == 0 || !line.ends_with('\n') {
                    break;
                }
                match serde_json::from_str::<StoreRecord>(line.trim_end()) {
                    Ok(rec) => inner.fold(rec),
                    Err(e) => {
                        tracing::warn!("assessed store {}: dropping tail: {e}", path.display());
                        break;
                    }
                }
                good += n as u64;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        file.set_len(good)?;
        inner.file = Some(file);
        Ok(Self {
            inner: Mutex::new(inner),
            path: Some(path.to_owned()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, rec: StoreRecord) -> Result<()> {
        let mut g = self.inner.lock();
        if let Some(f) = g.file.as_mut() {
            let mut line = serde_json::to_vec(&rec).expect("json");
            line.push(b'\n');
            f.write_all(&line)?;
        }
        g.fold(rec);
        Ok(())
    }

    pub fn get(&self, uri: &str) -> Option<AssessedObservation> {
        let g = self.inner.lock();
        g.index.get(uri).map(|&i| g.obs[i].clone())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Accepted observations of `node` with result time in `[start, end)`,
    /// in arrival order.
    pub fn observations(&self, node: &str, start: i64, end: i64) -> Vec<AssessedObservation> {
        self.inner
            .lock()
            .obs
            .iter()
            .filter(|o| o.obs.node == node && o.obs.t_new >= start && o.obs.t_new < end)
            .cloned()
            .collect()
    }

    pub fn orphans(&self, node: &str, start: i64, end: i64) -> Vec<DuplicateUpdate> {
        self.inner
            .lock()
            .orphans
            .values()
            .filter(|d| d.node == node && d.t_new >= start && d.t_new < end)
            .cloned()
            .collect()
    }

    pub fn all(&self) -> Vec<AssessedObservation> {
        self.inner.lock().obs.clone()
    }

    pub fn nodes(&self) -> Vec<String> {
        let mut v: Vec<String> = self.inner.lock().obs.iter().map(|o| o.obs.node.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Receptions accounted for per (node, property): accepted observations
    /// count their receptions, orphans their count.
    pub fn receptions(&self) -> BTreeMap<(String, String), u64> {
        let g = self.inner.lock();
        let mut m = BTreeMap::new();
        for o in &g.obs {
            *m.entry((o.obs.node.clone(), o.obs.property.clone())).or_insert(0) += o.receptions() as u64;
        }
        for d in g.orphans.values() {
            *m.entry((d.node.clone(), d.property.clone())).or_insert(0) += d.num_of_duplicates as u64;
        }
        m
    }

    /// Stream states implied by the stored records, keyed (node, foi, property).
    pub fn streams(&self) -> HashMap<(String, String, String), StreamState> {
        let g = self.inner.lock();
        let mut m: HashMap<(String, String, String), StreamState> = HashMap::new();
        for o in &g.obs {
            let s = m.entry((o.obs.node.clone(), o.obs.foi.clone(), o.obs.property.clone())).or_default();
            if s.t_last.is_none_or(|t| o.obs.t_new > t) {
                s.t_last = Some(o.obs.t_new);
                s.last_uri = Some(o.obs.uri.clone());
            }
            s.receptions.insert(o.obs.uri.clone(), o.receptions());
        }
        for d in g.orphans.values() {
            m.entry((d.node.clone(), d.foi.clone(), d.property.clone()))
                .or_default()
                .receptions
                .insert(d.uri.clone(), d.num_of_duplicates);
        }
        m
    }

    /// Canonical bytes of the folded state, independent of how appends
    /// from different streams interleaved.
    pub fn export(&self) -> Vec<u8> {
        let g = self.inner.lock();
        let mut obs: Vec<&AssessedObservation> = g.obs.iter().collect();
        obs.sort_by(|a, b| (&a.obs.node, &a.obs.property, a.obs.t_new).cmp(&(&b.obs.node, &b.obs.property, b.obs.t_new)));
        let mut out = Vec::new();
        for o in obs {
            serde_json::to_writer(&mut out, o).expect("json");
            out.push(b'\n');
        }
        let mut orphans: Vec<&DuplicateUpdate> = g.orphans.values().collect();
        orphans.sort_by(|a, b| (&a.node, &a.property, a.t_new).cmp(&(&b.node, &b.property, b.t_new)));
        for d in orphans {
            serde_json::to_writer(&mut out, d).expect("json");
            out.push(b'\n');
        }
        out
    }
}

/// Count update for a duplicate reception; `receptions` includes it.
pub fn duplicate_update(obs: &EnrichedObservation, receptions: u32) -> StoreRecord {
    StoreRecord::Duplicate(DuplicateUpdate {
        uri: obs.uri.clone(),
        node: obs.node.clone(),
        foi: obs.foi.clone(),
        property: obs.property.clone(),
        t_new: obs.t_new,
        num_of_duplicates: receptions,
    })
}
