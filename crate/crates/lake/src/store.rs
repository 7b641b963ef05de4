//! One tenant's logical database: an append-only write-ahead log in its
//! own directory, replayed into memory on open. Readers take snapshots
//! under a read lock that writers hold only for the in-memory apply.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use citylab_resource::DescriptorRecord;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{LakeError, Result};
use crate::model::{DataRow, NodeDim, ParameterRow, VersionDim};

pub const WAL_FILE: &str = "wal.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Durability {
    /// Flush to the OS after every record.
    #[default]
    Flush,
    /// fsync after every record.
    Sync,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t")]
enum WalRecord {
    Node(NodeDim),
    Version(VersionDim),
    Param(ParameterRow),
    Data { seq: u64, row: DataRow },
    Descriptor { seq: u64, vertical: String, desc: DescriptorRecord },
    /// An intake entry that produced no row (duplicate key, bad record).
    Skip { seq: u64 },
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenantState {
    pub nodes: BTreeMap<String, NodeDim>,
    pub versions: BTreeMap<String, Vec<VersionDim>>,
    /// Keyed by (vertical, version, parameter).
    pub params: BTreeMap<(String, String, String), ParameterRow>,
    /// Keyed by (node, ts): the compound primary key.
    pub data: BTreeMap<(String, i64), DataRow>,
    pub descriptors: BTreeMap<String, DescriptorRecord>,
    /// Highest intake sequence number applied.
    pub high_water: u64,
}

impl TenantState {
    fn apply(&mut self, rec: WalRecord) {
        match rec {
            WalRecord::Node(n) => {
                self.nodes.insert(n.node.clone(), n);
            }
            WalRecord::Version(v) => {
                let list = self.versions.entry(v.node.clone()).or_default();
                match list.iter_mut().find(|x| x.ver == v.ver) {
                    Some(x) => *x = v,
                    None => list.push(v),
                }
                list.sort_by_key(|x| x.start);
            }
            WalRecord::Param(p) => {
                self.params
                    .insert((p.vertical.clone(), p.version.clone(), p.parameter.clone()), p);
            }
            WalRecord::Data { seq, row } => {
                self.high_water = self.high_water.max(seq);
                self.data.insert((row.node.clone(), row.ts), row);
            }
            WalRecord::Descriptor { seq, desc, .. } => {
                self.high_water = self.high_water.max(seq);
                self.descriptors.insert(desc.node_id.clone(), desc);
            }
            WalRecord::Skip { seq } => {
                self.high_water = self.high_water.max(seq);
            }
        }
    }

    fn next_param_id(&self) -> u64 {
        self.params.values().map(|p| p.id).max().map_or(1, |m| m + 1)
    }
}

pub struct TenantStore {
    name: String,
    dir: PathBuf,
    durability: Durability,
    wal: Mutex<BufWriter<File>>,
    state: RwLock<TenantState>,
}

impl TenantStore {
    pub fn open(name: &str, dir: &Path, durability: Durability) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(WAL_FILE);
        let mut state = TenantState::default();
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let mut good = 0usize;
            let mut at = 0usize;
            for (i, line) in text.split_inclusive('\n').enumerate() {
                at += line.len();
                let complete = line.ends_with('\n');
                match serde_json::from_str::<WalRecord>(line.trim_end()) {
                    Ok(r) if complete => {
                        state.apply(r);
                        good = at;
                    }
                    // a torn tail from a crash mid-write
                    _ if at == text.len() => {
                        tracing::warn!(tenant = name, "dropping torn wal tail");
                    }
                    Ok(_) => unreachable!("only the last line can lack a newline"),
                    Err(e) => return Err(LakeError::Corrupt(format!("{}: line {}: {e}", path.display(), i + 1))),
                }
            }
            if good < text.len() {
                OpenOptions::new().write(true).open(&path)?.set_len(good as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            name: name.to_owned(),
            dir: dir.to_owned(),
            durability,
            wal: Mutex::new(BufWriter::new(file)),
            state: RwLock::new(state),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append(&self, rec: &WalRecord) -> Result<()> {
        let mut w = self.wal.lock();
        serde_json::to_writer(&mut *w, rec).map_err(|e| LakeError::Storage(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        if self.durability == Durability::Sync {
            w.get_ref().sync_data()?;
        }
        Ok(())
    }

    fn commit(&self, rec: WalRecord) -> Result<()> {
        self.append(&rec)?;
        self.state.write().apply(rec);
        Ok(())
    }

    /// Upserts the node, version and parameter dimensions from a
    /// descriptor. Records already present unchanged are not rewritten.
    pub fn register_node(&self, seq: u64, vertical: &str, desc: &DescriptorRecord) -> Result<()> {
        if self.state.read().descriptors.get(&desc.node_id) != Some(desc) {
            self.commit(WalRecord::Descriptor {
                seq,
                vertical: vertical.to_owned(),
                desc: desc.clone(),
            })?;
        } else {
            self.skip(seq)?;
        }
        let offset = citylab_resource::clock::deployment_offset();
        let node = NodeDim {
            node: desc.node_id.clone(),
            vertical: vertical.to_owned(),
            latitude: desc.location.latitude,
            longitude: desc.location.longitude,
        };
        if self.state.read().nodes.get(&node.node) != Some(&node) {
            self.commit(WalRecord::Node(node))?;
        }
        for v in &desc.versions {
            let dim = VersionDim {
                node: desc.node_id.clone(),
                ver: v.ver.clone(),
                start: v.start(offset).map_err(|e| LakeError::BadRecord(e.to_string()))?.timestamp(),
                end: v.end(offset).map_err(|e| LakeError::BadRecord(e.to_string()))?.map(|t| t.timestamp()),
                sensors: v.sensors.clone(),
                comments: v.comments.clone(),
            };
            let known = self
                .state
                .read()
                .versions
                .get(&dim.node)
                .is_some_and(|l| l.contains(&dim));
            if !known {
                self.commit(WalRecord::Version(dim))?;
            }
            for p in &desc.parameters {
                self.ensure_param(vertical, &v.ver, p, desc, v.sensors.get(p).cloned())?;
            }
        }
        Ok(())
    }

    fn ensure_param(&self, vertical: &str, version: &str, parameter: &str, desc: &DescriptorRecord, sensor: Option<String>) -> Result<u64> {
        let key = (vertical.to_owned(), version.to_owned(), parameter.to_owned());
        if let Some(p) = self.state.read().params.get(&key) {
            return Ok(p.id);
        }
        let d = desc.describe(parameter).cloned().unwrap_or_default();
        let sensor = sensor.or_else(|| {
            desc.device_model
                .sensors
                .iter()
                .find_map(|s| s.strip_prefix(&format!("{parameter} = ")).map(str::to_owned))
        });
        // id assignment and insert happen under the write lock so two
        // writers never mint the same id
        let mut wal_guard = self.wal.lock();
        let mut st = self.state.write();
        if let Some(p) = st.params.get(&key) {
            return Ok(p.id);
        }
        let row = ParameterRow {
            id: st.next_param_id(),
            vertical: key.0.clone(),
            version: key.1.clone(),
            parameter: key.2.clone(),
            sensor: sensor.unwrap_or_default(),
            datatype: d.datatype,
            unit: d.unit,
            accuracy: d.accuracy,
            resolution: d.resolution,
        };
        let id = row.id;
        let rec = WalRecord::Param(row);
        serde_json::to_writer(&mut *wal_guard, &rec).map_err(|e| LakeError::Storage(e.to_string()))?;
        wal_guard.write_all(b"\n")?;
        wal_guard.flush()?;
        st.apply(rec);
        Ok(id)
    }

    /// Version covering `ts` for `node`.
    pub fn version_at(&self, node: &str, ts: i64) -> Option<String> {
        self.state
            .read()
            .versions
            .get(node)?
            .iter()
            .find(|v| v.covers(ts))
            .map(|v| v.ver.clone())
    }

    pub fn param_id(&self, vertical: &str, version: &str, parameter: &str) -> Option<u64> {
        self.state
            .read()
            .params
            .get(&(vertical.to_owned(), version.to_owned(), parameter.to_owned()))
            .map(|p| p.id)
    }

    /// Writes one data fact. An existing (node, ts) is a duplicate key and
    /// leaves the store untouched.
    pub fn insert(&self, seq: u64, row: DataRow) -> Result<()> {
        let key = (row.node.clone(), row.ts);
        if self.state.read().data.contains_key(&key) {
            return Err(LakeError::DuplicateKey { node: row.node, ts: row.ts });
        }
        self.commit(WalRecord::Data { seq, row })
    }

    /// Marks an intake entry as handled without a row.
    pub fn skip(&self, seq: u64) -> Result<()> {
        self.commit(WalRecord::Skip { seq })
    }

    pub fn descriptor(&self, node: &str) -> Option<DescriptorRecord> {
        self.state.read().descriptors.get(node).cloned()
    }

    pub fn high_water(&self) -> u64 {
        self.state.read().high_water
    }

    pub fn has_node(&self, node: &str) -> bool {
        let st = self.state.read();
        st.nodes.contains_key(node) || st.data.keys().any(|(n, _)| n == node)
    }

    pub fn nodes(&self) -> Vec<NodeDim> {
        self.state.read().nodes.values().cloned().collect()
    }

    pub fn versions(&self, node: &str) -> Vec<VersionDim> {
        self.state.read().versions.get(node).cloned().unwrap_or_default()
    }

    pub fn parameters(&self) -> Vec<ParameterRow> {
        self.state.read().params.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.state.read().data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows with `start <= ts < end`, ascending.
    pub fn range(&self, node: &str, start: i64, end: i64) -> Vec<DataRow> {
        if start >= end {
            return Vec::new();
        }
        let st = self.state.read();
        st.data
            .range((node.to_owned(), start)..(node.to_owned(), end))
            .map(|(_, r)| r.clone())
            .collect()
    }

    pub fn all_rows(&self) -> Vec<DataRow> {
        self.state.read().data.values().cloned().collect()
    }

    /// Canonical serialization of the whole store, for equality checks.
    pub fn export(&self) -> Vec<u8> {
        let st = self.state.read();
        let mut out = Vec::new();
        for n in st.nodes.values() {
            serde_json::to_writer(&mut out, n).expect("json");
            out.push(b'\n');
        }
        for vs in st.versions.values() {
            for v in vs {
                serde_json::to_writer(&mut out, v).expect("json");
                out.push(b'\n');
            }
        }
        for p in st.params.values() {
            serde_json::to_writer(&mut out, p).expect("json");
            out.push(b'\n');
        }
        for r in st.data.values() {
            serde_json::to_writer(&mut out, r).expect("json");
            out.push(b'\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use citylab_resource::PayloadValue;
    use indexmap::IndexMap;

    fn row(node: &str, ts: i64, v: f64) -> DataRow {
        DataRow {
            node: node.into(),
            vertical: "AQ".into(),
            ts,
            version: "V1".into(),
            values: IndexMap::from([("PM2.5".to_owned(), PayloadValue::Number(v))]),
            params: vec![1],
        }
    }

    #[test]
    fn duplicate_key_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = TenantStore::open("AQ", dir.path(), Durability::Flush).unwrap();
        s.insert(1, row("n", 10, 1.0)).unwrap();
        s.insert(2, row("n", 20, 2.0)).unwrap();
        assert!(matches!(s.insert(3, row("n", 10, 9.0)), Err(LakeError::DuplicateKey { ts: 10, .. })));
        assert_eq!(s.range("n", 10, 20).len(), 1);
        assert!(s.range("n", 20, 20).is_empty());
        let before = s.export();
        drop(s);
        let s = TenantStore::open("AQ", dir.path(), Durability::Flush).unwrap();
        assert_eq!(s.export(), before);
        assert_eq!(s.high_water(), 2);
    }

    #[test]
    fn torn_tail_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let s = TenantStore::open("AQ", dir.path(), Durability::Sync).unwrap();
        s.insert(1, row("n", 10, 1.0)).unwrap();
        drop(s);
        let mut f = OpenOptions::new().append(true).open(dir.path().join(WAL_FILE)).unwrap();
        f.write_all(b"{\"t\":\"Data\",\"seq\":2,\"ro").unwrap();
        let s = TenantStore::open("AQ", dir.path(), Durability::Flush).unwrap();
        assert_eq!(s.len(), 1);
        // later appends land on a clean line boundary
        s.insert(3, row("n", 30, 3.0)).unwrap();
        drop(s);
        let s = TenantStore::open("AQ", dir.path(), Durability::Flush).unwrap();
        assert_eq!(s.len(), 2);
    }
}
