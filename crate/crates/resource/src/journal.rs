//! On-disk layout of a persisted tree.
//!
//! ```text
//! <dir>/snapshot.json   full state at some instant (written atomically)
//! <dir>/journal.jsonl   one JournalRecord per line, applied after the snapshot
//! ```
//!
//! Every mutation appends one record before the call returns. After
//! `snapshot_every` records the state is rewritten to `snapshot.json` and
//! the journal truncated. A torn last line is ignored on replay.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ContentInstance, Resource};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalRecord {
    Create {
        resource: Resource,
    },
    Update {
        resource: Resource,
    },
    Delete {
        ri: String,
    },
    InsertCin {
        container: String,
        cin: ContentInstance,
        evicted: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSnapshot {
    pub ri: String,
    pub st: u64,
    pub instances: Vec<ContentInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    /// Parents precede children; siblings in creation order.
    pub resources: Vec<Resource>,
    pub containers: Vec<ContainerSnapshot>,
}

pub(crate) struct Journal {
    dir: PathBuf,
    out: BufWriter<File>,
    pub(crate) since_snapshot: usize,
}

impl Journal {
    pub(crate) fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(JOURNAL_FILE))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            out: BufWriter::new(file),
            since_snapshot: 0,
        })
    }

    pub(crate) fn append(&mut self, rec: &JournalRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.since_snapshot += 1;
        Ok(())
    }

    pub(crate) fn write_snapshot(&mut self, snap: &Snapshot) -> Result<()> {
        let tmp = self.dir.join("snapshot.json.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut w, snap)?;
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(self.dir.join(JOURNAL_FILE))?;
        self.out = BufWriter::new(file);
        self.since_snapshot = 0;
        Ok(())
    }

    pub(crate) fn sync(&mut self) -> Result<()> {
        self.out.flush()?;
        self.out.get_ref().sync_all()?;
        Ok(())
    }
}

pub(crate) fn load(dir: &Path) -> Result<(Option<Snapshot>, Vec<JournalRecord>)> {
    let snap_path = dir.join(SNAPSHOT_FILE);
    let snapshot = if snap_path.exists() {
        Some(serde_json::from_reader(BufReader::new(File::open(&snap_path)?))?)
    } else {
        None
    };
    let mut records = Vec::new();
    let journal_path = dir.join(JOURNAL_FILE);
    if journal_path.exists() {
        let reader = BufReader::new(File::open(&journal_path)?);
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let last = lines.len().saturating_sub(1);
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(rec) => records.push(rec),
                Err(e) if i == last => {
                    tracing::warn!(error = %e, "ignoring torn journal tail");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((snapshot, records))
}
