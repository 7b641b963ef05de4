//! Notification intake. A notification is routed to its vertical's tenant,
//! appended to the intake journal, queued to that tenant's writer thread
//! and acknowledged. Parsing against the descriptor and the store write
//! happen on the writer, so a slow or offline store never delays the ack.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use citylab_resource::{parse_positional_payload, ContentInstance, DescriptorRecord, PayloadValue};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LakeError, Result};
use crate::model::DataRow;
use crate::store::{Durability, TenantStore};

pub const INTAKE_JOURNAL: &str = "intake.jsonl";
pub const DEAD_LETTERS: &str = "dead-letters.jsonl";
/// Tenant name used when every vertical shares one store.
pub const SHARED_TENANT: &str = "ALL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Tenancy {
    /// One logical database per vertical.
    #[default]
    PerVertical,
    /// Everything in one store. Kept as a baseline for comparisons.
    Single,
}

#[derive(Debug, Clone)]
pub struct LakeConfig {
    pub dir: PathBuf,
    pub tenancy: Tenancy,
    pub durability: Durability,
    /// Accepted originators or source IPs. Empty accepts everyone.
    pub allow: Vec<String>,
}

impl LakeConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            tenancy: Tenancy::PerVertical,
            durability: Durability::Flush,
            allow: Vec::new(),
        }
    }
}

/// Where a notification came from.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub origin: Option<String>,
    pub ip: Option<IpAddr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JournalEntry {
    Node {
        seq: u64,
        received_at: i64,
        tenant: String,
        vertical: String,
        descriptor: DescriptorRecord,
    },
    Notification {
        seq: u64,
        received_at: i64,
        tenant: String,
        notification: Value,
    },
}

impl JournalEntry {
    pub fn seq(&self) -> u64 {
        match self {
            JournalEntry::Node { seq, .. } | JournalEntry::Notification { seq, .. } => *seq,
        }
    }

    pub fn tenant(&self) -> &str {
        match self {
            JournalEntry::Node { tenant, .. } | JournalEntry::Notification { tenant, .. } => tenant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetterEntry {
    pub reason: String,
    pub labels: Vec<String>,
    pub notification: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ack {
    Queued { seq: u64, tenant: String },
    /// Subscription verification request; nothing to store.
    Verification,
    /// Accepted but unroutable; parked in the dead-letter file.
    DeadLettered,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LakeStats {
    pub received: u64,
    pub stored: u64,
    pub duplicates: u64,
    pub dead_lettered: u64,
    pub pending: u64,
}

/// Looks up a node's descriptor the first time a notification for it
/// arrives. `sur` is the subscription path, for resolvers that read the
/// sibling Descriptor container.
pub trait DescriptorResolver: Send + Sync {
    fn resolve(&self, node: &str, sur: &str) -> Option<(String, DescriptorRecord)>;
}

/// First segment after the `AE-` prefix of the first AE label:
/// `AE-WM-WF` routes to `WM`.
pub fn route_vertical(labels: &[String]) -> Result<String> {
    labels
        .iter()
        .find_map(|l| l.strip_prefix("AE-"))
        .and_then(|rest| rest.split('-').next())
        .filter(|v| !v.is_empty())
        .map(str::to_owned)
        .ok_or_else(|| LakeError::UnknownVertical(labels.to_vec()))
}

fn is_version(label: &str) -> bool {
    let mut c = label.chars();
    c.next() == Some('V') && c.next().is_some_and(|d| d.is_ascii_digit())
}

/// Label of the form `V<digit>...`.
pub fn version_label(labels: &[String]) -> Option<&str> {
    labels.iter().map(String::as_str).find(|l| is_version(l))
}

/// The node is the resource just above `Data` in the subscription path;
/// failing that, the label that is neither an AE, a version nor a
/// family-version tag.
pub fn node_of(sur: &str, labels: &[String]) -> Option<String> {
    let segs: Vec<&str> = sur.split('/').filter(|s| !s.is_empty()).collect();
    if let Some(i) = segs.iter().position(|s| *s == "Data") {
        if i > 0 && !segs[i - 1].starts_with("AE-") {
            return Some(segs[i - 1].to_owned());
        }
    }
    labels
        .iter()
        .find(|l| {
            !l.starts_with("AE-") && !is_version(l) && !l.split('-').any(is_version) && l.contains('-')
        })
        .cloned()
}

struct Parsed {
    cin: ContentInstance,
    sur: String,
}

fn parse_notification(v: &Value) -> Result<Option<Parsed>> {
    let sgn = v
        .get("m2m:sgn")
        .ok_or_else(|| LakeError::Malformed("missing m2m:sgn".into()))?;
    if sgn.get("vrq").and_then(Value::as_bool) == Some(true) {
        return Ok(None);
    }
    let cin = sgn
        .pointer("/nev/rep/m2m:cin")
        .ok_or_else(|| LakeError::Malformed("missing nev.rep.m2m:cin".into()))?;
    let cin: ContentInstance =
        serde_json::from_value(cin.clone()).map_err(|e| LakeError::Malformed(e.to_string()))?;
    let sur = sgn.get("sur").and_then(Value::as_str).unwrap_or_default().to_owned();
    Ok(Some(Parsed { cin, sur }))
}

struct Shared {
    dir: PathBuf,
    stall_ms: AtomicU64,
    offline: AtomicBool,
    shutdown: AtomicBool,
    received: AtomicU64,
    stored: AtomicU64,
    duplicates: AtomicU64,
    dead: AtomicU64,
    pending: Mutex<u64>,
    idle: Condvar,
    dead_file: Mutex<()>,
}

impl Shared {
    fn dead_letter(&self, reason: &str, labels: Vec<String>, notification: Value) {
        self.dead.fetch_add(1, Ordering::Relaxed);
        let entry = DeadLetterEntry {
            reason: reason.to_owned(),
            labels,
            notification,
        };
        let _g = self.dead_file.lock();
        let res = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(DEAD_LETTERS))
            .and_then(|mut f| {
                let mut line = serde_json::to_vec(&entry).expect("json");
                line.push(b'\n');
                f.write_all(&line)
            });
        if let Err(e) = res {
            tracing::error!("dead-letter write failed: {e}");
        }
    }

    fn done(&self) {
        let mut p = self.pending.lock();
        *p = p.saturating_sub(1);
        if *p == 0 {
            self.idle.notify_all();
        }
    }
}

struct Tenant {
    store: Arc<TenantStore>,
    tx: Mutex<Option<mpsc::Sender<JournalEntry>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

struct Journal {
    out: BufWriter<File>,
    next_seq: u64,
}

/// Cheap to clone; all clones share one lake.
#[derive(Clone)]
pub struct Lake {
    inner: Arc<Inner>,
}

struct Inner {
    cfg: LakeConfig,
    shared: Arc<Shared>,
    tenants: RwLock<BTreeMap<String, Arc<Tenant>>>,
    journal: Mutex<Journal>,
    resolver: RwLock<Option<Arc<dyn DescriptorResolver>>>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for t in self.tenants.read().values() {
            t.tx.lock().take();
            if let Some(h) = t.worker.lock().take() {
                let _ = h.join();
            }
        }
    }
}

fn now_ms() -> i64 {
    chrono::Utc::now().timestamp_millis()
}

fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => out.push(e),
            Err(e) => {
                // a torn final line is the only acceptable damage
                tracing::warn!("intake journal line {}: {e}", i + 1);
            }
        }
    }
    Ok(out)
}

/// Entries of a journal file, in sequence order.
pub fn journal_entries(path: &Path) -> Result<Vec<JournalEntry>> {
    read_journal(path)
}

pub fn read_dead_letters(path: &Path) -> Result<Vec<DeadLetterEntry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if let Ok(e) = serde_json::from_str(&line) {
            out.push(e);
        }
    }
    Ok(out)
}

impl Lake {
    /// Opens existing tenant stores and re-queues journal entries they
    /// have not applied yet.
    pub fn open(cfg: LakeConfig) -> Result<Self> {
        std::fs::create_dir_all(cfg.dir.join("tenants"))?;
        let journal_path = cfg.dir.join(INTAKE_JOURNAL);
        let entries = read_journal(&journal_path)?;
        let next_seq = entries.iter().map(JournalEntry::seq).max().unwrap_or(0) + 1;
        // rewrite without a torn tail so appends start on a fresh line
        if journal_path.exists() {
            let text = std::fs::read(&journal_path)?;
            if !text.is_empty() && !text.ends_with(b"\n") {
                let cut = text.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                OpenOptions::new().write(true).open(&journal_path)?.set_len(cut as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&journal_path)?;
        let shared = Arc::new(Shared {
            dir: cfg.dir.clone(),
            stall_ms: AtomicU64::new(0),
            offline: AtomicBool::new(false),
            shutdown: AtomicBool::new(false),
            received: AtomicU64::new(0),
            stored: AtomicU64::new(0),
            duplicates: AtomicU64::new(0),
            dead: AtomicU64::new(0),
            pending: Mutex::new(0),
            idle: Condvar::new(),
            dead_file: Mutex::new(()),
        });
        let lake = Lake {
            inner: Arc::new(Inner {
                cfg,
                shared,
                tenants: RwLock::new(BTreeMap::new()),
                journal: Mutex::new(Journal {
                    out: BufWriter::new(file),
                    next_seq,
                }),
                resolver: RwLock::new(None),
            }),
        };
        for entry in std::fs::read_dir(lake.inner.cfg.dir.join("tenants"))? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                lake.tenant(&entry.file_name().to_string_lossy())?;
            }
        }
        let mut recovered = 0;
        for e in entries {
            let t = lake.tenant(e.tenant())?;
            if e.seq() > t.store.high_water() {
                lake.enqueue(&t, e);
                recovered += 1;
            }
        }
        if recovered > 0 {
            tracing::info!(recovered, "re-queued unapplied intake entries");
        }
        Ok(lake)
    }

    pub fn config(&self) -> &LakeConfig {
        &self.inner.cfg
    }

    pub fn set_resolver(&self, r: Arc<dyn DescriptorResolver>) {
        *self.inner.resolver.write() = Some(r);
    }

    /// Delay each store write by `d`, simulating a stalled database.
    pub fn set_stall(&self, d: Duration) {
        self.inner.shared.stall_ms.store(d.as_millis() as u64, Ordering::SeqCst);
    }

    /// While offline, writers hold their queue and retry.
    pub fn set_offline(&self, offline: bool) {
        self.inner.shared.offline.store(offline, Ordering::SeqCst);
    }

    pub fn tenant_of(&self, vertical: &str) -> String {
        match self.inner.cfg.tenancy {
            Tenancy::PerVertical => vertical.to_owned(),
            Tenancy::Single => SHARED_TENANT.to_owned(),
        }
    }

    fn tenant(&self, name: &str) -> Result<Arc<Tenant>> {
        if let Some(t) = self.inner.tenants.read().get(name) {
            return Ok(t.clone());
        }
        let mut tenants = self.inner.tenants.write();
        if let Some(t) = tenants.get(name) {
            return Ok(t.clone());
        }
        let dir = self.inner.cfg.dir.join("tenants").join(name);
        let store = Arc::new(TenantStore::open(name, &dir, self.inner.cfg.durability)?);
        let (tx, rx) = mpsc::channel();
        let shared = self.inner.shared.clone();
        let wstore = store.clone();
        let worker = std::thread::Builder::new()
            .name(format!("lake-{name}"))
            .spawn(move || writer(wstore, shared, rx))?;
        let t = Arc::new(Tenant {
            store,
            tx: Mutex::new(Some(tx)),
            worker: Mutex::new(Some(worker)),
        });
        tenants.insert(name.to_owned(), t.clone());
        Ok(t)
    }

    fn enqueue(&self, t: &Tenant, e: JournalEntry) {
        *self.inner.shared.pending.lock() += 1;
        let sent = t.tx.lock().as_ref().map(|tx| tx.send(e).is_ok());
        if sent != Some(true) {
            self.inner.shared.done();
        }
    }

    /// Journals and queues one entry under the journal lock, so per-tenant
    /// queue order equals journal order.
    fn submit(&self, t: &Tenant, make: impl FnOnce(u64) -> JournalEntry) -> Result<u64> {
        let mut j = self.inner.journal.lock();
        let seq = j.next_seq;
        let entry = make(seq);
        serde_json::to_writer(&mut j.out, &entry).map_err(|e| LakeError::Storage(e.to_string()))?;
        j.out.write_all(b"\n")?;
        j.out.flush()?;
        if self.inner.cfg.durability == Durability::Sync {
            j.out.get_ref().sync_data()?;
        }
        j.next_seq += 1;
        self.enqueue(t, entry);
        Ok(seq)
    }

    /// Registers a node's descriptor with its vertical's tenant. Journaled
    /// like a notification so a replay rebuilds the same dimensions.
    pub fn register_node(&self, vertical: &str, desc: &DescriptorRecord) -> Result<u64> {
        desc.validate(citylab_resource::clock::deployment_offset())
            .map_err(|e| LakeError::BadRecord(e.to_string()))?;
        let tenant = self.tenant_of(vertical);
        let t = self.tenant(&tenant)?;
        self.submit(&t, |seq| JournalEntry::Node {
            seq,
            received_at: now_ms(),
            tenant: tenant.clone(),
            vertical: vertical.to_owned(),
            descriptor: desc.clone(),
        })
    }

    fn check_source(&self, src: &Source) -> Result<()> {
        let allow = &self.inner.cfg.allow;
        if allow.is_empty() {
            return Ok(());
        }
        let by_origin = src.origin.as_ref().is_some_and(|o| allow.contains(o));
        let by_ip = src.ip.is_some_and(|ip| allow.iter().any(|a| a.parse::<IpAddr>().ok() == Some(ip)));
        if by_origin || by_ip {
            Ok(())
        } else {
            let who = src
                .origin
                .clone()
                .or_else(|| src.ip.map(|i| i.to_string()))
                .unwrap_or_else(|| "anonymous".into());
            Err(LakeError::Forbidden(who))
        }
    }

    /// Accepts one notification body. Returns once the entry is journaled;
    /// the store write happens later.
    pub fn receive(&self, body: &[u8], src: &Source) -> Result<Ack> {
        self.check_source(src)?;
        let v: Value = serde_json::from_slice(body).map_err(|e| LakeError::Malformed(e.to_string()))?;
        self.receive_value(v)
    }

    pub fn receive_value(&self, v: Value) -> Result<Ack> {
        let Some(p) = parse_notification(&v)? else {
            return Ok(Ack::Verification);
        };
        self.inner.shared.received.fetch_add(1, Ordering::Relaxed);
        let vertical = match route_vertical(&p.cin.lbl) {
            Ok(v) => v,
            Err(e) => {
                self.inner.shared.dead_letter(&e.to_string(), p.cin.lbl.clone(), v);
                return Ok(Ack::DeadLettered);
            }
        };
        let tenant = self.tenant_of(&vertical);
        let t = self.tenant(&tenant)?;
        if let Some(node) = node_of(&p.sur, &p.cin.lbl) {
            self.resolve_if_unknown(&t, &vertical, &node, &p.sur)?;
        }
        let seq = self.submit(&t, |seq| JournalEntry::Notification {
            seq,
            received_at: now_ms(),
            tenant: tenant.clone(),
            notification: v,
        })?;
        Ok(Ack::Queued { seq, tenant })
    }

    fn resolve_if_unknown(&self, t: &Tenant, vertical: &str, node: &str, sur: &str) -> Result<()> {
        if t.store.descriptor(node).is_some() {
            return Ok(());
        }
        let Some(r) = self.inner.resolver.read().clone() else {
            return Ok(());
        };
        if let Some((v, desc)) = r.resolve(node, sur) {
            if v == vertical && desc.node_id == node {
                // a second notification may race here before the writer
                // applies the first registration; register_node is idempotent
                self.register_node(vertical, &desc)?;
            }
        }
        Ok(())
    }

    /// Re-submits every entry of a journal file, as if redelivered.
    pub fn replay_journal(&self, path: &Path) -> Result<usize> {
        let entries = read_journal(path)?;
        let n = entries.len();
        for e in entries {
            match e {
                JournalEntry::Node { vertical, descriptor, .. } => {
                    self.register_node(&vertical, &descriptor)?;
                }
                JournalEntry::Notification { notification, .. } => {
                    self.receive_value(notification)?;
                }
            }
        }
        Ok(n)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.inner.cfg.dir.join(INTAKE_JOURNAL)
    }

    pub fn dead_letters_path(&self) -> PathBuf {
        self.inner.cfg.dir.join(DEAD_LETTERS)
    }

    pub fn dead_letters(&self) -> Result<Vec<DeadLetterEntry>> {
        read_dead_letters(&self.dead_letters_path())
    }

    pub fn stats(&self) -> LakeStats {
        let s = &self.inner.shared;
        LakeStats {
            received: s.received.load(Ordering::Relaxed),
            stored: s.stored.load(Ordering::Relaxed),
            duplicates: s.duplicates.load(Ordering::Relaxed),
            dead_lettered: s.dead.load(Ordering::Relaxed),
            pending: *s.pending.lock(),
        }
    }

    /// Blocks until every queued entry is applied, or the timeout passes.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let s = &self.inner.shared;
        let mut p = s.pending.lock();
        while *p > 0 {
            if s.idle.wait_until(&mut p, deadline).timed_out() {
                return *p == 0;
            }
        }
        true
    }

    pub fn tenants(&self) -> Vec<String> {
        self.inner.tenants.read().keys().cloned().collect()
    }

    pub fn store(&self, tenant: &str) -> Option<Arc<TenantStore>> {
        self.inner.tenants.read().get(tenant).map(|t| t.store.clone())
    }

    /// Tenant holding `node`, if any.
    pub fn locate(&self, node: &str) -> Option<String> {
        self.inner
            .tenants
            .read()
            .iter()
            .find(|(_, t)| t.store.has_node(node))
            .map(|(k, _)| k.clone())
    }

    /// Rows of `node` in `[start, end)`, optionally projected to `attrs`.
    pub fn query_temporal(&self, tenant: &str, node: &str, start: i64, end: i64, attrs: Option<&[String]>) -> Result<Vec<DataRow>> {
        let store = self
            .store(tenant)
            .ok_or_else(|| LakeError::UnknownTenant(tenant.to_owned()))?;
        if !store.has_node(node) {
            return Err(LakeError::UnknownNode(node.to_owned()));
        }
        let rows = store.range(node, start, end);
        Ok(match attrs {
            Some(a) => rows.iter().map(|r| r.project(a)).collect(),
            None => rows,
        })
    }
}

fn writer(store: Arc<TenantStore>, shared: Arc<Shared>, rx: mpsc::Receiver<JournalEntry>) {
    while let Ok(entry) = rx.recv() {
        while shared.offline.load(Ordering::SeqCst) {
            if shared.shutdown.load(Ordering::SeqCst) {
                // leave the rest to recovery on the next open
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let stall = shared.stall_ms.load(Ordering::SeqCst);
        if stall > 0 {
            std::thread::sleep(Duration::from_millis(stall));
        }
        if entry.seq() > store.high_water() {
            apply(&store, &shared, entry);
        }
        shared.done();
    }
}

fn apply(store: &TenantStore, shared: &Shared, entry: JournalEntry) {
    match entry {
        JournalEntry::Node { seq, vertical, descriptor, .. } => {
            if let Err(e) = store.register_node(seq, &vertical, &descriptor) {
                tracing::error!(node = descriptor.node_id, "register failed: {e}");
                let _ = store.skip(seq);
            }
        }
        JournalEntry::Notification { seq, notification, .. } => {
            match to_row(store, &notification) {
                Ok(row) => match store.insert(seq, row) {
                    Ok(()) => {
                        shared.stored.fetch_add(1, Ordering::Relaxed);
                    }
                    Err(LakeError::DuplicateKey { .. }) => {
                        shared.duplicates.fetch_add(1, Ordering::Relaxed);
                        let _ = store.skip(seq);
                    }
                    Err(e) => tracing::error!("store write failed: {e}"),
                },
                Err(e) => {
                    let labels = notification
                        .pointer("/m2m:sgn/nev/rep/m2m:cin/lbl")
                        .and_then(|l| serde_json::from_value(l.clone()).ok())
                        .unwrap_or_default();
                    shared.dead_letter(&e.to_string(), labels, notification);
                    let _ = store.skip(seq);
                }
            }
        }
    }
}

fn to_row(store: &TenantStore, notification: &Value) -> Result<DataRow> {
    let p = parse_notification(notification)?.ok_or_else(|| LakeError::Malformed("verification".into()))?;
    let vertical = route_vertical(&p.cin.lbl)?;
    let node = node_of(&p.sur, &p.cin.lbl).ok_or_else(|| LakeError::UnknownNode(p.sur.clone()))?;
    let desc = store.descriptor(&node).ok_or_else(|| LakeError::UnknownNode(node.clone()))?;
    let mut values =
        parse_positional_payload(&desc, &p.cin.con).map_err(|e| LakeError::BadRecord(e.to_string()))?;
    let ts = match values.shift_remove("Timestamp") {
        Some(PayloadValue::Number(t)) if t.is_finite() => t as i64,
        _ => citylab_resource::clock::parse_m2m_timestamp(&p.cin.ct)
            .map(|t| t.timestamp())
            .ok_or_else(|| LakeError::BadRecord(format!("no timestamp in {}", p.cin.con)))?,
    };
    let version = store
        .version_at(&node, ts)
        .or_else(|| version_label(&p.cin.lbl).map(str::to_owned))
        .unwrap_or_default();
    let params = values
        .keys()
        .map(|k| store.param_id(&vertical, &version, k).unwrap_or(0))
        .collect();
    Ok(DataRow {
        node,
        vertical,
        ts,
        version,
        values,
        params,
    })
}
