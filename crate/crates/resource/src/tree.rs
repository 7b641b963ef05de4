//! The resource tree.
//!
//! Locking: `index` guards the node map and is write-locked only for
//! structural changes (create, update, delete, snapshot). Each container's
//! instances sit behind their own lock, so inserts into distinct containers
//! proceed in parallel while inserts into one container are serialized.
//! Group fan-out takes no tree-wide lock across members.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::acp::{AccessPolicy, AccessRule, Permission, PermissionSet};
use crate::clock::{m2m_timestamp, Clock, SystemClock};
use crate::descriptor::DescriptorRecord;
use crate::error::{ResourceError, Result};
use crate::journal::{self, ContainerSnapshot, Journal, JournalRecord, Snapshot};
use crate::model::*;
use crate::payload::parse_positional;

pub const DEFAULT_MNI: usize = 120;
pub const DEFAULT_MBS: u64 = 10_000;
pub const DATA_CONTAINER: &str = "Data";
pub const DESCRIPTOR_CONTAINER: &str = "Descriptor";

#[derive(Debug, Clone)]
pub struct TreeConfig {
    /// `in-cse`: the CSE's `ri` is `/in-cse`.
    pub cse_id: String,
    /// `in-name`: hierarchical paths start with `/in-cse/in-name`.
    pub cse_name: String,
    /// Granted everything by the bootstrap policy.
    pub admin_originator: String,
    pub default_mni: usize,
    pub snapshot_every: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            cse_id: "in-cse".into(),
            cse_name: "in-name".into(),
            admin_originator: "admin:admin".into(),
            default_mni: DEFAULT_MNI,
            snapshot_every: 1000,
        }
    }
}

/// Observer of freshly created content instances. Called while the
/// container's write lock is held, so implementations must not block.
pub trait CinListener: Send + Sync {
    fn on_cin(&self, event: &CinEvent);
}

#[derive(Debug, Clone)]
pub struct CinEvent {
    pub container: ResourceId,
    pub cin: ContentInstance,
    pub subscriptions: Vec<Resource>,
}

#[derive(Debug, Default)]
struct ContainerState {
    instances: VecDeque<ContentInstance>,
    cbs: u64,
    st: u64,
}

impl ContainerState {
    fn push(&mut self, cin: ContentInstance) {
        self.cbs += cin.cs as u64;
        self.st += 1;
        self.instances.push_back(cin);
    }

    fn pop_oldest(&mut self) -> Option<ContentInstance> {
        let old = self.instances.pop_front()?;
        self.cbs -= old.cs as u64;
        self.st += 1;
        Some(old)
    }
}

type SharedContainer = Arc<RwLock<ContainerState>>;

#[derive(Default)]
struct Index {
    nodes: HashMap<String, Resource>,
    by_path: HashMap<String, String>,
    children: HashMap<String, Vec<String>>,
    containers: HashMap<String, SharedContainer>,
}

impl Index {
    fn insert_node(&mut self, r: Resource) {
        if let Some(pi) = &r.pi {
            self.children.entry(pi.clone()).or_default().push(r.ri.clone());
        }
        if r.ty == ResourceType::Container {
            self.containers.entry(r.ri.clone()).or_default();
        }
        self.by_path.insert(r.path.clone(), r.ri.clone());
        self.nodes.insert(r.ri.clone(), r);
    }

    fn remove_subtree(&mut self, ri: &str) {
        let kids = self.children.remove(ri).unwrap_or_default();
        for k in kids {
            self.remove_subtree(&k);
        }
        if let Some(r) = self.nodes.remove(ri) {
            self.by_path.remove(&r.path);
            self.containers.remove(ri);
            if let Some(pi) = &r.pi {
                if let Some(sibs) = self.children.get_mut(pi) {
                    sibs.retain(|s| s != ri);
                }
            }
        }
    }

    fn lookup(&self, addr: &str) -> Option<&Resource> {
        let ri = self.by_path.get(addr).map(String::as_str).unwrap_or(addr);
        self.nodes.get(ri)
    }

    fn child_named(&self, parent_ri: &str, rn: &str) -> Option<&Resource> {
        self.children
            .get(parent_ri)?
            .iter()
            .filter_map(|c| self.nodes.get(c))
            .find(|c| c.rn == rn)
    }

    /// The policies governing `r`: its own `acpi`, or the nearest ancestor's.
    fn effective_policies(&self, r: &Resource) -> Vec<&AccessPolicy> {
        let mut cur = Some(r);
        while let Some(node) = cur {
            if !node.acpi.is_empty() {
                return node
                    .acpi
                    .iter()
                    .filter_map(|id| self.nodes.get(id).and_then(Resource::policy))
                    .collect();
            }
            cur = node.pi.as_ref().and_then(|p| self.nodes.get(p));
        }
        Vec::new()
    }

    fn effective_acpi(&self, r: &Resource) -> Vec<String> {
        let mut cur = Some(r);
        while let Some(node) = cur {
            if !node.acpi.is_empty() {
                return node.acpi.clone();
            }
            cur = node.pi.as_ref().and_then(|p| self.nodes.get(p));
        }
        Vec::new()
    }

    fn authorize(&self, r: &Resource, originator: &str, op: Permission) -> Result<()> {
        let allowed = match r.policy() {
            Some(p) => p.grants_self(originator, op),
            None => self
                .effective_policies(r)
                .iter()
                .any(|p| p.grants(originator, op)),
        };
        if allowed {
            Ok(())
        } else {
            Err(ResourceError::AccessDenied {
                op,
                target: r.path.clone(),
            })
        }
    }

    fn subscriptions_of(&self, ri: &str) -> Vec<Resource> {
        self.children
            .get(ri)
            .map(|kids| {
                kids.iter()
                    .filter_map(|k| self.nodes.get(k))
                    .filter(|k| k.ty == ResourceType::Subscription)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Parents before children, siblings in creation order.
    fn ordered(&self, root: &str) -> Vec<&Resource> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([root.to_owned()]);
        while let Some(ri) = queue.pop_front() {
            if let Some(r) = self.nodes.get(&ri) {
                out.push(r);
            }
            if let Some(kids) = self.children.get(&ri) {
                queue.extend(kids.iter().cloned());
            }
        }
        out
    }
}

pub struct ResourceTree {
    config: TreeConfig,
    cse_ri: String,
    index: RwLock<Index>,
    seq: AtomicU64,
    clock: Arc<dyn Clock>,
    journal: Mutex<Option<Journal>>,
    listeners: RwLock<Vec<Arc<dyn CinListener>>>,
    arity_cache: Mutex<HashMap<String, Option<usize>>>,
}

impl std::fmt::Debug for ResourceTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResourceTree")
            .field("cse", &self.cse_ri)
            .field("resources", &self.index.read().nodes.len())
            .finish()
    }
}

impl ResourceTree {
    /// Fresh in-memory tree with a CSE root and a bootstrap admin policy.
    pub fn new(config: TreeConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: TreeConfig, clock: Arc<dyn Clock>) -> Self {
        let tree = Self::empty(config, clock);
        tree.bootstrap();
        tree
    }

    /// Opens (or creates) a persisted tree in `dir`, replaying snapshot and
    /// journal.
    pub fn open(dir: impl AsRef<Path>, config: TreeConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        let dir = dir.as_ref();
        let (snapshot, records) = journal::load(dir)?;
        let tree = Self::empty(config, clock);
        let fresh = snapshot.is_none() && records.is_empty();
        if let Some(snap) = snapshot {
            tree.restore(snap);
        }
        for rec in records {
            tree.apply(rec);
        }
        let mut j = Journal::open(dir)?;
        if fresh {
            *tree.journal.lock() = Some(j);
            tree.bootstrap();
        } else {
            j.since_snapshot = 0;
            *tree.journal.lock() = Some(j);
        }
        Ok(tree)
    }

    fn empty(config: TreeConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            cse_ri: format!("/{}", config.cse_id),
            config,
            index: RwLock::new(Index::default()),
            seq: AtomicU64::new(0),
            clock,
            journal: Mutex::new(None),
            listeners: RwLock::new(Vec::new()),
            arity_cache: Mutex::new(HashMap::new()),
        }
    }

    fn bootstrap(&self) {
        let now = self.now();
        let cse = Resource {
            ty: ResourceType::CseBase,
            rn: self.config.cse_name.clone(),
            ri: self.cse_ri.clone(),
            pi: None,
            path: format!("{}/{}", self.cse_ri, self.config.cse_name),
            ct: now.clone(),
            lt: now.clone(),
            et: None,
            labels: Vec::new(),
            acpi: Vec::new(),
            attrs: Attributes::CseBase {
                csi: self.cse_ri.clone(),
            },
        };
        let admin = AccessRule::new(self.config.admin_originator.clone(), PermissionSet::ALL);
        let acp_ri = self.next_ri(ResourceType::AccessControlPolicy);
        let acp = Resource {
            ty: ResourceType::AccessControlPolicy,
            rn: "acp-admin".into(),
            pi: Some(cse.ri.clone()),
            path: format!("{}/acp-admin", cse.path),
            ri: acp_ri.clone(),
            ct: now.clone(),
            lt: now,
            et: None,
            labels: Vec::new(),
            acpi: Vec::new(),
            attrs: Attributes::AccessControlPolicy(AccessPolicy {
                rules: vec![admin.clone()],
                self_rules: vec![admin],
            }),
        };
        let mut cse = cse;
        cse.acpi = vec![acp_ri];
        let mut idx = self.index.write();
        self.persist(JournalRecord::Create { resource: cse.clone() });
        idx.insert_node(cse);
        self.persist(JournalRecord::Create { resource: acp.clone() });
        idx.insert_node(acp);
    }

    fn restore(&self, snap: Snapshot) {
        let mut idx = self.index.write();
        for r in snap.resources {
            idx.insert_node(r);
        }
        for c in snap.containers {
            if let Some(state) = idx.containers.get(&c.ri) {
                let mut s = state.write();
                s.st = c.st;
                s.cbs = c.instances.iter().map(|i| i.cs as u64).sum();
                s.instances = c.instances.into();
            }
        }
        self.seq.fetch_max(snap.seq, Ordering::SeqCst);
    }

    fn apply(&self, rec: JournalRecord) {
        let mut idx = self.index.write();
        match rec {
            JournalRecord::Create { resource } => {
                self.bump_seq_from(&resource.ri);
                idx.insert_node(resource);
            }
            JournalRecord::Update { resource } => {
                idx.nodes.insert(resource.ri.clone(), resource);
            }
            JournalRecord::Delete { ri } => idx.remove_subtree(&ri),
            JournalRecord::InsertCin {
                container,
                cin,
                evicted,
            } => {
                self.bump_seq_from(&cin.ri);
                if let Some(state) = idx.containers.get(&container) {
                    let mut s = state.write();
                    if let Some(ev) = evicted {
                        if s.instances.front().is_some_and(|f| f.ri == ev) {
                            s.pop_oldest();
                        }
                    }
                    s.push(cin);
                }
            }
        }
    }

    fn bump_seq_from(&self, ri: &str) {
        if let Some(n) = ri.rsplit('-').next().and_then(|n| n.parse::<u64>().ok()) {
            self.seq.fetch_max(n, Ordering::SeqCst);
        }
    }

    fn next_ri(&self, ty: ResourceType) -> String {
        let n = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        format!("{}/{}-{}", self.cse_ri, ty.prefix(), n)
    }

    fn now(&self) -> String {
        m2m_timestamp(self.clock.now())
    }

    fn persist(&self, rec: JournalRecord) {
        let mut guard = self.journal.lock();
        if let Some(j) = guard.as_mut() {
            if let Err(e) = j.append(&rec) {
                tracing::error!(error = %e, "journal append failed");
            }
        }
    }

    fn maybe_snapshot(&self) {
        let due = self
            .journal
            .lock()
            .as_ref()
            .is_some_and(|j| j.since_snapshot >= self.config.snapshot_every);
        if due {
            if let Err(e) = self.snapshot() {
                tracing::error!(error = %e, "snapshot failed");
            }
        }
    }

    /// Writes a full snapshot and truncates the journal. No-op in memory.
    pub fn snapshot(&self) -> Result<()> {
        let idx = self.index.write();
        let mut guard = self.journal.lock();
        let Some(j) = guard.as_mut() else {
            return Ok(());
        };
        let resources: Vec<Resource> = idx.ordered(&self.cse_ri).into_iter().cloned().collect();
        let containers = resources
            .iter()
            .filter(|r| r.ty == ResourceType::Container)
            .filter_map(|r| {
                let state = idx.containers.get(&r.ri)?.read();
                Some(ContainerSnapshot {
                    ri: r.ri.clone(),
                    st: state.st,
                    instances: state.instances.iter().cloned().collect(),
                })
            })
            .collect();
        j.write_snapshot(&Snapshot {
            seq: self.seq.load(Ordering::SeqCst),
            resources,
            containers,
        })
    }

    /// Flushes and fsyncs the journal.
    pub fn sync(&self) -> Result<()> {
        if let Some(j) = self.journal.lock().as_mut() {
            j.sync()?;
        }
        Ok(())
    }

    pub fn add_listener(&self, l: Arc<dyn CinListener>) {
        self.listeners.write().push(l);
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn cse(&self) -> ResourceId {
        let idx = self.index.read();
        idx.nodes[&self.cse_ri].id()
    }

    /// Resolves a hierarchical path or `ri` to the resource's id.
    pub fn resolve(&self, addr: &str) -> Result<ResourceId> {
        let addr = normalize(addr);
        self.index
            .read()
            .lookup(addr)
            .map(Resource::id)
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))
    }

    pub fn exists(&self, addr: &str) -> bool {
        self.index.read().lookup(normalize(addr)).is_some()
    }

    /// True if any access control policy in the tree names this credential.
    pub fn is_known_originator(&self, originator: &str) -> bool {
        self.index
            .read()
            .nodes
            .values()
            .filter_map(Resource::policy)
            .any(|p| p.mentions(originator))
    }

    pub fn create_resource(&self, parent: &str, spec: ResourceSpec, originator: &str) -> Result<ResourceId> {
        let parent = normalize(parent);
        let mut idx = self.index.write();
        let parent_res = idx
            .lookup(parent)
            .ok_or_else(|| ResourceError::NotFound(parent.to_owned()))?
            .clone();
        let ty = spec.ty();
        check_parent_kind(parent_res.ty, ty)?;

        // subscriptions are gated by NOTIFY on the container, everything else by CREATE
        let op = if ty == ResourceType::Subscription {
            Permission::Notify
        } else {
            Permission::Create
        };
        idx.authorize(&parent_res, originator, op)?;

        let rn = spec.rn().trim().to_owned();
        validate_rn(&rn)?;
        if idx.child_named(&parent_res.ri, &rn).is_some() {
            return Err(ResourceError::DuplicateName(rn));
        }

        let now = self.now();
        let (labels, mut acpi, attrs) = match spec {
            ResourceSpec::Ae { labels, acpi, .. } => (
                labels,
                acpi,
                Attributes::Ae {
                    api: format!("app-{rn}"),
                },
            ),
            ResourceSpec::Container {
                labels,
                acpi,
                mni,
                mbs,
                mia,
                ..
            } => {
                let mni = mni.unwrap_or(self.config.default_mni);
                if mni == 0 {
                    return Err(ResourceError::BadRequest("mni must be positive".into()));
                }
                (
                    labels,
                    acpi,
                    Attributes::Container {
                        mni,
                        mbs: mbs.unwrap_or(DEFAULT_MBS),
                        mia: mia.unwrap_or(0),
                    },
                )
            }
            ResourceSpec::AccessControlPolicy { policy, .. } => {
                if policy.rules.is_empty() {
                    return Err(ResourceError::BadRequest(
                        "access control policy needs at least one rule".into(),
                    ));
                }
                (Vec::new(), Vec::new(), Attributes::AccessControlPolicy(policy))
            }
            ResourceSpec::Group {
                mt,
                mid,
                mnm,
                labels,
                acpi,
                ..
            } => {
                if mid.len() > mnm {
                    return Err(ResourceError::BadRequest(format!(
                        "{} members exceed mnm {mnm}",
                        mid.len()
                    )));
                }
                let member_ty = ResourceType::from_code(u64::from(mt))
                    .ok_or_else(|| ResourceError::BadRequest(format!("unknown member type {mt}")))?;
                let mut resolved = Vec::with_capacity(mid.len());
                for m in &mid {
                    let member = idx
                        .lookup(normalize(m))
                        .ok_or_else(|| ResourceError::BadRequest(format!("member {m} does not exist")))?;
                    if member.ty != member_ty {
                        return Err(ResourceError::BadRequest(format!(
                            "member {m} is not of type {mt}"
                        )));
                    }
                    resolved.push(normalize(m).to_owned());
                }
                (labels, acpi, Attributes::Group { mt, mid: resolved, mnm })
            }
            ResourceSpec::Subscription { nu, .. } => {
                if nu.is_empty() {
                    return Err(ResourceError::BadRequest("subscription needs a notification URI".into()));
                }
                (
                    Vec::new(),
                    Vec::new(),
                    Attributes::Subscription {
                        nu,
                        creator: originator.to_owned(),
                    },
                )
            }
        };

        for id in &acpi {
            let ok = idx
                .lookup(normalize(id))
                .is_some_and(|r| r.ty == ResourceType::AccessControlPolicy);
            if !ok {
                return Err(ResourceError::BadRequest(format!("{id} is not an access control policy")));
            }
        }
        let mut acpi_norm: Vec<String> = acpi
            .iter()
            .map(|a| idx.lookup(normalize(a)).map(|r| r.ri.clone()).unwrap_or_default())
            .collect();
        if ty == ResourceType::Container && acpi_norm.is_empty() {
            // every container carries at least one policy of its own
            acpi_norm = idx.effective_acpi(&parent_res);
            if acpi_norm.is_empty() {
                return Err(ResourceError::BadRequest("container has no access control policy".into()));
            }
        }
        acpi = acpi_norm;

        let ri = self.next_ri(ty);
        let et = match ty {
            ResourceType::Container => self.clock.now().checked_add_signed(chrono::Duration::days(365)).map(m2m_timestamp),
            _ => None,
        };
        let res = Resource {
            ty,
            path: format!("{}/{}", parent_res.path, rn),
            rn,
            ri,
            pi: Some(parent_res.ri.clone()),
            ct: now.clone(),
            lt: now,
            et,
            labels,
            acpi,
            attrs,
        };
        let id = res.id();
        self.persist(JournalRecord::Create { resource: res.clone() });
        idx.insert_node(res);
        drop(idx);
        self.maybe_snapshot();
        Ok(id)
    }

    pub fn update_resource(&self, addr: &str, update: UpdateSpec, originator: &str) -> Result<ResourceId> {
        let addr = normalize(addr);
        let mut idx = self.index.write();
        let mut res = idx
            .lookup(addr)
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))?
            .clone();
        idx.authorize(&res, originator, Permission::Update)?;
        if let Some(labels) = update.labels {
            res.labels = labels;
        }
        if let Some(acpi) = update.acpi {
            let mut norm = Vec::with_capacity(acpi.len());
            for a in &acpi {
                match idx.lookup(normalize(a)) {
                    Some(r) if r.ty == ResourceType::AccessControlPolicy => norm.push(r.ri.clone()),
                    _ => return Err(ResourceError::BadRequest(format!("{a} is not an access control policy"))),
                }
            }
            if res.ty == ResourceType::Container && norm.is_empty() {
                return Err(ResourceError::BadRequest("container must keep a policy".into()));
            }
            res.acpi = norm;
        }
        if let Some(policy) = update.policy {
            match &mut res.attrs {
                Attributes::AccessControlPolicy(p) if !policy.rules.is_empty() => *p = policy,
                _ => return Err(ResourceError::BadRequest("not a valid policy update".into())),
            }
        }
        res.lt = self.now();
        let id = res.id();
        self.persist(JournalRecord::Update { resource: res.clone() });
        idx.nodes.insert(res.ri.clone(), res);
        Ok(id)
    }

    pub fn delete_resource(&self, addr: &str, originator: &str) -> Result<()> {
        let addr = normalize(addr);
        let mut idx = self.index.write();
        let res = idx
            .lookup(addr)
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))?
            .clone();
        if res.ty == ResourceType::CseBase {
            return Err(ResourceError::BadRequest("the CSE root cannot be deleted".into()));
        }
        idx.authorize(&res, originator, Permission::Delete)?;
        self.persist(JournalRecord::Delete { ri: res.ri.clone() });
        idx.remove_subtree(&res.ri);
        Ok(())
    }

    /// Appends a content instance, evicting the oldest one first if the
    /// container is full.
    pub fn insert_cin(&self, cnt: &str, spec: CinSpec, originator: &str) -> Result<Inserted> {
        let cnt = normalize(cnt);
        let idx = self.index.read();
        let container = idx
            .lookup(cnt)
            .ok_or_else(|| ResourceError::NotFound(cnt.to_owned()))?;
        let Attributes::Container { mni, .. } = container.attrs else {
            return Err(ResourceError::BadRequest(format!("{cnt} is not a container")));
        };
        idx.authorize(container, originator, Permission::Create)?;
        if let Some(arity) = self.data_arity(&idx, container) {
            let found = parse_positional(&spec.con)?.len();
            if found != arity {
                return Err(ResourceError::ArityMismatch {
                    expected: arity,
                    found,
                });
            }
        }

        let state = idx.containers.get(&container.ri).cloned().expect("container state");
        let mut s = state.write();
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        let rn = match spec.rn {
            Some(rn) => {
                validate_rn(&rn)?;
                if s.instances.iter().any(|c| c.rn == rn) {
                    return Err(ResourceError::DuplicateName(rn));
                }
                rn
            }
            None => format!("cin_{seq}"),
        };
        let now = self.now();
        let cin = ContentInstance {
            rn,
            ty: ResourceType::ContentInstance.code(),
            ri: format!("{}/cin-{seq}", self.cse_ri),
            pi: container.ri.clone(),
            ct: now.clone(),
            lt: now,
            lbl: spec.labels,
            st: 0,
            cnf: spec.cnf.unwrap_or_else(|| "text".into()),
            cs: spec.con.len(),
            con: spec.con,
        };
        let evicted = if s.instances.len() >= mni {
            s.pop_oldest().map(|old| ResourceId {
                path: format!("{}/{}", container.path, old.rn),
                ri: old.ri,
            })
        } else {
            None
        };
        self.persist(JournalRecord::InsertCin {
            container: container.ri.clone(),
            cin: cin.clone(),
            evicted: evicted.as_ref().map(|e| e.ri.clone()),
        });
        s.push(cin.clone());

        let listeners = self.listeners.read();
        if !listeners.is_empty() {
            let event = CinEvent {
                container: container.id(),
                cin: cin.clone(),
                subscriptions: idx.subscriptions_of(&container.ri),
            };
            for l in listeners.iter() {
                l.on_cin(&event);
            }
        }
        drop(s);
        drop(idx);
        self.maybe_snapshot();
        Ok(Inserted { cin, evicted })
    }

    /// Arity of positional payloads for a `Data` container with a sibling
    /// `Descriptor` holding a parseable descriptor.
    fn data_arity(&self, idx: &Index, container: &Resource) -> Option<usize> {
        if container.rn != DATA_CONTAINER {
            return None;
        }
        let desc = idx.child_named(container.pi.as_ref()?, DESCRIPTOR_CONTAINER)?;
        let state = idx.containers.get(&desc.ri)?.read();
        let latest = state.instances.back()?;
        let mut cache = self.arity_cache.lock();
        *cache.entry(latest.ri.clone()).or_insert_with(|| {
            DescriptorRecord::from_content(&latest.con)
                .ok()
                .map(|d| d.parameters.len())
        })
    }

    fn with_container<T>(
        &self,
        cnt: &str,
        originator: &str,
        f: impl FnOnce(&Resource, &ContainerState) -> Result<T>,
    ) -> Result<T> {
        let cnt = normalize(cnt);
        let idx = self.index.read();
        let container = idx
            .lookup(cnt)
            .ok_or_else(|| ResourceError::NotFound(cnt.to_owned()))?;
        if container.ty != ResourceType::Container {
            return Err(ResourceError::BadRequest(format!("{cnt} is not a container")));
        }
        idx.authorize(container, originator, Permission::Retrieve)?;
        let state = idx.containers.get(&container.ri).expect("container state").read();
        f(container, &state)
    }

    pub fn latest(&self, cnt: &str, originator: &str) -> Result<ContentInstance> {
        self.with_container(cnt, originator, |c, s| {
            s.instances
                .back()
                .cloned()
                .ok_or_else(|| ResourceError::Empty(c.path.clone()))
        })
    }

    pub fn oldest(&self, cnt: &str, originator: &str) -> Result<ContentInstance> {
        self.with_container(cnt, originator, |c, s| {
            s.instances
                .front()
                .cloned()
                .ok_or_else(|| ResourceError::Empty(c.path.clone()))
        })
    }

    /// Every stored instance, oldest first.
    pub fn all_data(&self, cnt: &str, originator: &str) -> Result<Vec<ContentInstance>> {
        self.with_container(cnt, originator, |_, s| Ok(s.instances.iter().cloned().collect()))
    }

    /// Container together with its stored instances, for `rcn=4` style reads.
    pub fn container_with_data(&self, cnt: &str, originator: &str) -> Result<(ResourceView, Vec<ContentInstance>)> {
        self.with_container(cnt, originator, |c, s| {
            Ok((
                ResourceView {
                    resource: c.clone(),
                    container: Some(stats(c, s)),
                },
                s.instances.iter().cloned().collect(),
            ))
        })
    }

    pub fn retrieve(&self, addr: &str, originator: &str) -> Result<ResourceView> {
        let addr = normalize(addr);
        let idx = self.index.read();
        let res = idx
            .lookup(addr)
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))?;
        idx.authorize(res, originator, Permission::Retrieve)?;
        let container = idx.containers.get(&res.ri).map(|s| stats(res, &s.read()));
        Ok(ResourceView {
            resource: res.clone(),
            container,
        })
    }

    /// Looks up `<container path>/<cin rn>`.
    pub fn retrieve_instance(&self, addr: &str, originator: &str) -> Result<ContentInstance> {
        let addr = normalize(addr);
        let (parent, rn) = addr
            .rsplit_once('/')
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))?;
        self.with_container(parent, originator, |_, s| {
            s.instances
                .iter()
                .find(|c| c.rn == rn || c.ri == addr)
                .cloned()
                .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))
        })
    }

    /// Applies `verb` to every member of a group, in `mid` order. Failures
    /// are reported per member.
    pub fn group_fanout(&self, grp: &str, verb: FanoutVerb, originator: &str) -> Result<Vec<MemberResult>> {
        let grp = normalize(grp);
        let members = {
            let idx = self.index.read();
            let g = idx
                .lookup(grp)
                .ok_or_else(|| ResourceError::NotFound(grp.to_owned()))?;
            let Attributes::Group { mid, .. } = &g.attrs else {
                return Err(ResourceError::BadRequest(format!("{grp} is not a group")));
            };
            idx.authorize(g, originator, Permission::Retrieve)?;
            mid.clone()
        };
        Ok(members
            .into_iter()
            .map(|m| {
                let result = match verb {
                    FanoutVerb::Latest => self.latest(&m, originator).map(FanoutPayload::One),
                    FanoutVerb::Oldest => self.oldest(&m, originator).map(FanoutPayload::One),
                    FanoutVerb::All => self.all_data(&m, originator).map(FanoutPayload::All),
                };
                MemberResult { member: m, result }
            })
            .collect())
    }

    pub fn group_members(&self, grp: &str) -> Result<Vec<String>> {
        let idx = self.index.read();
        match idx.lookup(normalize(grp)).map(|g| &g.attrs) {
            Some(Attributes::Group { mid, .. }) => Ok(mid.clone()),
            Some(_) => Err(ResourceError::BadRequest(format!("{grp} is not a group"))),
            None => Err(ResourceError::NotFound(grp.to_owned())),
        }
    }

    /// Paths of every `Data` container whose labels include all of
    /// `labels`, sorted.
    pub fn discover(&self, labels: &[String], originator: &str) -> Result<Vec<String>> {
        let cse = self.cse_ri.clone();
        self.discover_under(&cse, labels, originator)
    }

    pub fn discover_under(&self, base: &str, labels: &[String], originator: &str) -> Result<Vec<String>> {
        let base = normalize(base);
        let idx = self.index.read();
        let root = idx
            .lookup(base)
            .ok_or_else(|| ResourceError::NotFound(base.to_owned()))?;
        idx.authorize(root, originator, Permission::Discovery)?;
        let prefix = format!("{}/", root.path);
        let mut out: Vec<String> = idx
            .nodes
            .values()
            .filter(|r| r.ty == ResourceType::Container && r.rn == DATA_CONTAINER)
            .filter(|r| r.path.starts_with(&prefix))
            .filter(|r| labels.iter().all(|l| r.labels.iter().any(|have| have == l)))
            .map(|r| r.path.clone())
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn subscriptions(&self, cnt: &str) -> Result<Vec<Resource>> {
        let idx = self.index.read();
        let c = idx
            .lookup(normalize(cnt))
            .ok_or_else(|| ResourceError::NotFound(cnt.to_owned()))?;
        Ok(idx.subscriptions_of(&c.ri))
    }

    /// Children of `addr`, in creation order. Not access checked.
    pub fn children(&self, addr: &str) -> Result<Vec<ResourceId>> {
        let idx = self.index.read();
        let r = idx
            .lookup(normalize(addr))
            .ok_or_else(|| ResourceError::NotFound(addr.to_owned()))?;
        Ok(idx
            .children
            .get(&r.ri)
            .map(|kids| kids.iter().filter_map(|k| idx.nodes.get(k)).map(Resource::id).collect())
            .unwrap_or_default())
    }

    /// Canonical dump of the whole tree, used to compare states.
    pub fn export(&self) -> Snapshot {
        let idx = self.index.read();
        let resources: Vec<Resource> = idx.ordered(&self.cse_ri).into_iter().cloned().collect();
        let containers = resources
            .iter()
            .filter_map(|r| {
                let s = idx.containers.get(&r.ri)?.read();
                Some(ContainerSnapshot {
                    ri: r.ri.clone(),
                    st: s.st,
                    instances: s.instances.iter().cloned().collect(),
                })
            })
            .collect();
        Snapshot {
            seq: self.seq.load(Ordering::SeqCst),
            resources,
            containers,
        }
    }
}

fn stats(c: &Resource, s: &ContainerState) -> ContainerStats {
    ContainerStats {
        st: s.st,
        cni: s.instances.len(),
        cbs: s.cbs,
        ol: format!("{}/ol", c.path),
        la: format!("{}/la", c.path),
    }
}

fn normalize(addr: &str) -> &str {
    let a = addr.trim();
    let a = a.strip_prefix("/~").unwrap_or(a);
    if a.len() > 1 {
        a.trim_end_matches('/')
    } else {
        a
    }
}

fn validate_rn(rn: &str) -> Result<()> {
    if rn.is_empty() || rn.contains('/') || rn == "la" || rn == "ol" || rn == "fopt" {
        return Err(ResourceError::BadRequest(format!("invalid resource name {rn:?}")));
    }
    Ok(())
}

fn check_parent_kind(parent: ResourceType, child: ResourceType) -> Result<()> {
    use ResourceType::*;
    let ok = match child {
        Ae => parent == CseBase,
        Container => matches!(parent, Ae | Container),
        AccessControlPolicy => matches!(parent, CseBase | Ae),
        Group => matches!(parent, CseBase | Ae),
        Subscription => parent == Container,
        ContentInstance | CseBase => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ResourceError::BadRequest(format!(
            "a {child:?} cannot be created under a {parent:?}"
        )))
    }
}
