//! Monitor, lake, exchange and quality pipeline wired together in one
//! process. New content instances reach the lake and the pipeline through
//! the monitor's own subscriptions, delivered to in-process receivers.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use async_trait::async_trait;
use citylab_exchange::{Catalogue, Exchange, ExchangeConfig, ResourceServer, Revocations, Signer, TokenService, Verifier};
use citylab_lake::{route_vertical, DescriptorResolver, Lake, LakeConfig};
use citylab_monitor::{DispatchConfig, Dispatcher, Monitor, NotificationSink};
use citylab_quality::{FactorTable, KnowledgeBase, Pipeline};
use citylab_resource::{Clock, DescriptorRecord, ResourceTree, TreeConfig};
use serde_json::Value;

use crate::campus;
use crate::config::Config;

/// Hands notifications to the lake off the async workers, since the lake
/// journals synchronously.
struct LakeSink(Lake);

#[async_trait]
impl NotificationSink for LakeSink {
    async fn deliver(&self, body: &Value) -> Result<u16, String> {
        let lake = self.0.clone();
        let body = body.clone();
        match tokio::task::spawn_blocking(move || lake.receive_value(body)).await {
            Ok(Ok(_)) => Ok(200),
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(e.to_string()),
        }
    }
}

/// Reads a node's descriptor from the `Descriptor` container next to the
/// `Data` container a notification came from.
pub struct TreeResolver {
    tree: Arc<ResourceTree>,
}

impl TreeResolver {
    pub fn new(tree: Arc<ResourceTree>) -> Self {
        Self { tree }
    }
}

impl DescriptorResolver for TreeResolver {
    fn resolve(&self, node: &str, sur: &str) -> Option<(String, DescriptorRecord)> {
        let idx = sur.find("/Data")?;
        let node_path = &sur[..idx];
        if !node_path.ends_with(&format!("/{node}")) {
            return None;
        }
        let ae = node_path.split('/').find(|s| s.starts_with("AE-"))?;
        let vertical = route_vertical(&[ae.to_owned()]).ok()?;
        let admin = self.tree.config().admin_originator.clone();
        let cin = self.tree.latest(&format!("{node_path}/Descriptor"), &admin).ok()?;
        let desc = DescriptorRecord::from_content(&cin.con).ok()?;
        Some((vertical, desc))
    }
}

fn load_json<T, F>(path: &Path, load: F) -> anyhow::Result<Option<T>>
where
    F: FnOnce(&Value) -> anyhow::Result<T>,
{
    if !path.exists() {
        return Ok(None);
    }
    let v: Value = serde_json::from_slice(&std::fs::read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    load(&v).map(Some)
}

fn write_json(path: &Path, v: &Value) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(v)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub struct Stack {
    pub tree: Arc<ResourceTree>,
    pub monitor: Arc<Monitor>,
    pub lake: Lake,
    pub pipeline: Arc<Pipeline>,
    pub dispatcher: Dispatcher,
    pub exchange: Arc<Exchange>,
    cfg: Config,
}

impl Stack {
    /// Opens every store under the data directory. Must run inside a tokio
    /// runtime, which hosts the delivery workers.
    pub fn open(cfg: &Config, clock: Arc<dyn Clock>) -> anyhow::Result<Self> {
        cfg.check()?;
        let secret = cfg.signing_secret()?;
        std::fs::create_dir_all(&cfg.data_dir).with_context(|| format!("creating {}", cfg.data_dir.display()))?;

        let tree = Arc::new(ResourceTree::open(cfg.tree_dir(), TreeConfig::default(), clock.clone()).context("opening resource tree")?);
        let monitor = Arc::new(Monitor::new(tree.clone()));

        let mut lcfg = LakeConfig::new(cfg.lake_dir());
        lcfg.tenancy = cfg.tenancy;
        lcfg.durability = cfg.durability;
        let lake = Lake::open(lcfg).context("opening data lake")?;
        lake.set_resolver(Arc::new(TreeResolver::new(tree.clone())));

        let kb = match cfg.kb_path().exists() {
            true => KnowledgeBase::load(&cfg.kb_path()).context("loading knowledge base")?,
            false => campus::knowledge_base(),
        };
        let factors = match cfg.factors_path().exists() {
            true => FactorTable::load(&cfg.factors_path()).context("loading quality factors")?,
            false => campus::factors(),
        };
        let pipeline = Arc::new(Pipeline::open(&cfg.quality_dir(), kb, factors).context("opening quality store")?);

        let dispatcher = Dispatcher::new(
            DispatchConfig {
                dead_letter: Some(cfg.dispatch_dead_letters()),
                ..DispatchConfig::default()
            },
            tokio::runtime::Handle::current(),
        )?;
        dispatcher.register_local("lake", Arc::new(LakeSink(lake.clone())));
        dispatcher.register_local("quality", pipeline.clone());
        tree.add_listener(Arc::new(dispatcher.clone()));

        let catalogue = Catalogue::new(citylab_exchange::catalogue::DEFAULT_PROVIDER, citylab_exchange::catalogue::DEFAULT_SERVER);
        let catalogue = match load_json(&cfg.catalogue_path(), |v| {
            catalogue.load_json(v)?;
            Ok(())
        })? {
            Some(()) => catalogue,
            None => campus::catalogue(),
        };
        let catalogue = Arc::new(catalogue);
        let signer = Signer::hs256(&secret)?;
        let verifier = Verifier::new(signer.clone(), catalogue.server(), Revocations::open(&cfg.revocations_path())?);
        let rs = ResourceServer::new(ExchangeConfig::default(), catalogue.clone(), verifier, lake.clone(), monitor.clone(), clock.clone());
        let auth = TokenService::new(signer, catalogue, clock);
        if load_json(&cfg.users_path(), |v| Ok(auth.load_json(v)?))?.is_none() {
            campus::register_demo_users(&auth);
        }

        Ok(Self {
            tree,
            monitor,
            lake,
            pipeline,
            dispatcher,
            exchange: Arc::new(Exchange { rs, auth }),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    /// Waits for queued notifications to reach the lake and the pipeline
    /// and for the lake to apply them.
    pub async fn settle(&self, timeout: Duration) -> bool {
        let delivered = self.dispatcher.wait_idle(timeout).await;
        let lake = self.lake.clone();
        let applied = tokio::task::spawn_blocking(move || lake.wait_idle(timeout)).await.unwrap_or(false);
        delivered && applied
    }

    /// Writes the catalogue, user registry and knowledge base next to the stores.
    pub fn save_state(&self) -> anyhow::Result<()> {
        write_json(&self.cfg.catalogue_path(), &self.exchange.rs.catalogue().to_json())?;
        write_json(&self.cfg.users_path(), &self.exchange.auth.to_json())?;
        self.pipeline.kb().save(&self.cfg.kb_path())?;
        if !self.cfg.factors_path().exists() {
            campus::factors().save(&self.cfg.factors_path())?;
        }
        Ok(())
    }

    /// Drains deliveries and makes the tree durable.
    pub async fn shutdown(&self, timeout: Duration) -> anyhow::Result<()> {
        if !self.settle(timeout).await {
            tracing::warn!("shutting down with notifications still queued; the journals keep them");
        }
        self.tree.snapshot().context("snapshotting resource tree")?;
        self.save_state()
    }
}
