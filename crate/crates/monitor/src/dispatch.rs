//! Subscription delivery.
//!
//! New instances are queued from inside the insert path without blocking;
//! one worker per (subscription, notification URI) drains its queue in
//! order, retrying failed deliveries with backoff and dead-lettering
//! notifications that never get acknowledged. Delivery is at-least-once.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use citylab_resource::{Attributes, CinEvent, CinListener, ContentInstance};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, Notify};

pub const LOCAL_SCHEME: &str = "local://";

#[derive(Debug, Clone)]
pub struct DispatchConfig {
    /// Attempts after the first one.
    pub retries: u32,
    /// Wait before retry i; the last entry repeats.
    pub backoff: Vec<Duration>,
    /// A 2xx must arrive within this long.
    pub ack_timeout: Duration,
    pub dead_letter: Option<PathBuf>,
    pub origin: String,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff: vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)],
            ack_timeout: Duration::from_secs(5),
            dead_letter: None,
            origin: "/in-cse".into(),
        }
    }
}

/// Receiver of notifications inside the same process, addressed as
/// `local://<name>`.
#[async_trait]
pub trait NotificationSink: Send + Sync {
    /// Returns the status the receiver answered with.
    async fn deliver(&self, body: &Value) -> Result<u16, String>;
}

/// `{"m2m:sgn": {"nev": {"rep": {"m2m:cin": ...}, "net": 3}, "sur": ...}}`
pub fn notification_body(subscription_path: &str, cin: &ContentInstance) -> Value {
    json!({
        "m2m:sgn": {
            "nev": { "rep": { "m2m:cin": cin }, "net": 3 },
            "sur": subscription_path,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub subscription: String,
    pub nu: String,
    pub attempts: u32,
    pub error: String,
    pub notification: Value,
}

pub fn read_dead_letters(path: &Path) -> std::io::Result<Vec<DeadLetter>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if let Ok(d) = serde_json::from_str(&line) {
            out.push(d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub subscription: String,
    pub nu: String,
    pub cin: String,
    pub delivered: bool,
    pub attempts: u32,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct DispatchStats {
    pub queued: u64,
    pub delivered: u64,
    pub dead_lettered: u64,
    pub attempts: u64,
}

struct Job {
    subscription: String,
    cin: String,
    body: Value,
}

const OUTCOME_CAP: usize = 100_000;

struct Inner {
    cfg: DispatchConfig,
    runtime: tokio::runtime::Handle,
    queues: Mutex<HashMap<(String, String), mpsc::UnboundedSender<Job>>>,
    local: RwLock<HashMap<String, Arc<dyn NotificationSink>>>,
    http: reqwest::Client,
    dead: Mutex<Option<File>>,
    outcomes: Mutex<VecDeque<Outcome>>,
    queued: AtomicU64,
    delivered: AtomicU64,
    dead_lettered: AtomicU64,
    attempts: AtomicU64,
    pending: AtomicUsize,
    idle: Notify,
}

#[derive(Clone)]
pub struct Dispatcher {
    inner: Arc<Inner>,
}

impl Dispatcher {
    /// Workers are spawned on `runtime`.
    pub fn new(cfg: DispatchConfig, runtime: tokio::runtime::Handle) -> std::io::Result<Self> {
        let dead = match &cfg.dead_letter {
            Some(p) => {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                Some(OpenOptions::new().create(true).append(true).open(p)?)
            }
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(cfg.ack_timeout)
            .build()
            .map_err(std::io::Error::other)?;
        Ok(Self {
            inner: Arc::new(Inner {
                cfg,
                runtime,
                queues: Mutex::new(HashMap::new()),
                local: RwLock::new(HashMap::new()),
                http,
                dead: Mutex::new(dead),
                outcomes: Mutex::new(VecDeque::new()),
                queued: AtomicU64::new(0),
                delivered: AtomicU64::new(0),
                dead_lettered: AtomicU64::new(0),
                attempts: AtomicU64::new(0),
                pending: AtomicUsize::new(0),
                idle: Notify::new(),
            }),
        })
    }

    pub fn register_local(&self, name: &str, sink: Arc<dyn NotificationSink>) {
        self.inner.local.write().insert(name.to_owned(), sink);
    }

    pub fn stats(&self) -> DispatchStats {
        let i = &self.inner;
        DispatchStats {
            queued: i.queued.load(Ordering::SeqCst),
            delivered: i.delivered.load(Ordering::SeqCst),
            dead_lettered: i.dead_lettered.load(Ordering::SeqCst),
            attempts: i.attempts.load(Ordering::SeqCst),
        }
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.inner.outcomes.lock().iter().cloned().collect()
    }

    pub fn pending(&self) -> usize {
        self.inner.pending.load(Ordering::SeqCst)
    }

    /// Waits until every queued notification was delivered or
    /// dead-lettered. Returns false on timeout.
    pub async fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let notified = self.inner.idle.notified();
            if self.pending() == 0 {
                return true;
            }
            if tokio::time::timeout_at(deadline, notified).await.is_err() {
                return self.pending() == 0;
            }
        }
    }

    /// Queues one notification. Never blocks.
    pub fn enqueue(&self, subscription: &str, nu: &str, cin: &ContentInstance) {
        let job = Job {
            subscription: subscription.to_owned(),
            cin: cin.ri.clone(),
            body: notification_body(subscription, cin),
        };
        let key = (subscription.to_owned(), nu.to_owned());
        self.inner.pending.fetch_add(1, Ordering::SeqCst);
        self.inner.queued.fetch_add(1, Ordering::SeqCst);
        let mut queues = self.inner.queues.lock();
        let tx = queues.entry(key).or_insert_with(|| {
            let (tx, rx) = mpsc::unbounded_channel();
            let inner = self.inner.clone();
            let nu = nu.to_owned();
            self.inner.runtime.spawn(worker(inner, nu, rx));
            tx
        });
        if tx.send(job).is_err() {
            tracing::error!(subscription, nu, "delivery worker gone");
            self.inner.pending.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

impl CinListener for Dispatcher {
    fn on_cin(&self, event: &CinEvent) {
        for sub in &event.subscriptions {
            if let Attributes::Subscription { nu, .. } = &sub.attrs {
                for target in nu {
                    self.enqueue(&sub.path, target, &event.cin);
                }
            }
        }
    }
}

async fn attempt(inner: &Inner, nu: &str, body: &Value) -> Result<(), String> {
    let status = if let Some(name) = nu.strip_prefix(LOCAL_SCHEME) {
        let sink = inner
            .local
            .read()
            .get(name)
            .cloned()
            .ok_or_else(|| format!("no local receiver named {name}"))?;
        match tokio::time::timeout(inner.cfg.ack_timeout, sink.deliver(body)).await {
            Ok(r) => r?,
            Err(_) => return Err("ack timeout".into()),
        }
    } else {
        let resp = inner
            .http
            .post(nu)
            .header("X-M2M-Origin", &inner.cfg.origin)
            .header("Content-Type", "application/json")
            .json(body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        resp.status().as_u16()
    };
    if (200..300).contains(&status) {
        Ok(())
    } else {
        Err(format!("receiver answered {status}"))
    }
}

async fn worker(inner: Arc<Inner>, nu: String, mut rx: mpsc::UnboundedReceiver<Job>) {
    while let Some(job) = rx.recv().await {
        let mut tries = 0u32;
        let mut last_err = String::new();
        let delivered = loop {
            tries += 1;
            inner.attempts.fetch_add(1, Ordering::SeqCst);
            match attempt(&inner, &nu, &job.body).await {
                Ok(()) => break true,
                Err(e) => last_err = e,
            }
            if tries > inner.cfg.retries {
                break false;
            }
            let idx = (tries as usize - 1).min(inner.cfg.backoff.len().saturating_sub(1));
            let wait = inner.cfg.backoff.get(idx).copied().unwrap_or_default();
            tokio::time::sleep(wait).await;
        };
        if delivered {
            inner.delivered.fetch_add(1, Ordering::SeqCst);
        } else {
            tracing::warn!(subscription = %job.subscription, nu = %nu, error = %last_err, "dead-lettering notification");
            let dl = DeadLetter {
                subscription: job.subscription.clone(),
                nu: nu.clone(),
                attempts: tries,
                error: last_err,
                notification: job.body,
            };
            if let Some(f) = inner.dead.lock().as_mut() {
                let line = serde_json::to_string(&dl).expect("json");
                if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                    tracing::error!(error = %e, "dead-letter write failed");
                }
            }
            inner.dead_lettered.fetch_add(1, Ordering::SeqCst);
        }
        {
            let mut out = inner.outcomes.lock();
            if out.len() == OUTCOME_CAP {
                out.pop_front();
            }
            out.push_back(Outcome {
                subscription: job.subscription,
                nu: nu.clone(),
                cin: job.cin,
                delivered,
                attempts: tries,
            });
        }
        if inner.pending.fetch_sub(1, Ordering::SeqCst) == 1 {
            inner.idle.notify_waiters();
        }
    }
}
