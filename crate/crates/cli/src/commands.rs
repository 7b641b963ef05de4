//! What each verb does. Every command yields an [`Output`]; API errors come
//! back with the service's body untouched.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use citylab_exchange::catalogue::{DEFAULT_PROVIDER, DEFAULT_SERVER};
use citylab_exchange::{Catalogue, Signer, TokenService};
use citylab_ingest::charger::{run_scenario, Scenario};
use citylab_ingest::sim::{builtin_profile, ground_truth, write_log};
use citylab_ingest::{decode_pdu, encode_pdu, simulate, EnergyReading, FaultPlan, PlatformClient, SimProfile, LAYOUT};
use citylab_lake::{Lake, LakeConfig};
use citylab_monitor::{HttpTransport, Transport};
use citylab_quality::pipeline::{ASSESSED_FILE, DEAD_LETTER_FILE};
use citylab_quality::{report, AssessedStore};
use citylab_resource::{ManualClock, SystemClock};
use serde_json::{json, Value};

use crate::campus::{self, Site, CSE};
use crate::cli::*;
use crate::config::Config;
use crate::seed;
use crate::serve;
use crate::stack::Stack;

/// Marks errors caused by configuration or arguments rather than by the
/// platform; they exit with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub struct Output {
    pub value: Value,
    pub text: String,
    /// False when a service answered with an error.
    pub ok: bool,
}

impl Output {
    fn ok(value: Value, text: impl Into<String>) -> Self {
        Self { value, text: text.into(), ok: true }
    }

    /// The body as the service sent it, pretty-printed in both modes.
    fn reply(status: u16, body: Value) -> Self {
        let text = serde_json::to_string_pretty(&body).unwrap_or_default();
        Self {
            value: body,
            text,
            ok: (200..300).contains(&status),
        }
    }
}

pub fn parse_time(s: &str) -> anyhow::Result<i64> {
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|_| usage(format!("{s:?} is neither epoch seconds nor RFC 3339")))
}

fn parse_duration(s: &str) -> anyhow::Result<i64> {
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    humantime::parse_duration(s)
        .map(|d| d.as_secs() as i64)
        .map_err(|e| usage(format!("duration {s:?}: {e}")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{what} {}: {e}", path.display())))
}

fn http() -> anyhow::Result<reqwest::Client> {
    Ok(reqwest::Client::builder().timeout(Duration::from_secs(30)).build()?)
}

async fn into_output(resp: reqwest::Response) -> anyhow::Result<Output> {
    let status = resp.status().as_u16();
    let bytes = resp.bytes().await?;
    let body = match serde_json::from_slice(&bytes) {
        Ok(v) => v,
        Err(_) if bytes.is_empty() => Value::Null,
        Err(_) => Value::String(String::from_utf8_lossy(&bytes).into_owned()),
    };
    Ok(Output::reply(status, body))
}

fn remote(url: &str, origin: &str) -> anyhow::Result<PlatformClient> {
    let t = HttpTransport::new(url, Duration::from_secs(30)).map_err(|e| anyhow!("{url}: {e}"))?;
    Ok(PlatformClient::new(Arc::new(t), origin))
}

fn local(stack: &Stack) -> PlatformClient {
    let t: Arc<dyn Transport> = stack.monitor.clone();
    PlatformClient::new(t, stack.config().origin.clone())
}

pub async fn run(cli: Cli) -> anyhow::Result<Output> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(d) = cli.data_dir {
        cfg.data_dir = d;
    }
    match cli.command {
        Command::Serve(a) => serve_cmd(cfg, a).await,
        Command::Seed(a) => seed_cmd(&cfg, a).await,
        Command::DecodePdu(a) => decode_cmd(a),
        Command::EncodePdu(a) => encode_cmd(a),
        Command::Simulate(a) => simulate_cmd(&cfg, a).await,
        Command::Report(a) => report_cmd(&cfg, a).await,
        Command::Query(q) => query_cmd(&cfg, q).await,
        Command::Token(t) => token_cmd(&cfg, t).await,
        Command::Lake(l) => lake_cmd(&cfg, l).await,
        Command::Charger(ChargerCommand::Run { scenario, url }) => charger_cmd(&cfg, &scenario, url).await,
    }
}

/// Config problems found before anything is opened exit as usage errors.
fn preflight(cfg: &Config) -> anyhow::Result<()> {
    cfg.check().map_err(|e| usage(e.to_string()))?;
    cfg.signing_secret().map_err(|e| usage(e.to_string()))?;
    Ok(())
}

async fn serve_cmd(mut cfg: Config, a: ServeArgs) -> anyhow::Result<Output> {
    for (slot, v) in [
        (&mut cfg.monitor_addr, a.monitor_addr),
        (&mut cfg.lake_addr, a.lake_addr),
        (&mut cfg.exchange_addr, a.exchange_addr),
        (&mut cfg.quality_addr, a.quality_addr),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    preflight(&cfg)?;
    let running = serve::start(&cfg, Arc::new(SystemClock)).await?;
    let addrs = running.addrs;
    eprintln!(
        "monitor http://{}  lake http://{}  exchange http://{}  quality http://{}",
        addrs.monitor, addrs.lake, addrs.exchange, addrs.quality
    );
    let seeded = if a.seed {
        let s = seed::seed_tree(&local(&running.stack), true).await?;
        eprintln!("seeded: {} created, {} already present", s.created, s.existing);
        Some(s)
    } else {
        None
    };
    serve::shutdown_signal().await;
    eprintln!("shutting down");
    running.stop().await?;
    Ok(Output::ok(json!({"addrs": addrs, "seed": seeded}), "stopped"))
}

async fn seed_cmd(cfg: &Config, a: SeedArgs) -> anyhow::Result<Output> {
    let s = match &a.url {
        Some(url) => seed::seed_tree(&remote(url, &cfg.origin)?, !a.no_demo_data).await?,
        None => {
            preflight(cfg)?;
            let stack = Stack::open(cfg, Arc::new(SystemClock))?;
            let s = seed::seed_tree(&local(&stack), !a.no_demo_data).await?;
            stack.shutdown(Duration::from_secs(60)).await?;
            s
        }
    };
    let text = format!(
        "{} resources created, {} already present, {} descriptors posted, {} demo readings",
        s.created, s.existing, s.descriptors, s.demo_points
    );
    Ok(Output::ok(serde_json::to_value(&s)?, text))
}

fn lines_of(arg: Option<String>, file: Option<PathBuf>, what: &str) -> anyhow::Result<Vec<String>> {
    match (arg, file) {
        (Some(a), _) => Ok(vec![a]),
        (None, Some(f)) => {
            let text = std::fs::read_to_string(&f).map_err(|e| usage(format!("{}: {e}", f.display())))?;
            Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect())
        }
        (None, None) => Err(usage(format!("give a {what} or --file"))),
    }
}

fn reading_text(r: &EnergyReading) -> String {
    let mut s = String::new();
    for (f, (name, v)) in LAYOUT.iter().zip(r.named()) {
        let _ = writeln!(s, "{name:<22} {v} {}", f.unit);
    }
    s
}

fn decode_cmd(a: DecodeArgs) -> anyhow::Result<Output> {
    let single = a.hex.is_some();
    let mut values = Vec::new();
    let mut text = String::new();
    for (i, hex) in lines_of(a.hex, a.file, "payload")?.iter().enumerate() {
        let r = decode_pdu(hex).map_err(|e| usage(format!("payload {}: {e}", i + 1)))?;
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&reading_text(&r));
        values.push(serde_json::to_value(r)?);
    }
    let value = match single {
        true => values.pop().unwrap_or(Value::Null),
        false => Value::Array(values),
    };
    Ok(Output::ok(value, text.trim_end().to_owned()))
}

fn encode_cmd(a: EncodeArgs) -> anyhow::Result<Output> {
    let mut out = Vec::new();
    for (i, line) in lines_of(a.reading, a.file, "reading")?.iter().enumerate() {
        let r: EnergyReading = serde_json::from_str(line).map_err(|e| usage(format!("reading {}: {e}", i + 1)))?;
        out.push(encode_pdu(&r).map_err(|e| usage(format!("reading {}: {e}", i + 1)))?);
    }
    let text = out.join("\n");
    let value = match out.len() {
        1 => json!(out[0]),
        _ => json!(out),
    };
    Ok(Output::ok(value, text))
}

/// Built-in name, campus node, or a JSON file.
fn resolve_profile(cfg: &Config, name: &str) -> anyhow::Result<(SimProfile, Option<Site>)> {
    if let Some(site) = campus::site_of(name) {
        return Ok((site.profile.clone(), Some(site)));
    }
    if let Some(p) = builtin_profile(name) {
        let site = campus::site_of(&p.node);
        return Ok((p, site));
    }
    let path = Path::new(name);
    if path.exists() {
        return Ok((read_json(path, "profile")?, None));
    }
    for p in &cfg.profiles {
        let prof: SimProfile = read_json(p, "profile")?;
        if prof.node == name {
            return Ok((prof, None));
        }
    }
    Err(usage(format!("no profile {name:?}: try aq, wm, we, em, a campus node or a JSON file")))
}

fn resolve_faults(s: &str) -> anyhow::Result<FaultPlan> {
    match s {
        "none" => Ok(FaultPlan::none()),
        "typical" => Ok(FaultPlan::typical()),
        "aq-day" => Ok(FaultPlan::aq_day()),
        path => read_json(Path::new(path), "fault plan"),
    }
}

/// 2022-03-05T00:00:00+05:30, so runs without `--start` are reproducible.
const DEFAULT_SIM_START: i64 = 1_646_418_600;

async fn simulate_cmd(cfg: &Config, a: SimulateArgs) -> anyhow::Result<Output> {
    let (mut profile, site) = resolve_profile(cfg, &a.profile)?;
    let mut site = site;
    if let Some(node) = &a.node {
        profile.node = node.clone();
        site = None;
    }
    if let Some(f) = &a.faults {
        profile.faults = resolve_faults(f)?;
    }
    profile.validate().map_err(|e| usage(e.to_string()))?;
    let site = site.unwrap_or_else(|| Site {
        path: format!("{CSE}/{}/{}", profile.ae, profile.node),
        profile: profile.clone(),
        group: None,
        label: profile.node.clone(),
    });
    let site = Site { profile: profile.clone(), ..site };
    let duration = parse_duration(&a.duration)?;
    let start = a.start.as_deref().map(parse_time).transpose()?.unwrap_or(DEFAULT_SIM_START);
    let seed = a.seed.unwrap_or(cfg.seed);

    let records = simulate(&profile, start, duration, seed).map_err(|e| usage(e.to_string()))?;
    let truth = ground_truth(&profile, profile.slots(duration), &records);
    let log = a
        .log
        .clone()
        .unwrap_or_else(|| cfg.data_dir.join("sim").join(format!("{}-{seed}.jsonl", profile.node)));
    if let Some(dir) = log.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_log(&log, &records).with_context(|| format!("writing {}", log.display()))?;
    let truth_path = log.with_extension("truth.json");
    std::fs::write(&truth_path, serde_json::to_vec_pretty(&truth)?)?;

    let mut posted = 0usize;
    let began = Instant::now();
    if !a.dry_run {
        let labels = profile.labels();
        let data = site.data_path();
        match &a.url {
            Some(url) => {
                let client = remote(url, &cfg.origin)?;
                seed::ensure_node(&client, &site).await?;
                for r in &records {
                    client.post_cin(&data, &r.con(), &labels).await?;
                    posted += 1;
                }
            }
            None => {
                preflight(cfg)?;
                // the platform clock follows the run so every reception is
                // recorded at the simulated time
                let clock = ManualClock::at_epoch(start);
                let stack = Stack::open(cfg, Arc::new(clock.clone()))?;
                let client = local(&stack);
                seed::ensure_node(&client, &site).await?;
                for r in &records {
                    clock.set(citylab_resource::clock::epoch_to_utc(r.recorded_at).ok_or_else(|| anyhow!("bad time {}", r.recorded_at))?);
                    client.post_cin(&data, &r.con(), &labels).await?;
                    posted += 1;
                }
                stack.shutdown(Duration::from_secs(300)).await?;
            }
        }
    }
    let value = json!({
        "node": profile.node,
        "start": start,
        "duration": duration,
        "seed": seed,
        "slots": truth.slots,
        "emitted": truth.emitted,
        "posted": posted,
        "log": log,
        "truth": truth_path,
        "distribution": truth.distribution,
    });
    let text = format!(
        "{}: {} slots, {} transmissions generated, {} posted in {:.1}s\nlog {}\nground truth {}",
        profile.node,
        truth.slots,
        truth.emitted,
        posted,
        began.elapsed().as_secs_f64(),
        log.display(),
        truth_path.display()
    );
    Ok(Output::ok(value, text))
}

async fn report_cmd(cfg: &Config, a: ReportArgs) -> anyhow::Result<Output> {
    let (start, end) = (parse_time(&a.start)?, parse_time(&a.end)?);
    if a.bin <= 0 {
        return Err(usage("--bin must be positive"));
    }
    match &a.url {
        Some(url) => {
            let resp = http()?
                .get(format!("{}/report", url.trim_end_matches('/')))
                .query(&[("node", a.node.clone()), ("start", start.to_string()), ("end", end.to_string()), ("bin", a.bin.to_string())])
                .send()
                .await?;
            let mut out = into_output(resp).await?;
            if out.ok {
                if let Ok(r) = serde_json::from_value::<citylab_quality::QualityReport>(out.value.clone()) {
                    out.text = r.to_text();
                }
            }
            Ok(out)
        }
        None => {
            let store = AssessedStore::open(&cfg.quality_dir().join(ASSESSED_FILE))?;
            match report(&store, &a.node, start, end, a.bin) {
                Ok(r) => Ok(Output::ok(serde_json::to_value(&r)?, r.to_text())),
                Err(e) => Ok(Output {
                    value: json!({"error": e.to_string()}),
                    text: e.to_string(),
                    ok: false,
                }),
            }
        }
    }
}

async fn exchange_get(cfg: &Config, target: &ExchangeTarget, path: &str, query: &[(&str, String)]) -> anyhow::Result<Output> {
    let base = target.url.clone().unwrap_or_else(|| cfg.exchange_url());
    let mut req = http()?.get(format!("{}{path}", base.trim_end_matches('/'))).query(query);
    if let Some(t) = &target.token {
        req = req.header("token", t);
    }
    into_output(req.send().await?).await
}

/// Full catalogue id for a bare campus node or group name.
fn item_id(id: String) -> String {
    if id.contains('/') {
        return id;
    }
    if let Some(group) = campus::site_of(&id).and_then(|s| s.group) {
        return format!("{}/{id}", default_catalogue().group_id(group));
    }
    let gid = default_catalogue().group_id(&id);
    match campus::catalogue().lookup(&gid) {
        Ok(_) => gid,
        Err(_) => id,
    }
}

async fn query_cmd(cfg: &Config, q: QueryCommand) -> anyhow::Result<Output> {
    let q = match q {
        QueryCommand::Latest { id, target } => QueryCommand::Latest { id: item_id(id), target },
        QueryCommand::Meta { id, target } => QueryCommand::Meta { id: item_id(id), target },
        QueryCommand::Catalogue { id, target } => QueryCommand::Catalogue { id: item_id(id), target },
        QueryCommand::Temporal { id, timerel, time, end_time, attrs, q, offset, target } => {
            QueryCommand::Temporal { id: item_id(id), timerel, time, end_time, attrs, q, offset, target }
        }
        other => other,
    };
    match q {
        QueryCommand::Latest { id, target } => exchange_get(cfg, &target, "/entities/latest", &[("id", id)]).await,
        QueryCommand::Meta { id, target } => exchange_get(cfg, &target, "/meta", &[("id", id)]).await,
        QueryCommand::Catalogue { id, target } => exchange_get(cfg, &target, "/catalogue", &[("id", id)]).await,
        QueryCommand::Temporal {
            id,
            timerel,
            time,
            end_time,
            attrs,
            q,
            offset,
            target,
        } => {
            let mut params = vec![("id", id), ("timerel", timerel), ("time", time)];
            params.extend(end_time.map(|v| ("endTime", v)));
            params.extend(attrs.map(|v| ("attrs", v)));
            params.extend(q.map(|v| ("q", v)));
            params.extend(offset.map(|v| ("offset", v.to_string())));
            exchange_get(cfg, &target, "/temporal/entities", &params).await
        }
        QueryCommand::Discover { labels, origin, url } => {
            let url = url.unwrap_or_else(|| cfg.monitor_url());
            let client = remote(&url, origin.as_deref().unwrap_or(&cfg.origin))?;
            let mut u = reqwest::Url::parse("http://monitor/in-cse")?;
            u.query_pairs_mut().append_pair("fu", "1");
            for l in &labels {
                u.query_pairs_mut().append_pair("lbl", l);
            }
            let uri = format!("{}?{}", u.path(), u.query().unwrap_or_default());
            let resp = client.get(&uri).await?;
            let body = resp.body.unwrap_or(Value::Null);
            let mut out = Output::reply(resp.status, body);
            if out.ok {
                if let Some(paths) = out.value.get("m2m:uril").and_then(Value::as_array) {
                    out.text = paths.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("\n");
                }
            }
            Ok(out)
        }
    }
}

fn default_catalogue() -> Catalogue {
    Catalogue::new(DEFAULT_PROVIDER, DEFAULT_SERVER)
}

async fn token_cmd(cfg: &Config, t: TokenCommand) -> anyhow::Result<Output> {
    match t {
        TokenCommand::Issue {
            user,
            secret,
            group,
            role,
            url,
        } => {
            let cat = default_catalogue();
            let body = match group {
                Some(g) if g.contains('/') => json!({"itemId": g, "itemType": "resource_group", "role": role}),
                Some(g) => json!({"itemId": cat.group_id(&g), "itemType": "resource_group", "role": role}),
                None => json!({"itemId": cat.server(), "itemType": "resource_server", "role": role}),
            };
            let base = url.unwrap_or_else(|| cfg.exchange_url());
            let resp = http()?
                .post(format!("{}/token", base.trim_end_matches('/')))
                .header("clientId", user)
                .header("clientSecret", secret)
                .json(&body)
                .send()
                .await?;
            let mut out = into_output(resp).await?;
            if out.ok {
                if let Some(tok) = out.value.pointer("/results/accessToken").and_then(Value::as_str) {
                    out.text = tok.to_owned();
                }
            }
            Ok(out)
        }
        TokenCommand::Revoke { user, url } => {
            let secret = cfg.signing_secret().map_err(|e| usage(e.to_string()))?;
            let auth = TokenService::new(Signer::hs256(&secret)?, Arc::new(default_catalogue()), Arc::new(SystemClock));
            let request = auth.revocation_request(&user);
            let base = url.unwrap_or_else(|| cfg.exchange_url());
            let resp = http()?
                .post(format!("{}/revoke", base.trim_end_matches('/')))
                .header("token", request)
                .send()
                .await?;
            into_output(resp).await
        }
    }
}

fn lake_config(cfg: &Config, dir: PathBuf) -> LakeConfig {
    let mut l = LakeConfig::new(dir);
    l.tenancy = cfg.tenancy;
    l.durability = cfg.durability;
    l
}

fn idle(lake: &Lake) -> anyhow::Result<()> {
    if !lake.wait_idle(Duration::from_secs(600)) {
        return Err(anyhow!("lake did not finish applying the journal"));
    }
    Ok(())
}

async fn lake_cmd(cfg: &Config, l: LakeCommand) -> anyhow::Result<Output> {
    match l {
        LakeCommand::Replay { journal, verify } => {
            let cfg = cfg.clone();
            tokio::task::spawn_blocking(move || replay(&cfg, journal, verify)).await?
        }
        LakeCommand::DeadLetters => {
            let lake = citylab_lake::read_dead_letters(&cfg.lake_dir().join(citylab_lake::intake::DEAD_LETTERS)).unwrap_or_default();
            let notify = citylab_monitor::dispatch::read_dead_letters(&cfg.dispatch_dead_letters()).unwrap_or_default();
            let quality: Vec<Value> = std::fs::read_to_string(cfg.quality_dir().join(DEAD_LETTER_FILE))
                .unwrap_or_default()
                .lines()
                .filter_map(|l| serde_json::from_str(l).ok())
                .collect();
            let text = format!(
                "lake {}  dispatcher {}  quality {}",
                lake.len(),
                notify.len(),
                quality.len()
            );
            Ok(Output::ok(json!({"lake": lake, "dispatcher": notify, "quality": quality}), text))
        }
    }
}

fn replay(cfg: &Config, journal: Option<PathBuf>, verify: bool) -> anyhow::Result<Output> {
    let lake = Lake::open(lake_config(cfg, cfg.lake_dir())).context("opening data lake")?;
    let replayed = match &journal {
        Some(j) => lake.replay_journal(j)?,
        None => 0,
    };
    idle(&lake)?;
    let mut tenants = serde_json::Map::new();
    let mut total = 0;
    for t in lake.tenants() {
        let rows = lake.store(&t).map(|s| s.len()).unwrap_or(0);
        total += rows;
        tenants.insert(t, json!(rows));
    }
    let mut value = json!({"replayed": replayed, "stats": lake.stats(), "tenants": tenants});
    let mut text = format!("{replayed} journal entries replayed, {total} rows in {} tenants", tenants.len());
    if verify {
        let scratch = cfg.data_dir.join("replay-check");
        let _ = std::fs::remove_dir_all(&scratch);
        let fresh = Lake::open(lake_config(cfg, scratch.clone()))?;
        fresh.replay_journal(&lake.journal_path())?;
        idle(&fresh)?;
        let mut mismatched = Vec::new();
        for t in lake.tenants() {
            let a = lake.store(&t).map(|s| s.export()).unwrap_or_default();
            let b = fresh.store(&t).map(|s| s.export()).unwrap_or_default();
            if a != b {
                mismatched.push(t);
            }
        }
        drop(fresh);
        let _ = std::fs::remove_dir_all(&scratch);
        let _ = write!(
            text,
            "\nrebuild from journal: {}",
            if mismatched.is_empty() { "identical".to_owned() } else { format!("differs for {}", mismatched.join(", ")) }
        );
        value["identical"] = json!(mismatched.is_empty());
        value["mismatched"] = json!(mismatched);
        if !mismatched.is_empty() {
            return Ok(Output { value, text, ok: false });
        }
    }
    Ok(Output::ok(value, text))
}

async fn charger_cmd(cfg: &Config, path: &Path, url: Option<String>) -> anyhow::Result<Output> {
    let raw: Value = read_json(path, "scenario")?;
    let mut sc: Scenario = serde_json::from_value(raw.clone()).map_err(|e| usage(format!("scenario {}: {e}", path.display())))?;
    if raw.get("tariff").is_none() {
        sc.tariff = cfg.tariff.clone();
    }
    let outcomes = match url {
        Some(url) => run_scenario(&sc, remote(&url, &cfg.origin)?, Arc::new(SystemClock)).await?,
        None => {
            preflight(cfg)?;
            let stack = Stack::open(cfg, Arc::new(SystemClock))?;
            let out = run_scenario(&sc, local(&stack), Arc::new(SystemClock)).await;
            stack.shutdown(Duration::from_secs(60)).await?;
            out?
        }
    };
    let mut text = String::new();
    for o in &outcomes {
        let _ = write!(text, "{}: {}", o.rfid, o.message);
        if let Some(d) = o.deducted {
            let _ = write!(text, ", deducted {}", d.as_rupees());
        }
        if let Some(b) = o.balance_after {
            let _ = write!(text, ", balance {}", b.as_rupees());
        }
        text.push('\n');
    }
    Ok(Output::ok(serde_json::to_value(&outcomes)?, text.trim_end().to_owned()))
}
