use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use citylab_lake::{Ack, DescriptorResolver, Lake, LakeConfig, LakeError, Source, Tenancy};
use citylab_resource::descriptor::VersionEntry;
use citylab_resource::{DescriptorRecord, PayloadValue};
use serde_json::{json, Value};

fn desc(node: &str, params: &[&str]) -> DescriptorRecord {
    let mut d = DescriptorRecord::with_parameters(node, params.iter().copied());
    d.versions = vec![
        VersionEntry {
            ver: "V1.0.0".into(),
            dt_start: "01-01-2021 00-00-00".into(),
            dt_end: "01-01-2022 00-00-00".into(),
            sensors: BTreeMap::new(),
            comments: String::new(),
        },
        VersionEntry {
            ver: "V2.0.0".into(),
            dt_start: "01-01-2022 00-00-00".into(),
            dt_end: "31-12-9999 23-59-59".into(),
            sensors: BTreeMap::new(),
            comments: String::new(),
        },
    ];
    d
}

fn notif(ae: &str, node: &str, con: &str, n: u64) -> Value {
    json!({"m2m:sgn": {
        "nev": {"rep": {"m2m:cin": {
            "rn": format!("cin_{n}"), "ty": 4, "ri": format!("/in-cse/cin-{n}"), "pi": "/in-cse/cnt-1",
            "ct": "20220112T000000", "lt": "20220112T000000",
            "lbl": [ae, node, "V2.0.0"], "st": n, "cnf": "text/plain:0", "cs": con.len(), "con": con
        }}, "net": 3},
        "sur": format!("/in-cse/in-name/{ae}/{node}/Data/sub-lake")
    }})
}

fn body(v: &Value) -> Vec<u8> {
    serde_json::to_vec(v).unwrap()
}

/// 2022-01-12T00:00:00Z
const T0: i64 = 1_641_945_600;

fn seeded(dir: &std::path::Path, tenancy: Tenancy) -> Lake {
    let mut cfg = LakeConfig::new(dir);
    cfg.tenancy = tenancy;
    let lake = Lake::open(cfg).unwrap();
    lake.register_node("AQ", &desc("AQ-AN00-00", &["Timestamp", "PM2.5", "PM10"])).unwrap();
    lake.register_node("WM", &desc("WM-WF-PH01-00", &["Timestamp", "Flowrate", "Total Flow"])).unwrap();
    lake.register_node("WE", &desc("WE-GS04-00", &["Timestamp", "Temperature"])).unwrap();
    lake
}

const IDLE: Duration = Duration::from_secs(10);

#[test]
fn rows_land_in_their_vertical_only() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    let src = Source::default();
    let a = lake.receive(&body(&notif("AE-AQ", "AQ-AN00-00", &format!("[{T0}, 31.2, 50]"), 1)), &src).unwrap();
    assert_eq!(a, Ack::Queued { seq: 4, tenant: "AQ".into() });
    lake.receive(&body(&notif("AE-WM-WF", "WM-WF-PH01-00", &format!("[{T0}, 1.5, 200]"), 2)), &src).unwrap();
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.tenants(), vec!["AQ", "WE", "WM"]);
    let rows = lake.query_temporal("AQ", "AQ-AN00-00", T0, T0 + 1, None).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].version, "V2.0.0");
    assert_eq!(rows[0].values["PM2.5"], PayloadValue::Number(31.2));
    assert!(!rows[0].values.contains_key("Timestamp"));
    assert!(matches!(
        lake.query_temporal("AQ", "WM-WF-PH01-00", 0, i64::MAX, None),
        Err(LakeError::UnknownNode(_))
    ));
    assert!(matches!(lake.query_temporal("XX", "AQ-AN00-00", 0, 1, None), Err(LakeError::UnknownTenant(_))));
    assert_eq!(lake.store("WM").unwrap().len(), 1);
    assert_eq!(lake.store("WE").unwrap().len(), 0);
    assert_eq!(lake.locate("WM-WF-PH01-00").as_deref(), Some("WM"));
}

#[test]
fn version_follows_interval() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    // 2021-06-01 is V1; 2022-01-01T00:00 local is the V2 boundary
    let v1 = 1_622_505_600;
    let boundary = 1_640_975_400;
    for (i, t) in [v1, boundary - 1, boundary].into_iter().enumerate() {
        lake.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{t}, 1, 2]"), i as u64)).unwrap();
    }
    assert!(lake.wait_idle(IDLE));
    let rows = lake.query_temporal("AQ", "AQ-AN00-00", 0, i64::MAX, None).unwrap();
    let vers: Vec<&str> = rows.iter().map(|r| r.version.as_str()).collect();
    assert_eq!(vers, ["V1.0.0", "V1.0.0", "V2.0.0"]);
    let store = lake.store("AQ").unwrap();
    let v1_pm = store.param_id("AQ", "V1.0.0", "PM2.5").unwrap();
    let v2_pm = store.param_id("AQ", "V2.0.0", "PM2.5").unwrap();
    assert_ne!(v1_pm, v2_pm);
    assert_eq!(rows[0].params[0], v1_pm);
    assert_eq!(rows[2].params[0], v2_pm);
}

#[test]
fn projection_and_half_open_window() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    for i in 0..10 {
        lake.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{}, {i}, nan]", T0 + i * 10), i as u64)).unwrap();
    }
    assert!(lake.wait_idle(IDLE));
    let attrs = vec!["PM10".to_owned()];
    let rows = lake.query_temporal("AQ", "AQ-AN00-00", T0 + 20, T0 + 50, Some(&attrs)).unwrap();
    assert_eq!(rows.iter().map(|r| r.ts - T0).collect::<Vec<_>>(), [20, 30, 40]);
    assert_eq!(rows[0].values.len(), 1);
    assert_eq!(rows[0].values["PM10"], PayloadValue::Null);
    assert_eq!(rows[0].params.len(), 1);
}

#[test]
fn three_verticals_concurrently_stay_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    let feeds = [("AE-AQ", "AQ-AN00-00", "AQ"), ("AE-WM-WF", "WM-WF-PH01-00", "WM"), ("AE-WE", "WE-GS04-00", "WE")];
    std::thread::scope(|s| {
        for (ae, node, _) in feeds {
            let lake = lake.clone();
            s.spawn(move || {
                for i in 0..300i64 {
                    let con = if node.starts_with("WE") { format!("[{}, {i}]", T0 + i) } else { format!("[{}, {i}, {i}]", T0 + i) };
                    lake.receive_value(notif(ae, node, &con, i as u64)).unwrap();
                }
            });
        }
    });
    assert!(lake.wait_idle(IDLE));
    for (_, node, tenant) in feeds {
        let store = lake.store(tenant).unwrap();
        assert_eq!(store.len(), 300);
        assert!(store.all_rows().iter().all(|r| r.node == node && r.vertical == tenant));
    }
    assert_eq!(lake.stats().stored, 900);
}

#[test]
fn journal_replay_rebuilds_identical_store() {
    let live_dir = tempfile::tempdir().unwrap();
    let live = seeded(live_dir.path(), Tenancy::PerVertical);
    let mut sent = 0;
    for i in 0..50i64 {
        // every fifth reading is retransmitted
        let copies = if i % 5 == 0 { 2 } else { 1 };
        for _ in 0..copies {
            live.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{}, {i}, 1]", T0 + i * 15), 0)).unwrap();
            sent += 1;
        }
        live.receive_value(notif("AE-WE", "WE-GS04-00", &format!("[{}, {i}]", T0 + i * 60), 0)).unwrap();
        sent += 1;
    }
    assert!(live.wait_idle(IDLE));
    assert_eq!(live.stats().duplicates, 10);

    let fresh_dir = tempfile::tempdir().unwrap();
    let fresh = Lake::open(LakeConfig::new(fresh_dir.path())).unwrap();
    fresh.replay_journal(&live.journal_path()).unwrap();
    assert!(fresh.wait_idle(IDLE));
    assert_eq!(fresh.stats().duplicates, sent - fresh.stats().stored);
    for t in ["AQ", "WE", "WM"] {
        assert_eq!(fresh.store(t).unwrap().export(), live.store(t).unwrap().export(), "tenant {t}");
    }

    // replaying into the live lake stores nothing new: every row is a duplicate key
    let unique = live.stats().stored;
    let before: Vec<_> = ["AQ", "WE"].iter().map(|t| live.store(t).unwrap().export()).collect();
    live.replay_journal(&live_dir.path().join(citylab_lake::intake::INTAKE_JOURNAL)).ok();
    assert!(live.wait_idle(IDLE));
    assert_eq!(live.stats().duplicates, 10 + sent);
    assert_eq!(live.stats().stored, unique);
    let after: Vec<_> = ["AQ", "WE"].iter().map(|t| live.store(t).unwrap().export()).collect();
    assert_eq!(before, after);
}

#[test]
fn ack_is_fast_while_store_stalls() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    assert!(lake.wait_idle(IDLE));
    lake.set_stall(Duration::from_secs(2));
    let started = Instant::now();
    let mut worst = Duration::ZERO;
    for i in 0..3i64 {
        let t = Instant::now();
        lake.receive(&body(&notif("AE-AQ", "AQ-AN00-00", &format!("[{}, 1, 2]", T0 + i), 0)), &Source::default())
            .unwrap();
        worst = worst.max(t.elapsed());
    }
    assert!(worst < Duration::from_millis(100), "ack took {worst:?}");
    // the stall is read per write, so keep it until the first write has slept
    while started.elapsed() < Duration::from_millis(1900) {
        assert_eq!(lake.store("AQ").unwrap().len(), 0);
        std::thread::sleep(Duration::from_millis(100));
    }
    lake.set_stall(Duration::ZERO);
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.store("AQ").unwrap().len(), 3);
}

#[test]
fn offline_entries_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    {
        let lake = seeded(dir.path(), Tenancy::PerVertical);
        assert!(lake.wait_idle(IDLE));
        lake.set_offline(true);
        for i in 0..5i64 {
            lake.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{}, 1, 2]", T0 + i), 0)).unwrap();
        }
        assert!(!lake.wait_idle(Duration::from_millis(100)));
        assert_eq!(lake.stats().pending, 5);
    }
    let lake = Lake::open(LakeConfig::new(dir.path())).unwrap();
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.store("AQ").unwrap().len(), 5);
    // a second restart has nothing left to apply
    drop(lake);
    let lake = Lake::open(LakeConfig::new(dir.path())).unwrap();
    assert_eq!(lake.stats().pending, 0);
    assert_eq!(lake.store("AQ").unwrap().len(), 5);
}

#[test]
fn offline_then_online_drains() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    lake.set_offline(true);
    lake.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{T0}, 1, 2]"), 0)).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    assert!(lake.store("AQ").unwrap().is_empty());
    lake.set_offline(false);
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.store("AQ").unwrap().len(), 1);
}

#[test]
fn allowlist_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = LakeConfig::new(dir.path());
    cfg.allow = vec!["/in-cse".into(), "10.0.0.7".into()];
    let lake = Lake::open(cfg).unwrap();
    let b = body(&notif("AE-AQ", "AQ-AN00-00", "[1, 2, 3]", 0));
    let stranger = Source { origin: Some("Cmallory".into()), ip: None };
    assert!(matches!(lake.receive(&b, &stranger), Err(LakeError::Forbidden(_))));
    assert!(matches!(lake.receive(&b, &Source::default()), Err(LakeError::Forbidden(_))));
    let by_ip = Source { origin: None, ip: Some("10.0.0.7".parse().unwrap()) };
    assert!(lake.receive(&b, &by_ip).is_ok());
    let cse = Source { origin: Some("/in-cse".into()), ip: None };
    assert!(matches!(lake.receive(b"not json", &cse), Err(LakeError::Malformed(_))));
    assert!(matches!(lake.receive(br#"{"m2m:sgn": {"nev": {}}}"#, &cse), Err(LakeError::Malformed(_))));
    assert_eq!(lake.receive(br#"{"m2m:sgn": {"vrq": true, "sur": "/x"}}"#, &cse).unwrap(), Ack::Verification);
}

#[test]
fn dead_letters_for_unroutable_and_unparseable() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::PerVertical);
    let mut no_ae = notif("AE-AQ", "AQ-AN00-00", "[1, 2, 3]", 0);
    no_ae["m2m:sgn"]["nev"]["rep"]["m2m:cin"]["lbl"] = json!(["AQ-AN00-00"]);
    assert_eq!(lake.receive_value(no_ae).unwrap(), Ack::DeadLettered);
    // arity mismatch and an unregistered node fail on the writer
    lake.receive_value(notif("AE-AQ", "AQ-AN00-00", "[1, 2]", 0)).unwrap();
    lake.receive_value(notif("AE-AQ", "AQ-ZZ00-00", "[1, 2, 3]", 0)).unwrap();
    assert!(lake.wait_idle(IDLE));
    let dl = lake.dead_letters().unwrap();
    assert_eq!(dl.len(), 3);
    assert!(dl[0].reason.contains("no vertical"));
    assert_eq!(lake.stats().dead_lettered, 3);
    assert!(lake.store("AQ").unwrap().is_empty());
}

struct Fixed(DescriptorRecord);

impl DescriptorResolver for Fixed {
    fn resolve(&self, node: &str, _sur: &str) -> Option<(String, DescriptorRecord)> {
        (node == self.0.node_id).then(|| ("AQ".to_owned(), self.0.clone()))
    }
}

#[test]
fn resolver_supplies_unknown_descriptors() {
    let dir = tempfile::tempdir().unwrap();
    let lake = Lake::open(LakeConfig::new(dir.path())).unwrap();
    lake.set_resolver(Arc::new(Fixed(desc("AQ-KH00-00", &["Timestamp", "PM2.5"]))));
    lake.receive_value(notif("AE-AQ", "AQ-KH00-00", &format!("[{T0}, 7]"), 0)).unwrap();
    lake.receive_value(notif("AE-AQ", "AQ-KH00-00", &format!("[{}, 8]", T0 + 1), 0)).unwrap();
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.store("AQ").unwrap().len(), 2);
}

#[test]
fn single_tenancy_shares_one_store() {
    let dir = tempfile::tempdir().unwrap();
    let lake = seeded(dir.path(), Tenancy::Single);
    lake.receive_value(notif("AE-AQ", "AQ-AN00-00", &format!("[{T0}, 1, 2]"), 0)).unwrap();
    lake.receive_value(notif("AE-WE", "WE-GS04-00", &format!("[{T0}, 20]"), 0)).unwrap();
    assert!(lake.wait_idle(IDLE));
    assert_eq!(lake.tenants(), vec!["ALL"]);
    let rows = lake.store("ALL").unwrap().all_rows();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].vertical, "AQ");
    assert_eq!(rows[1].vertical, "WE");
}
