use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_citylab");

fn citylab(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env("CITYLAB_SECRET", "binary-test-secret-0001")
        .env_remove("CITYLAB_CONFIG")
        .env_remove("CITYLAB_DATA_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn decode_prints_named_fields_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let hex = "000004800000047900000467".to_owned() + "5ACD5B5C5B69004C13870000031E0000025E00033701000231470000021C00042B53";
    let out = citylab(dir.path(), &["--json", "decode-pdu", &hex]);
    assert!(out.status.success());
    assert_eq!(json(&out)["avg_freq"], 49.99);
    let bad = citylab(dir.path(), &["decode-pdu", "00zz"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("payload 1"));
}

#[test]
fn weak_secret_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .arg("--data-dir")
        .arg(dir.path())
        .arg("seed")
        .env("CITYLAB_SECRET", "short")
        .env_remove("CITYLAB_CONFIG")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 16"));
    assert!(!dir.path().join("tree").exists(), "nothing opened on a config error");
}

#[test]
fn seed_twice_then_simulate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = json(&citylab(dir.path(), &["--json", "seed"]));
    assert!(first["created"].as_u64().unwrap() > 200);
    assert_eq!(first["demo_points"], 8);
    let second = json(&citylab(dir.path(), &["--json", "seed"]));
    assert_eq!(second["created"], 0);
    assert_eq!(second["descriptors"], 0);
    assert_eq!(second["demo_points"], 0);

    let sim = citylab(dir.path(), &["--json", "simulate", "--profile", "aq", "--duration", "30m", "--faults", "typical", "--seed", "9"]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let sim = json(&sim);
    let truth: Value = serde_json::from_slice(&std::fs::read(sim["truth"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(sim["posted"], truth["emitted"]);

    let start = sim["start"].as_i64().unwrap().to_string();
    let end = (sim["start"].as_i64().unwrap() + 1800).to_string();
    let rep = json(&citylab(dir.path(), &["--json", "report", "--node", "AQ-KH00-00", "--start", &start, "--end", &end]));
    let dist: Value = rep["distribution"].clone();
    assert_eq!(dist, truth["distribution"]);

    let replay = json(&citylab(dir.path(), &["--json", "lake", "replay", "--verify"]));
    assert_eq!(replay["identical"], true);

    let empty = citylab(dir.path(), &["report", "--node", "AQ-NONE-00", "--start", "0", "--end", "10"]);
    assert_eq!(empty.status.code(), Some(1));
}
