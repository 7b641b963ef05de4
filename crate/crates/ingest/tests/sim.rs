use citylab_ingest::sim::{aq_profile, ground_truth, read_log, we_profile, write_log};
use citylab_ingest::{simulate, FaultPlan};

#[test]
fn seeded_runs_are_byte_identical() {
    let mut p = aq_profile();
    p.faults = FaultPlan::typical();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_log(&a, &simulate(&p, 1_646_438_400, 3600, 11).unwrap()).unwrap();
    write_log(&b, &simulate(&p, 1_646_438_400, 3600, 11).unwrap()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = simulate(&p, 1_646_438_400, 3600, 12).unwrap();
    assert_ne!(read_log(&a).unwrap(), other);
}

#[test]
fn fault_rates_within_binomial_bounds() {
    let mut p = we_profile();
    p.faults = FaultPlan {
        duplicate_prob: 0.25,
        drop_prob: 0.1,
        outlier_prob: 0.05,
        null_prob: 0.02,
        ..FaultPlan::none()
    };
    let n = p.slots(7 * 86_400) as f64;
    let recs = simulate(&p, 0, 7 * 86_400, 2024).unwrap();
    let truth = ground_truth(&p, n as u64, &recs);
    // 4.5-sigma bands keep the check deterministic for practical purposes
    let within = |count: f64, trials: f64, prob: f64| {
        let sd = (trials * prob * (1.0 - prob)).sqrt();
        (count - trials * prob).abs() <= 4.5 * sd
    };
    let dropped = n - truth.delivered_slots as f64;
    assert!(within(dropped, n, 0.1), "dropped {dropped}");
    let dup: usize = truth
        .distribution
        .iter()
        .filter(|(k, _)| **k > 1)
        .map(|(_, v)| v)
        .sum();
    assert!(
        within(dup as f64, truth.delivered_slots as f64, 0.25),
        "dup {dup}"
    );
    let values = (truth.delivered_slots * p.params.len()) as f64;
    let bad: usize = truth.range.values().map(|v| v.1).sum();
    assert!(within(bad as f64, values, 0.07), "bad {bad}");
}

#[test]
fn delays_follow_plan() {
    let mut p = aq_profile();
    p.faults = FaultPlan {
        delay_min_secs: 30,
        delay_max_secs: 40,
        jitter_max_secs: 5,
        drop_prob: 0.2,
        ..FaultPlan::none()
    };
    let recs = simulate(&p, 0, 3600, 4).unwrap();
    let truth = ground_truth(&p, 240, &recs);
    assert!(truth.delays.iter().all(|(_, _, tx)| (30..=40).contains(tx)));
    assert_eq!(truth.delays[0].1, 0);
    // a dropped slot shows up as a gap of at least one period
    assert!(truth.delays.iter().any(|(_, excess, _)| *excess >= 15));
}

#[test]
fn bad_profiles_rejected() {
    let mut p = aq_profile();
    p.period_secs = 0;
    assert!(simulate(&p, 0, 60, 1).is_err());
    let mut p = aq_profile();
    p.faults.jitter_max_secs = 15;
    assert!(simulate(&p, 0, 60, 1).is_err());
}
