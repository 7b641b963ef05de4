use std::collections::VecDeque;
use std::sync::Arc;

use citylab_resource::*;
use proptest::prelude::*;

const ADMIN: &str = "admin:admin";
const GUEST: &str = "guest:guest";

fn tree() -> ResourceTree {
    ResourceTree::with_clock(TreeConfig::default(), Arc::new(ManualClock::at_epoch(1_645_254_204)))
}

fn guest_policy(t: &ResourceTree) -> ResourceId {
    let cse = t.cse();
    t.create_resource(
        &cse.path,
        ResourceSpec::AccessControlPolicy {
            rn: "acp-guest".into(),
            policy: AccessPolicy::new(
                vec![
                    AccessRule::new(ADMIN, PermissionSet::ALL),
                    AccessRule::new(GUEST, acop_decode(34).unwrap()),
                ],
                vec![AccessRule::new(ADMIN, PermissionSet::ALL)],
            )
            .unwrap(),
        },
        ADMIN,
    )
    .unwrap()
}

fn container(t: &ResourceTree, ae: &str, node: &str, mni: usize, labels: &[&str]) -> ResourceId {
    let cse = t.cse();
    let ae_path = format!("{}/{ae}", cse.path);
    if !t.exists(&ae_path) {
        t.create_resource(
            &cse.path,
            ResourceSpec::Ae {
                rn: ae.into(),
                labels: vec![],
                acpi: vec![],
            },
            ADMIN,
        )
        .unwrap();
    }
    let node_path = format!("{ae_path}/{node}");
    if !t.exists(&node_path) {
        t.create_resource(&ae_path, ResourceSpec::container(node, vec![], vec![]), ADMIN)
            .unwrap();
    }
    t.create_resource(
        &node_path,
        ResourceSpec::Container {
            rn: "Data".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            acpi: vec![],
            mni: Some(mni),
            mbs: None,
            mia: None,
        },
        ADMIN,
    )
    .unwrap()
}

#[test]
fn paths_follow_the_campus_shape() {
    let t = tree();
    let id = container(&t, "AE-AQ", "AQ-MG00-00", 120, &[]);
    assert_eq!(id.path, "/in-cse/in-name/AE-AQ/AQ-MG00-00/Data");
    assert!(id.ri.starts_with("/in-cse/cnt-"));
    assert_eq!(t.resolve(&id.ri).unwrap(), id);
    assert_eq!(t.resolve(&format!("/~{}", id.path)).unwrap(), id);
}

#[test]
fn duplicate_sibling_rejected() {
    let t = tree();
    container(&t, "AE-AQ", "AQ-MG00-00", 120, &[]);
    let err = t
        .create_resource(
            "/in-cse/in-name/AE-AQ/AQ-MG00-00",
            ResourceSpec::container("Data", vec![], vec![]),
            ADMIN,
        )
        .unwrap_err();
    assert_eq!(err, ResourceError::DuplicateName("Data".into()));
}

#[test]
fn singleton_and_empty_container() {
    let t = tree();
    let c = container(&t, "AE-AQ", "AQ-MG00-00", 120, &[]);
    assert!(matches!(t.latest(&c.path, ADMIN), Err(ResourceError::Empty(_))));
    assert!(matches!(t.oldest(&c.path, ADMIN), Err(ResourceError::Empty(_))));
    assert!(t.all_data(&c.path, ADMIN).unwrap().is_empty());
    let ins = t.insert_cin(&c.path, CinSpec::new("[1]", vec![]), ADMIN).unwrap();
    assert_eq!(t.latest(&c.path, ADMIN).unwrap(), ins.cin);
    assert_eq!(t.oldest(&c.path, ADMIN).unwrap(), ins.cin);
    assert_eq!(ins.cin.cs, 3);
    assert_eq!(t.retrieve(&c.path, ADMIN).unwrap().container.unwrap().cni, 1);
}

#[test]
fn insert_121_into_mni_120_evicts_first() {
    let t = tree();
    let c = container(&t, "AE-AQ", "AQ-MG00-00", 120, &[]);
    let first = t.insert_cin(&c.path, CinSpec::new("[0]", vec![]), ADMIN).unwrap();
    for i in 1..120 {
        let r = t.insert_cin(&c.path, CinSpec::new(format!("[{i}]"), vec![]), ADMIN).unwrap();
        assert!(r.evicted.is_none());
    }
    let last = t.insert_cin(&c.path, CinSpec::new("[120]", vec![]), ADMIN).unwrap();
    assert_eq!(last.evicted.unwrap().ri, first.cin.ri);
    let all = t.all_data(&c.path, ADMIN).unwrap();
    assert_eq!(all.len(), 120);
    assert!(all.iter().all(|c| c.ri != first.cin.ri));
    assert_eq!(t.retrieve(&c.path, ADMIN).unwrap().container.unwrap().cni, 120);
}

#[test]
fn mni_one_keeps_only_newest() {
    let t = tree();
    let c = container(&t, "AE-AQ", "AQ-MG00-00", 1, &[]);
    let mut oracle = VecDeque::new();
    for i in 0..3 {
        let r = t.insert_cin(&c.path, CinSpec::new(format!("[{i}]"), vec![]), ADMIN).unwrap();
        oracle.push_back(r.cin.ri.clone());
        if oracle.len() > 1 {
            oracle.pop_front();
        }
    }
    let got: Vec<_> = t.all_data(&c.path, ADMIN).unwrap().into_iter().map(|c| c.ri).collect();
    assert_eq!(got, Vec::from(oracle));
}

#[test]
fn guest_can_read_but_not_write() {
    let t = tree();
    let acp = guest_policy(&t);
    let c = container(&t, "AE-AQ", "AQ-MG00-00", 120, &[]);
    t.update_resource(
        &c.path,
        UpdateSpec {
            acpi: Some(vec![acp.ri.clone()]),
            ..Default::default()
        },
        ADMIN,
    )
    .unwrap();
    t.insert_cin(&c.path, CinSpec::new("[1]", vec![]), ADMIN).unwrap();
    assert!(t.latest(&c.path, GUEST).is_ok());
    assert!(matches!(
        t.insert_cin(&c.path, CinSpec::new("[2]", vec![]), GUEST),
        Err(ResourceError::AccessDenied { op: Permission::Create, .. })
    ));
    assert!(matches!(
        t.latest(&c.path, "guest:wrong"),
        Err(ResourceError::AccessDenied { .. })
    ));
    assert!(t.is_known_originator(GUEST));
    assert!(!t.is_known_originator("guest:wrong"));
    // guest cannot subscribe: NOTIFY is not in 34
    assert!(t
        .create_resource(
            &c.path,
            ResourceSpec::Subscription {
                rn: "sub".into(),
                nu: vec!["local://x".into()],
            },
            GUEST,
        )
        .is_err());
}

#[test]
fn fanout_reports_denials_per_member() {
    let t = tree();
    let acp = guest_policy(&t);
    let a = container(&t, "AE-AQ", "AQ-A", 120, &[]);
    let b = container(&t, "AE-AQ", "AQ-B", 120, &[]);
    for c in [&a, &b] {
        t.insert_cin(&c.path, CinSpec::new("[1]", vec![]), ADMIN).unwrap();
    }
    // only `a` is readable by the guest
    t.update_resource(&a.path, UpdateSpec { acpi: Some(vec![acp.ri.clone()]), ..Default::default() }, ADMIN)
        .unwrap();
    let grp = t
        .create_resource(
            "/in-cse/in-name/AE-AQ",
            ResourceSpec::Group {
                rn: "AQ-GRP".into(),
                mt: 3,
                mid: vec![a.ri.clone(), b.ri.clone()],
                mnm: 10,
                labels: vec![],
                acpi: vec![acp.ri.clone()],
            },
            ADMIN,
        )
        .unwrap();
    let res = t.group_fanout(&grp.path, FanoutVerb::Latest, GUEST).unwrap();
    assert_eq!(res.len(), 2);
    assert_eq!(
        res[0].result.clone().unwrap(),
        FanoutPayload::One(t.latest(&a.path, GUEST).unwrap())
    );
    assert!(matches!(res[1].result, Err(ResourceError::AccessDenied { .. })));

    let admin = t.group_fanout(&grp.path, FanoutVerb::All, ADMIN).unwrap();
    assert!(admin.iter().all(|m| m.result.is_ok()));
}

#[test]
fn group_rejects_invalid_members() {
    let t = tree();
    let a = container(&t, "AE-AQ", "AQ-A", 120, &[]);
    let spec = |mid: Vec<String>, mnm| ResourceSpec::Group {
        rn: "G".into(),
        mt: 3,
        mid,
        mnm,
        labels: vec![],
        acpi: vec![],
    };
    assert!(t.create_resource("/in-cse/in-name/AE-AQ", spec(vec![a.ri.clone(), a.ri.clone()], 1), ADMIN).is_err());
    assert!(t.create_resource("/in-cse/in-name/AE-AQ", spec(vec!["/in-cse/cnt-999".into()], 5), ADMIN).is_err());
    assert!(t.create_resource("/in-cse/in-name/AE-AQ", spec(vec!["/in-cse/in-name/AE-AQ".into()], 5), ADMIN).is_err());
}

#[test]
fn discovery_uses_and_semantics() {
    let t = tree();
    container(&t, "AE-AQ", "AQ-A", 120, &["Temperature", "Relative Humidity", "PM2.5"]);
    container(&t, "AE-WE", "WE-A", 120, &["Temperature", "Relative Humidity"]);
    container(&t, "AE-WE", "WE-B", 120, &["Temperature"]);
    let both = t
        .discover(&["Temperature".into(), "Relative Humidity".into()], ADMIN)
        .unwrap();
    assert_eq!(
        both,
        vec![
            "/in-cse/in-name/AE-AQ/AQ-A/Data".to_string(),
            "/in-cse/in-name/AE-WE/WE-A/Data".to_string(),
        ]
    );
    assert_eq!(t.discover(&["PM2.5".into()], ADMIN).unwrap(), vec!["/in-cse/in-name/AE-AQ/AQ-A/Data"]);
    assert!(t.discover(&["Noise".into()], ADMIN).unwrap().is_empty());
    assert!(t.discover(&["Temperature".into()], "nobody:x").is_err());
}

#[test]
fn descriptor_arity_enforced_on_data() {
    let t = tree();
    let data = container(&t, "AE-WM-WF", "WM-WF-PH01-00", 120, &[]);
    let desc = t
        .create_resource(
            "/in-cse/in-name/AE-WM-WF/WM-WF-PH01-00",
            ResourceSpec::container("Descriptor", vec![], vec![]),
            ADMIN,
        )
        .unwrap();
    let d = DescriptorRecord::with_parameters(
        "WM-WF-PH01-00",
        ["Timestamp", "Flowrate", "Total Flow", "Pressure", "Pressure Voltage"],
    );
    t.insert_cin(&desc.path, CinSpec::new(d.to_content(), vec![]), ADMIN).unwrap();
    t.insert_cin(&data.path, CinSpec::new("[1645254204, 867.00, 3091168.00, 260.00, 0.006418]", vec![]), ADMIN)
        .unwrap();
    assert_eq!(
        t.insert_cin(&data.path, CinSpec::new("[1, 2]", vec![]), ADMIN).unwrap_err(),
        ResourceError::ArityMismatch { expected: 5, found: 2 }
    );
}

#[test]
fn journal_and_snapshot_restore_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::at_epoch(1_645_254_204));
    let cfg = TreeConfig {
        snapshot_every: 7,
        default_mni: 5,
        ..TreeConfig::default()
    };
    let before = {
        let t = ResourceTree::open(dir.path(), cfg.clone(), clock.clone()).unwrap();
        let c = container(&t, "AE-AQ", "AQ-A", 5, &["x"]);
        for i in 0..23 {
            t.insert_cin(&c.path, CinSpec::new(format!("[{i}]"), vec![]), ADMIN).unwrap();
        }
        let tmp = container(&t, "AE-AQ", "AQ-B", 5, &[]);
        t.delete_resource("/in-cse/in-name/AE-AQ/AQ-B", ADMIN).unwrap();
        assert!(!t.exists(&tmp.ri));
        t.sync().unwrap();
        t.export()
    };
    let t = ResourceTree::open(dir.path(), cfg.clone(), clock.clone()).unwrap();
    assert_eq!(t.export(), before);
    // sequence continues past restored ids
    let next = t
        .insert_cin("/in-cse/in-name/AE-AQ/AQ-A/Data", CinSpec::new("[99]", vec![]), ADMIN)
        .unwrap();
    assert!(before.containers[0].instances.iter().all(|c| c.ri != next.cin.ri));
}

#[test]
fn torn_journal_tail_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::at_epoch(0));
    let before = {
        let t = ResourceTree::open(dir.path(), TreeConfig::default(), clock.clone()).unwrap();
        let c = container(&t, "AE-AQ", "AQ-A", 5, &[]);
        t.insert_cin(&c.path, CinSpec::new("[1]", vec![]), ADMIN).unwrap();
        t.export()
    };
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(dir.path().join(citylab_resource::journal::JOURNAL_FILE))
        .unwrap();
    f.write_all(b"{\"op\":\"insert_cin\",\"contai").unwrap();
    drop(f);
    let t = ResourceTree::open(dir.path(), TreeConfig::default(), clock).unwrap();
    assert_eq!(t.export(), before);
}

#[test]
fn concurrent_inserts_keep_bound() {
    let t = Arc::new(tree());
    let c = container(&t, "AE-AQ", "AQ-A", 50, &[]);
    let handles: Vec<_> = (0..4)
        .map(|w| {
            let t = t.clone();
            let p = c.path.clone();
            std::thread::spawn(move || {
                for i in 0..200 {
                    t.insert_cin(&p, CinSpec::new(format!("[{w}, {i}]"), vec![]), ADMIN).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let all = t.all_data(&c.path, ADMIN).unwrap();
    assert_eq!(all.len(), 50);
    let st = t.retrieve(&c.path, ADMIN).unwrap().container.unwrap();
    assert_eq!(st.cni, 50);
    assert_eq!(st.cbs, all.iter().map(|c| c.cs as u64).sum::<u64>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn retained_instances_match_replay_oracle(mni in 1usize..20, n in 0usize..80) {
        let t = tree();
        let c = container(&t, "AE-AQ", "AQ-A", mni, &[]);
        let mut oracle: VecDeque<String> = VecDeque::new();
        for i in 0..n {
            let r = t.insert_cin(&c.path, CinSpec::new(format!("[{i}]"), vec![]), ADMIN).unwrap();
            oracle.push_back(r.cin.ri.clone());
            let expected_evict = if oracle.len() > mni { oracle.pop_front() } else { None };
            prop_assert_eq!(r.evicted.map(|e| e.ri), expected_evict);
            let all = t.all_data(&c.path, ADMIN).unwrap();
            prop_assert_eq!(&t.latest(&c.path, ADMIN).unwrap(), all.last().unwrap());
            prop_assert_eq!(&t.oldest(&c.path, ADMIN).unwrap(), all.first().unwrap());
        }
        let got: Vec<String> = t.all_data(&c.path, ADMIN).unwrap().into_iter().map(|c| c.ri).collect();
        prop_assert_eq!(got, Vec::from(oracle));
    }

    #[test]
    fn more_labels_never_widen_discovery(
        sets in proptest::collection::vec(proptest::collection::btree_set(0u8..5, 0..5), 1..8),
        l1 in proptest::collection::btree_set(0u8..5, 0..3),
        l2 in proptest::collection::btree_set(0u8..5, 0..3),
    ) {
        let t = tree();
        for (i, s) in sets.iter().enumerate() {
            let labels: Vec<String> = s.iter().map(|l| format!("L{l}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            container(&t, "AE-X", &format!("N{i}"), 5, &refs);
        }
        let name = |s: &std::collections::BTreeSet<u8>| s.iter().map(|l| format!("L{l}")).collect::<Vec<_>>();
        let a = t.discover(&name(&l1), ADMIN).unwrap();
        let union: std::collections::BTreeSet<u8> = l1.union(&l2).copied().collect();
        let b = t.discover(&name(&union), ADMIN).unwrap();
        prop_assert!(b.iter().all(|p| a.contains(p)));
        // linear scan oracle
        let oracle: Vec<String> = sets.iter().enumerate()
            .filter(|(_, s)| l1.is_subset(s))
            .map(|(i, _)| format!("/in-cse/in-name/AE-X/N{i}/Data"))
            .collect();
        let mut oracle = oracle;
        oracle.sort();
        prop_assert_eq!(a, oracle);
    }
}
