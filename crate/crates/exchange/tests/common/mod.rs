#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use citylab_exchange::catalogue::ItemLocation;
use citylab_exchange::{campus_catalogue, Catalogue, Exchange, ExchangeConfig, ResourceServer, Revocations, Signer, TokenService, Verifier};
use citylab_lake::{Lake, LakeConfig};
use citylab_monitor::{notification_body, Monitor};
use citylab_resource::descriptor::{DeviceModel, Location, VersionEntry};
use citylab_resource::{CinSpec, DescriptorRecord, ManualClock, ResourceSpec, ResourceTree, TreeConfig};

pub const ADMIN: &str = "admin:admin";
pub const SECRET: &[u8] = b"exchange-test-secret";
/// 2022-03-21T00:25:06+05:30
pub const LATEST_TS: i64 = 1_647_802_506;
/// 2022-01-12T00:00:00Z
pub const T0: i64 = 1_641_945_600;

pub const AQ_PARAMS: [&str; 11] = [
    "Timestamp", "PM2.5", "PM10", "Temperature", "Relative Humidity", "CO", "NO2", "NH3", "AQI", "AQL", "AQI-MP",
];

pub fn mg_descriptor() -> DescriptorRecord {
    let mut d = DescriptorRecord::with_parameters("AQ-MG00-00", AQ_PARAMS);
    d.location = Location { latitude: 17.4458, longitude: 78.3486 };
    let sensors: BTreeMap<String, String> = [
        ("PM2.5", "SDS011"),
        ("PM10", "SDS011"),
        ("Temperature", "DHT22"),
        ("Relative Humidity", "DHT22"),
        ("CO", "Multichannel Grove Gas Sensor"),
        ("NO2", "Multichannel Grove Gas Sensor"),
        ("NH3", "Multichannel Grove Gas Sensor"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_owned(), b.to_owned()))
    .collect();
    d.device_model = DeviceModel {
        controller: "ESP8266".into(),
        device: "Air Quality node".into(),
        sensors: vec![],
    };
    d.versions = vec![
        VersionEntry {
            ver: "V2.01.33".into(),
            dt_start: "10-10-2020 10-00-00".into(),
            dt_end: "31-12-2020 10-00-00".into(),
            sensors: sensors.clone(),
            comments: "comment on version change".into(),
        },
        VersionEntry {
            ver: "V3.00.02".into(),
            dt_start: "31-12-2020 10-00-00".into(),
            dt_end: "31-12-9999 23-59-59".into(),
            sensors,
            comments: "comment on version change".into(),
        },
    ];
    d
}

pub fn simple_descriptor(node: &str, params: &[&str]) -> DescriptorRecord {
    let mut d = DescriptorRecord::with_parameters(node, params.iter().copied());
    d.versions = vec![VersionEntry {
        ver: "V1.0.0".into(),
        dt_start: "01-01-2020 00-00-00".into(),
        dt_end: "31-12-9999 23-59-59".into(),
        sensors: BTreeMap::new(),
        comments: String::new(),
    }];
    d
}

pub struct Fixture {
    pub ex: Arc<Exchange>,
    pub tree: Arc<ResourceTree>,
    pub lake: Lake,
    pub clock: ManualClock,
    pub catalogue: Arc<Catalogue>,
    _dir: tempfile::TempDir,
}

pub const USER: &str = "consumer@example.org";
pub const USER_SECRET: &str = "pw";

pub const NODES: [(&str, &str, &str); 4] = [
    ("iiith-env-aqm", "AE-AQ", "AQ-MG00-00"),
    ("iiith-env-aqm", "AE-AQ", "AQ-AN00-00"),
    ("iiith-energy-meter", "AE-EM", "EM-NC-PH02-00"),
    ("iiith-water-monitoring", "AE-WM-WF", "WM-WF-PH01-00"),
];

fn descriptor_for(node: &str) -> DescriptorRecord {
    match node {
        "AQ-MG00-00" => mg_descriptor(),
        "AQ-AN00-00" => {
            let mut d = mg_descriptor();
            d.node_id = node.into();
            d
        }
        "EM-NC-PH02-00" => simple_descriptor(node, &["Timestamp", "Energy (kWh)"]),
        _ => simple_descriptor(node, &["Timestamp", "Flowrate", "Total Flow"]),
    }
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = ManualClock::at_epoch(LATEST_TS + 60);
        let tree = Arc::new(ResourceTree::with_clock(TreeConfig::default(), Arc::new(clock.clone())));
        let lake = Lake::open(LakeConfig::new(dir.path().join("lake"))).unwrap();
        let catalogue = Arc::new(campus_catalogue());
        for ae in ["AE-AQ", "AE-EM", "AE-WM-WF"] {
            tree.create_resource("/in-cse/in-name", ResourceSpec::Ae { rn: ae.into(), labels: vec![], acpi: vec![] }, ADMIN)
                .unwrap();
        }
        for (group, ae, node) in NODES {
            let base = format!("/in-cse/in-name/{ae}");
            tree.create_resource(&base, ResourceSpec::container(node, vec![], vec![]), ADMIN).unwrap();
            let np = format!("{base}/{node}");
            tree.create_resource(&np, ResourceSpec::container("Descriptor", vec![], vec![]), ADMIN).unwrap();
            tree.create_resource(&np, ResourceSpec::container("Data", vec![], vec![]), ADMIN).unwrap();
            let d = descriptor_for(node);
            tree.insert_cin(&format!("{np}/Descriptor"), CinSpec::new(d.to_content(), vec![]), ADMIN).unwrap();
            let vertical = ae.trim_start_matches("AE-").split('-').next().unwrap();
            lake.register_node(vertical, &d).unwrap();
            let label = if node == "AQ-MG00-00" { "Air Quality node 1 at Main Gate" } else { node };
            catalogue
                .add_item(group, node, label, label, vec![], ItemLocation::point(17.44, 78.34, "IIIT Hyderabad"), "2021-08-03T07:06:42+0530")
                .unwrap();
        }
        let monitor = Arc::new(Monitor::new(tree.clone()));
        let clock_dyn: Arc<dyn citylab_resource::Clock> = Arc::new(clock.clone());
        let signer = Signer::hs256(SECRET).unwrap();
        let verifier = Verifier::new(signer.clone(), catalogue.server(), Revocations::in_memory());
        let rs = ResourceServer::new(ExchangeConfig::default(), catalogue.clone(), verifier, lake.clone(), monitor, clock_dyn.clone());
        let auth = TokenService::new(signer, catalogue.clone(), clock_dyn);
        auth.register(USER, USER_SECRET);
        Fixture {
            ex: Arc::new(Exchange { rs, auth }),
            tree,
            lake,
            clock,
            catalogue,
            _dir: dir,
        }
    }

    pub fn item_id(&self, node: &str) -> String {
        let (group, _, _) = NODES.iter().find(|n| n.2 == node).unwrap();
        format!("{}/{node}", self.catalogue.group_id(group))
    }

    /// Inserts a data CIN on the monitor and feeds the lake the notification
    /// the subscription would deliver.
    pub fn push(&self, node: &str, con: &str, labels: &[&str]) {
        let (_, ae, _) = NODES.iter().find(|n| n.2 == node).unwrap();
        let cnt = format!("/in-cse/in-name/{ae}/{node}/Data");
        let mut lbl: Vec<String> = vec![ae.to_string(), node.to_owned()];
        lbl.extend(labels.iter().map(|s| s.to_string()));
        let ins = self.tree.insert_cin(&cnt, CinSpec::new(con, lbl), ADMIN).unwrap();
        self.lake.receive_value(notification_body(&format!("{cnt}/sub-lake"), &ins.cin)).unwrap();
    }

    pub fn settle(&self) {
        assert!(self.lake.wait_idle(std::time::Duration::from_secs(30)));
    }
}
