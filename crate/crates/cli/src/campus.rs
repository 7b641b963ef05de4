//! The demo deployment: which verticals exist, where their nodes sit in
//! the resource tree, and what each node measures.

use citylab_exchange::{campus_catalogue, Catalogue, ItemLocation, TokenService};
use citylab_ingest::sim::{self, ParamSpec, SimProfile};
use citylab_ingest::FaultPlan;
use citylab_quality::{FactorTable, KnowledgeBase, KnowledgeBaseEntry, QualityFactor};
use citylab_resource::DescriptorRecord;

pub const CSE: &str = "/in-cse/in-name";
pub const ADMIN: &str = "admin:admin";
pub const GUEST: &str = "guest:guest";
pub const GUEST_ACP: &str = "acp-guest";
pub const CREATED_AT: &str = "2021-08-03T07:06:42+0530";
/// 2022-01-12T00:00:00Z, start of the demo query window.
pub const DEMO_T0: i64 = 1_641_945_600;
pub const DEMO_NODE: &str = "AQ-AN00-00";
pub const DEMO_USER: &str = "consumer@iiit.ac.in";
pub const DEMO_USER_SECRET: &str = "consumer-demo-secret";
/// The one secure group the demo consumer is granted.
pub const DEMO_GRANT: &str = "iiith-energy-meter";

const AQ_CODES: [&str; 10] = [
    "AN00-00", "MG00-00", "KH00-00", "KN00-00", "VN90-00", "PH03-00", "PL00-00", "FG00-00", "SN00-00", "BN00-00",
];
const SR_OC_CODES: [&str; 7] = ["KH03-01", "KH01-00", "KH03-00", "KH03-02", "KH95-00", "KH00-00", "KH00-01"];
const SR_AQ_CODES: [&str; 9] = [
    "KH03-03", "KH03-01", "KH00-00", "KH00-02", "KH03-00", "KH00-01", "KH95-00", "KH00-03", "KH03-02",
];
const WE_CODES: [&str; 3] = ["GS04-00", "BN04-00", "VN04-00"];

/// One deployed node.
#[derive(Debug, Clone)]
pub struct Site {
    /// Path of the node container, e.g. `/in-cse/in-name/AE-SR/SR-OC/SR-OC-GW-KH03-01`.
    pub path: String,
    pub profile: SimProfile,
    /// Exchange resource group publishing the node.
    pub group: Option<&'static str>,
    pub label: String,
}

impl Site {
    pub fn node(&self) -> &str {
        &self.profile.node
    }

    pub fn ae(&self) -> &str {
        &self.profile.ae
    }

    pub fn data_path(&self) -> String {
        format!("{}/Data", self.path)
    }

    pub fn descriptor_path(&self) -> String {
        format!("{}/Descriptor", self.path)
    }

    /// Containers between the AE and the node, outermost first.
    pub fn intermediate(&self) -> Vec<String> {
        let ae_path = format!("{CSE}/{}", self.ae());
        let rest = self.path.strip_prefix(&ae_path).unwrap_or_default();
        let segs: Vec<&str> = rest.split('/').filter(|s| !s.is_empty()).collect();
        (1..segs.len()).map(|i| format!("{ae_path}/{}", segs[..i].join("/"))).collect()
    }

    pub fn descriptor(&self) -> DescriptorRecord {
        self.profile.descriptor()
    }

    /// Data containers carry their parameter names so label discovery
    /// finds them by what they measure.
    pub fn data_labels(&self) -> Vec<String> {
        let mut l = self.profile.parameter_names();
        l.sort();
        l
    }
}

fn p(name: &str, unit: &str, min: f64, max: f64, base: f64, amplitude: f64, noise: f64, decimals: u32) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        unit: unit.into(),
        min,
        max,
        base,
        amplitude,
        noise,
        decimals,
    }
}

fn profile(node: &str, ae: &str, version: &str, period: i64, params: Vec<ParamSpec>, device: &str) -> SimProfile {
    SimProfile {
        node: node.into(),
        ae: ae.into(),
        version: version.into(),
        period_secs: period,
        params,
        faults: FaultPlan::none(),
        latitude: 17.4455,
        longitude: 78.3489,
        device: device.into(),
    }
}

fn aqm_profile() -> SimProfile {
    profile(
        "AQM-XX00-00",
        "AE-AQM",
        "V1.0.0",
        30,
        vec![
            p("PM2.5", "ug/m3", 0.0, 250.0, 32.0, 10.0, 5.0, 2),
            p("PM10", "ug/m3", 0.0, 430.0, 65.0, 20.0, 10.0, 2),
            p("Temperature", "degC", 10.0, 45.0, 28.0, 4.0, 1.0, 2),
            p("Relative Humidity", "%", 5.0, 100.0, 48.0, 15.0, 5.0, 2),
        ],
        "Mobile air quality node",
    )
}

fn sr_oc_profile() -> SimProfile {
    profile(
        "SR-OC-GW-KH00-00",
        "AE-SR",
        "V1.0.0",
        60,
        vec![
            p("Occupancy", "", 0.0, 60.0, 12.0, 10.0, 3.0, 0),
            p("Temperature", "degC", 15.0, 40.0, 24.0, 2.0, 0.5, 2),
            p("Relative Humidity", "%", 5.0, 100.0, 45.0, 10.0, 3.0, 2),
        ],
        "Room occupancy gateway",
    )
}

fn sr_aq_profile() -> SimProfile {
    profile(
        "SR-AQ-KH00-00",
        "AE-SR",
        "V1.0.0",
        60,
        vec![
            p("CO2", "ppm", 300.0, 5000.0, 650.0, 200.0, 50.0, 0),
            p("Temperature", "degC", 15.0, 40.0, 24.0, 2.0, 0.5, 2),
            p("Relative Humidity", "%", 5.0, 100.0, 45.0, 10.0, 3.0, 2),
        ],
        "Indoor air quality sensor",
    )
}

fn sl_profile() -> SimProfile {
    profile(
        "SL-KH00-00",
        "AE-SL",
        "V1.0.0",
        300,
        vec![
            p("Energy", "kWh", 0.0, 1.0e6, 1520.0, 0.0, 0.5, 2),
            p("Active Power", "kW", 0.0, 50.0, 8.0, 6.0, 1.0, 2),
            p("Frequency", "Hz", 49.0, 51.0, 50.0, 0.05, 0.02, 2),
            p("Power Factor", "", 0.0, 1.0, 0.92, 0.03, 0.01, 2),
            p("Voltage", "V", 180.0, 260.0, 231.0, 3.0, 1.0, 2),
            p("Current", "A", 0.0, 100.0, 35.0, 20.0, 2.0, 2),
        ],
        "Rooftop solar inverter",
    )
}

fn cm_profile() -> SimProfile {
    profile(
        "CM-KH95-00",
        "AE-CM",
        "V1.0.0",
        60,
        vec![
            p("People Count", "", 0.0, 500.0, 40.0, 30.0, 5.0, 0),
            p("Distance Violations", "", 0.0, 500.0, 4.0, 3.0, 1.0, 0),
            p("Mask Violations", "", 0.0, 500.0, 2.0, 2.0, 1.0, 0),
        ],
        "Camera feed processing unit",
    )
}

/// A family profile renamed for one node. The built-in reference nodes
/// keep their own coordinates; the others get a small deterministic offset.
fn placed(mut prof: SimProfile, node: &str) -> SimProfile {
    if prof.node != node {
        let h = node.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
        prof.latitude = 17.4400 + (h % 100) as f64 * 1e-4;
        prof.longitude = 78.3450 + (h / 100 % 100) as f64 * 1e-4;
        prof.node = node.into();
    }
    prof
}

fn site(path: String, prof: SimProfile, group: Option<&'static str>, label: String) -> Site {
    Site {
        path,
        profile: prof,
        group,
        label,
    }
}

pub fn sites() -> Vec<Site> {
    let mut out = Vec::new();
    for code in AQ_CODES {
        let node = format!("AQ-{code}");
        out.push(site(
            format!("{CSE}/AE-AQ/{node}"),
            placed(sim::aq_profile(), &node),
            Some("iiith-env-aqm"),
            format!("Air Quality node {node}"),
        ));
    }
    out.push(site(
        format!("{CSE}/AE-AQM/AQM-XX00-00"),
        aqm_profile(),
        None,
        "Mobile air quality node AQM-XX00-00".into(),
    ));
    for code in SR_OC_CODES {
        let node = format!("SR-OC-GW-{code}");
        out.push(site(format!("{CSE}/AE-SR/SR-OC/{node}"), placed(sr_oc_profile(), &node), None, format!("Smart room gateway {node}")));
    }
    for code in SR_AQ_CODES {
        let node = format!("SR-AQ-{code}");
        out.push(site(format!("{CSE}/AE-SR/SR-AQ/{node}"), placed(sr_aq_profile(), &node), None, format!("Smart room air sensor {node}")));
    }
    for code in WE_CODES {
        let node = format!("WE-{code}");
        out.push(site(
            format!("{CSE}/AE-WE/{node}"),
            placed(sim::we_profile(), &node),
            Some("iiith-env-weather"),
            format!("Weather station {node}"),
        ));
    }
    for node in ["WM-WF-PH01-00", "WM-WF-KB04-00"] {
        out.push(site(
            format!("{CSE}/AE-WM-WF/{node}"),
            placed(sim::wm_profile(), node),
            Some("iiith-water-monitoring"),
            format!("Water flow node {node}"),
        ));
    }
    for node in ["EM-NC-PH02-00", "EM-KH00-00"] {
        out.push(site(
            format!("{CSE}/AE-EM/{node}"),
            placed(sim::em_profile(), node),
            Some("iiith-energy-meter"),
            format!("Energy meter {node}"),
        ));
    }
    out.push(site(format!("{CSE}/AE-SL/SL-KH00-00"), sl_profile(), Some("iiith-solar-panel"), "Solar panel SL-KH00-00".into()));
    out.push(site(format!("{CSE}/AE-CM/CM-KH95-00"), cm_profile(), None, "Crowd monitoring node CM-KH95-00".into()));
    out
}

pub fn site_of(node: &str) -> Option<Site> {
    sites().into_iter().find(|s| s.node() == node)
}

/// AE names in creation order.
pub fn aes() -> Vec<String> {
    let mut v: Vec<String> = Vec::new();
    for s in sites() {
        if !v.iter().any(|a| a == s.ae()) {
            v.push(s.ae().to_owned());
        }
    }
    v
}

/// Every node is its own feature of interest.
pub fn knowledge_base() -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for s in sites() {
        kb.upsert(KnowledgeBaseEntry::from_descriptor(&s.descriptor(), s.node()));
    }
    kb
}

/// Operating range and reporting period of every parameter.
pub fn factors() -> FactorTable {
    let mut f = Vec::new();
    for s in sites() {
        for spec in &s.profile.params {
            f.push(QualityFactor::range(s.node(), &spec.name, spec.min, spec.max));
            f.push(QualityFactor::delay(s.node(), &spec.name, s.profile.period_secs));
        }
    }
    FactorTable::new(f).expect("campus factors are consistent")
}

pub fn catalogue() -> Catalogue {
    let c = campus_catalogue();
    for s in sites() {
        let Some(group) = s.group else { continue };
        let tags = s.profile.params.iter().map(|p| p.name.to_ascii_lowercase()).collect();
        c.add_item(
            group,
            s.node(),
            &s.label,
            &format!("{} at IIIT Hyderabad, publishing every {} seconds", s.label, s.profile.period_secs),
            tags,
            ItemLocation::point(s.profile.latitude, s.profile.longitude, "IIIT Hyderabad"),
            CREATED_AT,
        )
        .expect("campus groups exist");
    }
    c
}

pub fn register_demo_users(auth: &TokenService) {
    auth.register(DEMO_USER, DEMO_USER_SECRET);
    let group = auth_group_id(DEMO_GRANT);
    auth.grant(DEMO_USER, &group).expect("campus groups exist");
}

pub fn auth_group_id(name: &str) -> String {
    campus_catalogue().group_id(name)
}

/// Content of the demo points seeded on [`DEMO_NODE`]: four readings above
/// 30 in the first minute of [`DEMO_T0`], three at or below it, and one
/// just after the minute.
pub fn demo_points() -> Vec<String> {
    let pm = [(5, 31.2), (12, 29.6), (20, 30.6), (28, 30.0), (35, 30.7), (43, 12.4), (50, 31.3), (75, 35.0)];
    pm.iter()
        .map(|(dt, v)| format!("[{}, {v}, 61.5, 24.1, 52.3, 1.02, 0.48, 2.1, 88, 2, 0, 15]", DEMO_T0 + dt))
        .collect()
}
