//! Seeded sensor-node simulators with fault injection.
//!
//! A run walks the node's sampling slots. Each slot is delivered zero or
//! more times (drops, retransmissions), may carry nulls or out-of-range
//! values, and reaches the platform after a transmission delay. Every
//! emitted record carries what was injected so the log doubles as ground
//! truth for the quality pipeline.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use citylab_resource::clock::{
    deployment_offset, epoch_to_utc, format_descriptor_stamp, OPEN_END_STAMP,
};
use citylab_resource::descriptor::{DeviceModel, Location, ParameterDescription, VersionEntry};
use citylab_resource::DescriptorRecord;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pdu::LAYOUT;

pub const TIMESTAMP: &str = "Timestamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    /// Valid range; generated clean values stay inside it.
    pub min: f64,
    pub max: f64,
    pub base: f64,
    /// Daily sinusoid amplitude.
    #[serde(default)]
    pub amplitude: f64,
    /// Uniform noise half-width.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "two")]
    pub decimals: u32,
}

fn two() -> u32 {
    2
}

fn param(
    name: &str,
    unit: &str,
    min: f64,
    max: f64,
    base: f64,
    amplitude: f64,
    noise: f64,
    decimals: u32,
) -> ParamSpec {
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

/// Exact counts instead of probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPlan {
    /// `received[k]` slots are delivered `k + 1` times; the remaining
    /// slots are lost.
    pub received: Vec<usize>,
    #[serde(default)]
    pub outliers: usize,
    #[serde(default)]
    pub nulls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultPlan {
    /// Chance a delivered slot is retransmitted.
    pub duplicate_prob: f64,
    /// Retransmissions per duplicated slot are uniform in 1..=max_extra_copies.
    pub max_extra_copies: u32,
    pub drop_prob: f64,
    pub delay_min_secs: i64,
    pub delay_max_secs: i64,
    /// Sampling jitter added to the nominal slot time, < period.
    pub jitter_max_secs: i64,
    /// Gap between retransmissions as seen by the platform.
    pub retry_gap_secs: i64,
    /// Per value.
    pub outlier_prob: f64,
    pub null_prob: f64,
    pub exact: Option<ExactPlan>,
}

impl Default for FaultPlan {
    fn default() -> Self {
        Self::none()
    }
}

impl FaultPlan {
    pub fn none() -> Self {
        Self {
            duplicate_prob: 0.0,
            max_extra_copies: 3,
            drop_prob: 0.0,
            delay_min_secs: 0,
            delay_max_secs: 0,
            jitter_max_secs: 0,
            retry_gap_secs: 2,
            outlier_prob: 0.0,
            null_prob: 0.0,
            exact: None,
        }
    }

    /// A noisy node: retransmissions, losses, 30-40 s delays, some bad values.
    pub fn typical() -> Self {
        Self {
            duplicate_prob: 0.3,
            max_extra_copies: 3,
            drop_prob: 0.1,
            delay_min_secs: 30,
            delay_max_secs: 40,
            jitter_max_secs: 3,
            retry_gap_secs: 2,
            outlier_prob: 0.01,
            null_prob: 0.01,
            exact: None,
        }
    }

    /// One day of the classroom air-quality node: 1747 slots received
    /// once, 1196 twice, 283 three times, 247 four times.
    pub fn aq_day() -> Self {
        Self {
            exact: Some(ExactPlan {
                received: vec![1747, 1196, 283, 247],
                outliers: 40,
                nulls: 25,
            }),
            delay_min_secs: 30,
            delay_max_secs: 40,
            jitter_max_secs: 3,
            ..Self::none()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub node: String,
    /// AE label, e.g. `AE-AQ` or `AE-WM-WF`.
    pub ae: String,
    pub version: String,
    pub period_secs: i64,
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub faults: FaultPlan,
    #[serde(default)]
    pub latitude: f64,
    #[serde(default)]
    pub longitude: f64,
    #[serde(default)]
    pub device: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid profile: {0}")]
pub struct ProfileError(pub String);

impl SimProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |m: String| Err(ProfileError(m));
        if self.period_secs <= 0 {
            return bad("sampling period must be positive".into());
        }
        let f = &self.faults;
        if f.jitter_max_secs < 0 || f.jitter_max_secs >= self.period_secs {
            return bad("jitter must be in [0, period)".into());
        }
        if f.delay_min_secs > f.delay_max_secs {
            return bad("delay_min exceeds delay_max".into());
        }
        for p in [f.duplicate_prob, f.drop_prob, f.outlier_prob, f.null_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        for p in &self.params {
            if !(p.min <= p.max) {
                return bad(format!("{}: min exceeds max", p.name));
            }
        }
        if self.params.iter().any(|p| p.name == TIMESTAMP) {
            return bad("Timestamp is implicit".into());
        }
        Ok(())
    }

    /// Data string parameters, Timestamp first.
    pub fn parameter_names(&self) -> Vec<String> {
        std::iter::once(TIMESTAMP.to_owned())
            .chain(self.params.iter().map(|p| p.name.clone()))
            .collect()
    }

    pub fn slots(&self, duration_secs: i64) -> u64 {
        (duration_secs.max(0) / self.period_secs) as u64
    }

    /// Node descriptor as stored in its Descriptor container.
    pub fn descriptor(&self) -> DescriptorRecord {
        let mut d = DescriptorRecord::with_parameters(&self.node, self.parameter_names());
        d.location = Location {
            latitude: self.latitude,
            longitude: self.longitude,
        };
        d.device_model = DeviceModel {
            controller: "ESP32".into(),
            device: self.device.clone(),
            sensors: self.parameter_names(),
        };
        d.versions = vec![VersionEntry {
            ver: self.version.clone(),
            dt_start: "01-01-2021 00-00-00".into(),
            dt_end: OPEN_END_STAMP.into(),
            sensors: BTreeMap::new(),
            comments: String::new(),
        }];
        d.descriptions.insert(
            TIMESTAMP.into(),
            ParameterDescription {
                description: "Seconds since 1970-01-01 00:00:00 UTC".into(),
                datatype: "int".into(),
                unit: "s".into(),
                resolution: format!("{} s", self.period_secs),
                accuracy: "n/a".into(),
            },
        );
        for p in &self.params {
            d.descriptions.insert(
                p.name.clone(),
                ParameterDescription {
                    description: format!("The instantaneous value of {}", p.name),
                    datatype: "float".into(),
                    unit: p.unit.clone(),
                    resolution: format!("{}", 10f64.powi(-(p.decimals as i32))),
                    accuracy: "n/a".into(),
                },
            );
        }
        d
    }

    /// Labels carried by every data instance.
    pub fn labels(&self) -> Vec<String> {
        let family = self.ae.trim_start_matches("AE-");
        vec![
            self.ae.clone(),
            self.node.clone(),
            self.version.clone(),
            format!("{family}-{}", self.version),
        ]
    }
}

pub fn aq_profile() -> SimProfile {
    SimProfile {
        node: "AQ-KH00-00".into(),
        ae: "AE-AQ".into(),
        version: "V3.0.02".into(),
        period_secs: 15,
        params: vec![
            param("PM2.5", "ug/m3", 0.0, 250.0, 30.0, 10.0, 5.0, 2),
            param("PM10", "ug/m3", 0.0, 430.0, 60.0, 20.0, 10.0, 2),
            param("Temperature", "degC", 10.0, 45.0, 27.0, 4.0, 1.0, 2),
            param("Relative Humidity", "%", 5.0, 100.0, 50.0, 15.0, 5.0, 2),
            param("CO Concentration", "ppm", 0.0, 50.0, 1.0, 0.5, 0.2, 2),
            param("NO2 Concentration", "ppm", 0.0, 10.0, 0.5, 0.2, 0.1, 2),
            param("NH3 Concentration", "ppm", 0.0, 100.0, 2.0, 1.0, 0.5, 2),
            param("AQI", "", 0.0, 500.0, 90.0, 20.0, 5.0, 2),
            param("AQL", "", 0.0, 5.0, 2.0, 1.0, 0.0, 0),
            param("AQI-MP", "", 0.0, 1.0, 0.0, 0.0, 0.0, 0),
            param("Data Interval", "s", 15.0, 15.0, 15.0, 0.0, 0.0, 0),
        ],
        faults: FaultPlan::none(),
        latitude: 17.445,
        longitude: 78.349,
        device: "Air Quality node in a classroom".into(),
    }
}

pub fn wm_profile() -> SimProfile {
    SimProfile {
        node: "WM-WF-PH01-00".into(),
        ae: "AE-WM-WF".into(),
        version: "V6.0.0".into(),
        period_secs: 180,
        params: vec![
            param("Flowrate", "m³/h", 0.0, 2000.0, 867.0, 200.0, 50.0, 2),
            param("Total Flow", "m³", 0.0, 1.0e8, 3091168.0, 0.0, 10.0, 2),
            param("Pressure", "bar", 0.0, 500.0, 260.0, 30.0, 10.0, 2),
            param("Pressure Voltage", "V", 0.03, 1.0, 0.5, 0.2, 0.05, 6),
        ],
        faults: FaultPlan::none(),
        latitude: 17.445793,
        longitude: 78.351444,
        device: "Water Flow node with Flow Rate, Total Flow and Pressure".into(),
    }
}

pub fn we_profile() -> SimProfile {
    SimProfile {
        node: "WE-GS04-00".into(),
        ae: "AE-WE".into(),
        version: "V1.0.0".into(),
        period_secs: 60,
        params: vec![
            param("Temperature", "degC", -5.0, 50.0, 28.0, 5.0, 1.0, 2),
            param("Relative Humidity", "%", 0.0, 100.0, 55.0, 15.0, 3.0, 2),
            param("Wind Speed", "m/s", 0.0, 40.0, 3.0, 2.0, 1.0, 2),
            param("Wind Direction", "deg", 0.0, 360.0, 180.0, 90.0, 30.0, 1),
            param("Rain", "mm", 0.0, 200.0, 0.0, 0.0, 0.0, 2),
            param(
                "Solar Radiation",
                "W/m2",
                0.0,
                1400.0,
                400.0,
                400.0,
                50.0,
                1,
            ),
        ],
        faults: FaultPlan::none(),
        latitude: 17.4456,
        longitude: 78.3497,
        device: "Weather Station on the rooftop".into(),
    }
}

/// Energy meter registers, in payload order.
pub fn em_profile() -> SimProfile {
    let ranges: [(f64, f64, f64, f64, u32); 14] = [
        (0.0, 100.0, 1.15, 0.3, 3),
        (0.0, 100.0, 1.14, 0.3, 3),
        (0.0, 100.0, 1.13, 0.3, 3),
        (180.0, 260.0, 232.0, 3.0, 2),
        (180.0, 260.0, 233.0, 3.0, 2),
        (180.0, 260.0, 234.0, 3.0, 2),
        (0.0, 1.0, 0.76, 0.1, 2),
        (49.0, 51.0, 49.99, 0.05, 2),
        (0.0, 100.0, 0.8, 0.2, 3),
        (0.0, 100.0, 0.6, 0.2, 3),
        (0.0, 1.0e6, 2106.89, 0.0, 2),
        (0.0, 1.0e6, 1436.87, 0.0, 2),
        (0.0, 1.0e6, 5.4, 0.0, 2),
        (0.0, 1.0e6, 2732.35, 0.0, 2),
    ];
    SimProfile {
        node: "EM-NC-PH02-00".into(),
        ae: "AE-EM".into(),
        version: "V1.0.0".into(),
        period_secs: 900,
        params: LAYOUT
            .iter()
            .zip(ranges)
            .map(|(f, (min, max, base, amp, d))| {
                param(f.name, f.unit, min, max, base, amp, amp / 4.0, d)
            })
            .collect(),
        faults: FaultPlan::none(),
        latitude: 17.4468,
        longitude: 78.3486,
        device: "Energy Meter in the pump room".into(),
    }
}

pub fn builtin_profile(name: &str) -> Option<SimProfile> {
    match name.to_ascii_lowercase().as_str() {
        "aq" | "air" => Some(aq_profile()),
        "wm" | "water" => Some(wm_profile()),
        "we" | "weather" => Some(we_profile()),
        "em" | "energy" => Some(em_profile()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Injected {
    Outlier,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub seq: u64,
    pub node: String,
    pub slot: u64,
    /// 0 for the first transmission of a slot.
    pub copy: u32,
    /// Transmissions this slot gets in total.
    pub copies: u32,
    /// Epoch seconds, the payload's Timestamp.
    pub observed_at: i64,
    /// Epoch seconds the platform records it.
    pub recorded_at: i64,
    /// Values after Timestamp, `None` for null.
    pub values: Vec<Option<f64>>,
    /// Injected faults by parameter index into `values`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub injected: BTreeMap<usize, Injected>,
}

impl SimRecord {
    /// Positional content, `[1646491691, 23.5, nan, ...]`.
    pub fn con(&self) -> String {
        let mut parts = vec![self.observed_at.to_string()];
        parts.extend(self.values.iter().map(|v| match v {
            Some(x) => format!("{x}"),
            None => "nan".into(),
        }));
        format!("[{}]", parts.join(", "))
    }
}

fn round_to(v: f64, decimals: u32) -> f64 {
    let m = 10f64.powi(decimals as i32);
    (v * m).round() / m
}

/// Runs `profile` for `duration_secs` starting at epoch `start`.
pub fn simulate(
    profile: &SimProfile,
    start: i64,
    duration_secs: i64,
    seed: u64,
) -> Result<Vec<SimRecord>, ProfileError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = profile.slots(duration_secs);
    let f = &profile.faults;
    let np = profile.params.len();

    // per-slot transmission count and per-value fault, fixed up front in exact mode
    let (copies_of, exact_faults): (Vec<u32>, Option<BTreeMap<(u64, usize), Injected>>) =
        match &f.exact {
            Some(plan) => {
                let delivered: usize = plan.received.iter().sum();
                if delivered as u64 > n {
                    return Err(ProfileError(format!(
                        "{delivered} delivered slots exceed {n} slots"
                    )));
                }
                let mut counts = Vec::with_capacity(n as usize);
                for (k, &c) in plan.received.iter().enumerate() {
                    counts.extend(std::iter::repeat((k + 1) as u32).take(c));
                }
                counts.resize(n as usize, 0);
                counts.shuffle(&mut rng);
                let live: Vec<u64> = (0..n).filter(|&s| counts[s as usize] > 0).collect();
                let mut cells: Vec<(u64, usize)> = live
                    .iter()
                    .flat_map(|&s| (0..np).map(move |p| (s, p)))
                    .collect();
                if plan.outliers + plan.nulls > cells.len() {
                    return Err(ProfileError(
                        "more faulty values than delivered values".into(),
                    ));
                }
                cells.shuffle(&mut rng);
                let mut faults = BTreeMap::new();
                for &c in &cells[..plan.outliers] {
                    faults.insert(c, Injected::Outlier);
                }
                for &c in &cells[plan.outliers..plan.outliers + plan.nulls] {
                    faults.insert(c, Injected::Null);
                }
                (counts, Some(faults))
            }
            None => (Vec::new(), None),
        };

    let mut out = Vec::new();
    let mut seq = 0u64;
    for slot in 0..n {
        // draw everything for the slot in a fixed order so the stream is
        // reproducible whatever the fault settings
        let jitter = if f.jitter_max_secs > 0 {
            rng.gen_range(0..=f.jitter_max_secs)
        } else {
            0
        };
        let observed_at = start + slot as i64 * profile.period_secs + jitter;
        let copies = match &f.exact {
            Some(_) => copies_of[slot as usize],
            None => {
                if rng.gen_bool(f.drop_prob) {
                    0
                } else if rng.gen_bool(f.duplicate_prob) && f.max_extra_copies > 0 {
                    1 + rng.gen_range(1..=f.max_extra_copies)
                } else {
                    1
                }
            }
        };
        let delay = rng.gen_range(f.delay_min_secs..=f.delay_max_secs);
        let tod = observed_at.rem_euclid(86_400) as f64 / 86_400.0;
        let mut values = Vec::with_capacity(np);
        let mut injected = BTreeMap::new();
        for (i, p) in profile.params.iter().enumerate() {
            let fault = match &exact_faults {
                Some(m) => m.get(&(slot, i)).copied(),
                None => {
                    let roll: f64 = rng.gen();
                    if roll < f.null_prob {
                        Some(Injected::Null)
                    } else if roll < f.null_prob + f.outlier_prob {
                        Some(Injected::Outlier)
                    } else {
                        None
                    }
                }
            };
            let noise = if p.noise > 0.0 {
                rng.gen_range(-p.noise..=p.noise)
            } else {
                0.0
            };
            let above: bool = rng.gen();
            let margin = (p.max - p.min).max(1.0) * rng.gen_range(0.1..1.0);
            let v = match fault {
                Some(Injected::Null) => None,
                Some(Injected::Outlier) => {
                    let raw = if above {
                        p.max + margin
                    } else {
                        p.min - margin
                    };
                    let r = round_to(raw, p.decimals);
                    // coarse rounding may pull it back onto the bound
                    let step = 10f64.powi(-(p.decimals as i32));
                    Some(if above {
                        r.max(round_to(p.max + step, p.decimals))
                    } else {
                        r.min(round_to(p.min - step, p.decimals))
                    })
                }
                None => {
                    let clean = p.base + p.amplitude * (std::f64::consts::TAU * tod).sin() + noise;
                    let r = round_to(clean.clamp(p.min, p.max), p.decimals);
                    Some(r.clamp(p.min, p.max))
                }
            };
            if let Some(kind) = fault {
                injected.insert(i, kind);
            }
            values.push(v);
        }
        for copy in 0..copies {
            out.push(SimRecord {
                seq,
                node: profile.node.clone(),
                slot,
                copy,
                copies,
                observed_at,
                recorded_at: observed_at + delay + copy as i64 * f.retry_gap_secs,
                values: values.clone(),
                injected: injected.clone(),
            });
            seq += 1;
        }
    }
    Ok(out)
}

/// What a correct quality pipeline must report for a run, tallied from
/// the simulator's own bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub node: String,
    pub slots: u64,
    pub emitted: usize,
    pub delivered_slots: usize,
    /// Transmissions per slot to number of slots.
    pub distribution: BTreeMap<u32, usize>,
    /// Per delivered slot in order: (observation time, excess gap, transmission delay).
    pub delays: Vec<(i64, i64, i64)>,
    /// Per parameter: (in range, out of range) over delivered slots.
    pub range: BTreeMap<String, (usize, usize)>,
}

pub fn ground_truth(profile: &SimProfile, slots: u64, records: &[SimRecord]) -> GroundTruth {
    let mut distribution = BTreeMap::new();
    let mut delays = Vec::new();
    let mut range: BTreeMap<String, (usize, usize)> = profile
        .params
        .iter()
        .map(|p| (p.name.clone(), (0, 0)))
        .collect();
    let mut prev: Option<i64> = None;
    for r in records.iter().filter(|r| r.copy == 0) {
        *distribution.entry(r.copies).or_insert(0) += 1;
        let excess = match prev {
            None => 0,
            Some(p) => (r.observed_at - p - profile.period_secs).max(0),
        };
        delays.push((r.observed_at, excess, r.recorded_at - r.observed_at));
        prev = Some(r.observed_at);
        for (i, p) in profile.params.iter().enumerate() {
            let e = range.get_mut(&p.name).expect("param listed");
            if r.injected.contains_key(&i) {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
    }
    GroundTruth {
        node: profile.node.clone(),
        slots,
        emitted: records.len(),
        delivered_slots: delays.len(),
        distribution,
        delays,
        range,
    }
}

/// One JSON record per line.
pub fn write_log(path: &Path, records: &[SimRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_log(path: &Path) -> std::io::Result<Vec<SimRecord>> {
    let mut out = Vec::new();
    for line in std::io::BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

/// `dt_start`-style stamp of an epoch second, handy for descriptor versions.
pub fn local_stamp(epoch: i64) -> String {
    format_descriptor_stamp(
        epoch_to_utc(epoch).expect("valid epoch"),
        deployment_offset(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_day_has_table_counts() {
        for (p, n) in [
            (em_profile(), 96),
            (wm_profile(), 480),
            (we_profile(), 1440),
            (aq_profile(), 5760),
        ] {
            let recs = simulate(&p, 1_640_995_200, 86_400, 1).unwrap();
            assert_eq!(recs.len(), n, "{}", p.node);
            assert!(recs.iter().all(|r| r.injected.is_empty() && r.copies == 1));
        }
    }

    #[test]
    fn zero_duration_is_empty() {
        assert!(simulate(&aq_profile(), 0, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn forced_duplicate() {
        let mut p = aq_profile();
        p.faults.duplicate_prob = 1.0;
        p.faults.max_extra_copies = 1;
        let recs = simulate(&p, 0, 15, 9).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].observed_at, recs[1].observed_at);
        assert_eq!(recs[0].con(), recs[1].con());
    }

    #[test]
    fn exact_plan_is_exact() {
        let mut p = aq_profile();
        p.faults = FaultPlan::aq_day();
        let recs = simulate(&p, 1_646_438_400, 86_400, 7).unwrap();
        let truth = ground_truth(&p, 5760, &recs);
        assert_eq!(
            truth.distribution,
            BTreeMap::from([(1, 1747), (2, 1196), (3, 283), (4, 247)])
        );
        assert_eq!(truth.delivered_slots, 3473);
        assert_eq!(recs.len(), 1747 + 2 * 1196 + 3 * 283 + 4 * 247);
        let outs: usize = truth.range.values().map(|v| v.1).sum();
        assert_eq!(outs, 65);
    }

    #[test]
    fn injected_values_are_out_of_range_and_clean_ones_in() {
        for mut p in [wm_profile(), aq_profile()] {
            p.faults = FaultPlan {
                outlier_prob: 0.2,
                null_prob: 0.1,
                ..FaultPlan::none()
            };
            for r in simulate(&p, 0, 86_400, 3).unwrap() {
                for (i, (v, spec)) in r.values.iter().zip(&p.params).enumerate() {
                    let inside = v.is_some_and(|x| x >= spec.min && x <= spec.max);
                    assert_eq!(
                        inside,
                        !r.injected.contains_key(&i),
                        "{} {:?}",
                        spec.name,
                        v
                    );
                }
            }
        }
    }

    #[test]
    fn con_round_trips_values() {
        let mut p = aq_profile();
        p.faults = FaultPlan::typical();
        for r in simulate(&p, 1_000_000, 3600, 5).unwrap() {
            let parsed = citylab_resource::parse_positional(&r.con()).unwrap();
            assert_eq!(parsed[0].as_f64(), Some(r.observed_at as f64));
            for (a, b) in parsed[1..].iter().zip(&r.values) {
                assert_eq!(a.as_f64(), *b);
            }
        }
    }

    #[test]
    fn descriptor_matches_payload_arity() {
        let p = aq_profile();
        let d = p.descriptor();
        d.validate(deployment_offset()).unwrap();
        let r = &simulate(&p, 0, 15, 1).unwrap()[0];
        citylab_resource::parse_positional_payload(&d, &r.con()).unwrap();
        assert_eq!(d.parameters.len(), 12);
    }
}
