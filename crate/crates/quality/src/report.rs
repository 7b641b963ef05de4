//! Per-node quality report over a result-time window: how often slots were
//! received, transmission and sampling delays, and range verdicts.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QualityError, Result};
use crate::store::AssessedStore;

pub const DEFAULT_BIN_SECS: i64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    /// `[from, to)`.
    pub from: i64,
    pub to: i64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeTally {
    pub in_range: usize,
    pub out_of_range: usize,
}

/// One accepted result time. Delays come from the first property that
/// had a delay factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSample {
    pub t: i64,
    pub receptions: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission_delay: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_delay: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub node: String,
    pub start: i64,
    pub end: i64,
    pub slots: usize,
    /// Receptions to number of slots received that often.
    pub distribution: BTreeMap<u32, usize>,
    /// Receptions older than their stream's last result time that matched
    /// no accepted observation.
    pub late_duplicates: u64,
    pub samples: Vec<SlotSample>,
    pub bin_secs: i64,
    pub transmission_histogram: Vec<Bin>,
    pub time_delay_histogram: Vec<Bin>,
    /// Slots recorded before their result time: the device clock is ahead.
    pub clock_skewed: usize,
    pub range: BTreeMap<String, RangeTally>,
    /// Observations assessed without a factor, per factor kind.
    pub missing_factors: BTreeMap<String, usize>,
}

/// Equal-width bins from the bin holding the smallest value to the one
/// holding the largest.
pub fn histogram(values: &[i64], width: i64) -> Vec<Bin> {
    let (Some(&lo), Some(&hi)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    let first = lo.div_euclid(width);
    let last = hi.div_euclid(width);
    let mut bins: Vec<Bin> = (first..=last)
        .map(|k| Bin {
            from: k * width,
            to: (k + 1) * width,
            count: 0,
        })
        .collect();
    for v in values {
        bins[(v.div_euclid(width) - first) as usize].count += 1;
    }
    bins
}

pub fn report(store: &AssessedStore, node: &str, start: i64, end: i64, bin_secs: i64) -> Result<QualityReport> {
    let obs = store.observations(node, start, end);
    if obs.is_empty() {
        return Err(QualityError::NoData(node.to_owned()));
    }
    let bin_secs = bin_secs.max(1);
    let mut slots: BTreeMap<i64, SlotSample> = BTreeMap::new();
    let mut range: BTreeMap<String, RangeTally> = BTreeMap::new();
    let mut missing: BTreeMap<String, usize> = BTreeMap::new();
    for o in &obs {
        let s = slots.entry(o.obs.t_new).or_insert(SlotSample {
            t: o.obs.t_new,
            receptions: 0,
            transmission_delay: None,
            time_delay: None,
        });
        s.receptions = s.receptions.max(o.receptions());
        if s.transmission_delay.is_none() && o.result.transmission_delay.is_some() {
            s.transmission_delay = o.result.transmission_delay;
            s.time_delay = o.result.time_delay;
        }
        let t = range.entry(o.obs.property.clone()).or_default();
        match o.result.is_out_of_range {
            Some(true) => t.out_of_range += 1,
            _ => t.in_range += 1,
        }
        for m in &o.missing {
            *missing.entry(m.clone()).or_insert(0) += 1;
        }
    }
    let samples: Vec<SlotSample> = slots.into_values().collect();
    let mut distribution = BTreeMap::new();
    for s in &samples {
        *distribution.entry(s.receptions).or_insert(0) += 1;
    }
    let tx: Vec<i64> = samples.iter().filter_map(|s| s.transmission_delay).collect();
    let td: Vec<i64> = samples.iter().filter_map(|s| s.time_delay).collect();
    Ok(QualityReport {
        node: node.to_owned(),
        start,
        end,
        slots: samples.len(),
        distribution,
        late_duplicates: store.orphans(node, start, end).iter().map(|d| d.num_of_duplicates as u64).sum(),
        bin_secs,
        transmission_histogram: histogram(&tx, bin_secs),
        time_delay_histogram: histogram(&td, bin_secs),
        clock_skewed: tx.iter().filter(|d| **d < 0).count(),
        samples,
        range,
        missing_factors: missing,
    })
}

fn times(n: u32) -> String {
    match n {
        1 => "once".into(),
        2 => "twice".into(),
        3 => "thrice".into(),
        n => format!("{n} times"),
    }
}

impl QualityReport {
    /// Plain tables for a terminal.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "node {}  window [{}, {})  slots {}", self.node, self.start, self.end, self.slots);
        let _ = writeln!(s, "\nreceived        slots");
        for (k, v) in &self.distribution {
            let _ = writeln!(s, "{:<15} {v}", times(*k));
        }
        if self.late_duplicates > 0 {
            let _ = writeln!(s, "late duplicates {}", self.late_duplicates);
        }
        for (title, bins) in [
            ("transmission delay (s)", &self.transmission_histogram),
            ("sampling delay (s)", &self.time_delay_histogram),
        ] {
            let _ = writeln!(s, "\n{title:<23} slots");
            for b in bins {
                let _ = writeln!(s, "[{:>5}, {:>5})         {}", b.from, b.to, b.count);
            }
        }
        if self.clock_skewed > 0 {
            let _ = writeln!(s, "clock ahead of platform on {} slots", self.clock_skewed);
        }
        let _ = writeln!(s, "\nproperty                  in range  out of range");
        for (p, t) in &self.range {
            let _ = writeln!(s, "{p:<25} {:>8}  {:>12}", t.in_range, t.out_of_range);
        }
        for (k, n) in &self.missing_factors {
            let _ = writeln!(s, "missing {k} factor on {n} observations");
        }
        s
    }
}
