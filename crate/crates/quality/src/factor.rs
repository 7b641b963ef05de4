//! Quality factors: expected value ranges and expected sampling delays per
//! feature of interest and observed property, optionally restricted to a
//! local time-of-day window.

use std::fmt;
use std::path::Path;

use chrono::FixedOffset;
use citylab_resource::clock::deployment_offset;
use serde::{Deserialize, Serialize};

use crate::error::{QualityError, Result};

const DAY: u32 = 86_400;

/// `[start, end)` in local seconds of day. `end` may be 24:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeWindow {
    pub start: u32,
    pub end: u32,
}

fn parse_hms(s: &str) -> Option<u32> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let n: Vec<u32> = parts.iter().map(|p| p.parse().ok()).collect::<Option<_>>()?;
    let (h, m, s) = (n[0], n[1], n.get(2).copied().unwrap_or(0));
    if m >= 60 || s >= 60 {
        return None;
    }
    let t = h * 3600 + m * 60 + s;
    (t <= DAY).then_some(t)
}

impl TimeWindow {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if start >= end || end > DAY {
            return Err(QualityError::InvalidFactor(format!("empty or oversized window {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn whole_day() -> Self {
        Self { start: 0, end: DAY }
    }

    pub fn contains(&self, second_of_day: u32) -> bool {
        second_of_day >= self.start && second_of_day < self.end
    }

    fn overlaps(&self, o: &TimeWindow) -> bool {
        self.start < o.end && o.start < self.end
    }
}

impl TryFrom<String> for TimeWindow {
    type Error = QualityError;

    /// `06:00-18:00` or `06:00:00-18:00:00`.
    fn try_from(s: String) -> Result<Self> {
        let bad = || QualityError::InvalidFactor(format!("window {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        Self::new(parse_hms(a).ok_or_else(bad)?, parse_hms(b).ok_or_else(bad)?)
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hms = |t: u32| format!("{:02}:{:02}:{:02}", t / 3600, t / 60 % 60, t % 60);
        write!(f, "{}-{}", hms(self.start), hms(self.end))
    }
}

impl From<TimeWindow> for String {
    fn from(w: TimeWindow) -> Self {
        w.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FactorKind {
    RangeValue { min: f64, max: f64 },
    ExpectedDelay { delay_secs: i64 },
}

impl FactorKind {
    fn name(&self) -> &'static str {
        match self {
            FactorKind::RangeValue { .. } => "RangeValue",
            FactorKind::ExpectedDelay { .. } => "ExpectedDelay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityFactor {
    pub foi: String,
    pub property: String,
    /// `None` is the whole-day default, used where no window matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<TimeWindow>,
    #[serde(flatten)]
    pub kind: FactorKind,
}

impl QualityFactor {
    pub fn range(foi: &str, property: &str, min: f64, max: f64) -> Self {
        Self {
            foi: foi.into(),
            property: property.into(),
            interval: None,
            kind: FactorKind::RangeValue { min, max },
        }
    }

    pub fn delay(foi: &str, property: &str, secs: i64) -> Self {
        Self {
            foi: foi.into(),
            property: property.into(),
            interval: None,
            kind: FactorKind::ExpectedDelay { delay_secs: secs },
        }
    }

    pub fn during(mut self, w: TimeWindow) -> Self {
        self.interval = Some(w);
        self
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FactorKind::RangeValue { min, max } if !(min.is_finite() && max.is_finite() && min <= max) => Err(
                QualityError::InvalidFactor(format!("{}/{}: min {min} > max {max}", self.foi, self.property)),
            ),
            FactorKind::ExpectedDelay { delay_secs } if delay_secs <= 0 => Err(QualityError::InvalidFactor(format!(
                "{}/{}: delay {delay_secs} must be positive",
                self.foi, self.property
            ))),
            _ => Ok(()),
        }
    }

    fn same_slot(&self, o: &QualityFactor) -> bool {
        self.foi == o.foi && self.property == o.property && self.kind.name() == o.kind.name()
    }
}

#[derive(Debug, Clone)]
pub struct FactorTable {
    factors: Vec<QualityFactor>,
    offset: FixedOffset,
}

impl Default for FactorTable {
    fn default() -> Self {
        Self {
            factors: Vec::new(),
            offset: deployment_offset(),
        }
    }
}

impl FactorTable {
    /// Rejects inverted ranges, non-positive delays, overlapping windows
    /// and a second default for the same slot.
    pub fn new(factors: Vec<QualityFactor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            f.validate()?;
            for g in &factors[..i] {
                if !f.same_slot(g) {
                    continue;
                }
                let clash = match (f.interval, g.interval) {
                    (None, None) => true,
                    (Some(a), Some(b)) => a.overlaps(&b),
                    _ => false,
                };
                if clash {
                    return Err(QualityError::InvalidFactor(format!(
                        "overlapping {} windows for {}/{}",
                        f.kind.name(),
                        f.foi,
                        f.property
                    )));
                }
            }
        }
        Ok(Self {
            factors,
            offset: deployment_offset(),
        })
    }

    /// Local time zone of the windows.
    pub fn with_offset(mut self, offset: FixedOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn factors(&self) -> &[QualityFactor] {
        &self.factors
    }

    pub fn second_of_day(&self, epoch: i64) -> u32 {
        (epoch + self.offset.local_minus_utc() as i64).rem_euclid(DAY as i64) as u32
    }

    fn select(&self, kind: &str, foi: &str, property: &str, epoch: i64) -> Option<&FactorKind> {
        let tod = self.second_of_day(epoch);
        let mut fallback = None;
        for f in &self.factors {
            if f.foi != foi || f.property != property || f.kind.name() != kind {
                continue;
            }
            match f.interval {
                Some(w) if w.contains(tod) => return Some(&f.kind),
                Some(_) => {}
                None => fallback = Some(&f.kind),
            }
        }
        fallback
    }

    pub fn range_for(&self, foi: &str, property: &str, epoch: i64) -> Option<(f64, f64)> {
        match self.select("RangeValue", foi, property, epoch)? {
            FactorKind::RangeValue { min, max } => Some((*min, *max)),
            _ => None,
        }
    }

    pub fn delay_for(&self, foi: &str, property: &str, epoch: i64) -> Option<i64> {
        match self.select("ExpectedDelay", foi, property, epoch)? {
            FactorKind::ExpectedDelay { delay_secs } => Some(*delay_secs),
            _ => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let factors = serde_json::from_slice(&bytes).map_err(|e| QualityError::Malformed(format!("{}: {e}", path.display())))?;
        Self::new(factors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.factors).expect("json"))?;
        Ok(())
    }
}
