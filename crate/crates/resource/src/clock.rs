//! Time sources and the timestamp formats used across the platform.

use std::sync::Arc;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};
use parking_lot::Mutex;

/// Offset of the campus deployment (+05:30).
pub const DEPLOYMENT_OFFSET_SECS: i32 = 5 * 3600 + 30 * 60;

pub fn deployment_offset() -> FixedOffset {
    FixedOffset::east_opt(DEPLOYMENT_OFFSET_SECS).expect("valid offset")
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Clone)]
pub struct ManualClock(Arc<Mutex<DateTime<Utc>>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Arc::new(Mutex::new(start)))
    }

    pub fn at_epoch(secs: i64) -> Self {
        Self::new(Utc.timestamp_opt(secs, 0).single().expect("valid epoch"))
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.0.lock() = t;
    }

    pub fn advance(&self, d: chrono::Duration) {
        let mut g = self.0.lock();
        *g += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

/// `20220305T201834`, the compact form used for `ct`/`lt`/`et`.
pub fn m2m_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y%m%dT%H%M%S").to_string()
}

pub fn parse_m2m_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, "%Y%m%dT%H%M%S")
        .ok()
        .map(|n| n.and_utc())
}

/// `2022-03-21T00:25:06+05:30`.
pub fn iso_with_offset(t: DateTime<Utc>, offset: FixedOffset) -> String {
    t.with_timezone(&offset)
        .format("%Y-%m-%dT%H:%M:%S%:z")
        .to_string()
}

pub fn epoch_to_utc(secs: i64) -> Option<DateTime<Utc>> {
    Utc.timestamp_opt(secs, 0).single()
}

/// Descriptor version stamps look like `26-04-2021 00-00-00` and are local
/// deployment time.
pub fn parse_descriptor_stamp(s: &str, offset: FixedOffset) -> Option<DateTime<Utc>> {
    let naive = NaiveDateTime::parse_from_str(s.trim(), "%d-%m-%Y %H-%M-%S").ok()?;
    offset
        .from_local_datetime(&naive)
        .single()
        .map(|t| t.with_timezone(&Utc))
}

pub fn format_descriptor_stamp(t: DateTime<Utc>, offset: FixedOffset) -> String {
    t.with_timezone(&offset)
        .format("%d-%m-%Y %H-%M-%S")
        .to_string()
}

/// Version intervals ending at this stamp are open-ended.
pub const OPEN_END_STAMP: &str = "31-12-9999 23-59-59";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2m_stamp_round_trip() {
        let t = parse_m2m_timestamp("20220219T123355").unwrap();
        assert_eq!(m2m_timestamp(t), "20220219T123355");
    }

    #[test]
    fn descriptor_stamp_is_local_time() {
        let t = parse_descriptor_stamp("26-04-2021 00-00-00", deployment_offset()).unwrap();
        assert_eq!(t.to_rfc3339(), "2021-04-25T18:30:00+00:00");
        assert_eq!(iso_with_offset(t, deployment_offset()), "2021-04-26T00:00:00+05:30");
        let open = parse_descriptor_stamp(OPEN_END_STAMP, deployment_offset()).unwrap();
        assert_eq!(iso_with_offset(open, deployment_offset()), "9999-12-31T23:59:59+05:30");
    }
}
