//! The three assessments. Each is a pure function of the observation, the
//! stream state and the applicable factor.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::enrich::EnrichedObservation;

/// Per-stream memory: the last accepted result time and how often each
/// uri has been received.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamState {
    pub t_last: Option<i64>,
    pub last_uri: Option<String>,
    pub receptions: HashMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplicacy {
    /// `prev` is the result time the stream had before this one.
    NonDuplicate { prev: Option<i64> },
    /// Receptions of this uri so far, this one included.
    Duplicate { count: u32 },
}

/// `t_new <= t_last` is a duplicate. A non-duplicate moves `t_last`.
pub fn assess_duplicacy(obs: &EnrichedObservation, state: &mut StreamState) -> Duplicacy {
    match state.t_last {
        Some(last) if obs.t_new <= last => {
            let c = state.receptions.entry(obs.uri.clone()).or_insert(0);
            *c += 1;
            Duplicacy::Duplicate { count: *c }
        }
        prev => {
            state.t_last = Some(obs.t_new);
            state.last_uri = Some(obs.uri.clone());
            state.receptions.insert(obs.uri.clone(), 1);
            Duplicacy::NonDuplicate { prev }
        }
    }
}

/// Excess of the gap over the expected delay, never negative. The first
/// observation of a stream has none.
pub fn time_delay(prev: Option<i64>, t_new: i64, expected: i64) -> i64 {
    prev.map_or(0, |p| (t_new - p - expected).max(0))
}

/// `(transmissionDelay, timeDelay)`. The first may be negative when the
/// device clock runs ahead.
pub fn assess_delay(obs: &EnrichedObservation, prev: Option<i64>, expected: i64) -> (i64, i64) {
    (obs.t_rec - obs.t_new, time_delay(prev, obs.t_new, expected))
}

/// Closed interval; a missing reading is out of range.
pub fn is_out_of_range(value: Option<f64>, min: f64, max: f64) -> bool {
    match value {
        Some(v) => !(v >= min && v <= max),
        None => true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssessmentResult {
    pub num_of_duplicates: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission_delay: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_delay: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_out_of_range: Option<bool>,
}

/// Reception count as stored: 0 for a single reception, n for n.
pub fn stored_count(receptions: u32) -> u32 {
    if receptions <= 1 {
        0
    } else {
        receptions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrich::mint_uri;

    fn obs(t_new: i64, t_rec: i64) -> EnrichedObservation {
        EnrichedObservation {
            uri: mint_uri("N", "p", t_new),
            node: "N".into(),
            foi: "f".into(),
            property: "p".into(),
            value: Some(1.0),
            unit: String::new(),
            datatype: "float".into(),
            sensor: String::new(),
            t_new,
            t_rec,
        }
    }

    #[test]
    fn duplicate_boundary() {
        let mut s = StreamState::default();
        assert_eq!(assess_duplicacy(&obs(100, 100), &mut s), Duplicacy::NonDuplicate { prev: None });
        assert_eq!(assess_duplicacy(&obs(100, 102), &mut s), Duplicacy::Duplicate { count: 2 });
        assert_eq!(assess_duplicacy(&obs(101, 102), &mut s), Duplicacy::NonDuplicate { prev: Some(100) });
        assert_eq!(s.t_last, Some(101));
    }

    #[test]
    fn three_receptions_count_three() {
        let mut s = StreamState::default();
        let o = obs(10, 10);
        assess_duplicacy(&o, &mut s);
        assess_duplicacy(&o, &mut s);
        assert_eq!(assess_duplicacy(&o, &mut s), Duplicacy::Duplicate { count: 3 });
        assert_eq!(stored_count(1), 0);
        assert_eq!(stored_count(3), 3);
    }

    #[test]
    fn delays() {
        assert_eq!(time_delay(Some(0), 15, 15), 0);
        assert_eq!(time_delay(Some(0), 55, 15), 40);
        assert_eq!(time_delay(Some(0), 10, 15), 0);
        assert_eq!(time_delay(None, 1000, 15), 0);
        assert_eq!(assess_delay(&obs(100, 140), Some(85), 15), (40, 0));
        assert_eq!(assess_delay(&obs(100, 97), Some(40), 15), (-3, 45));
    }

    #[test]
    fn ranges() {
        assert!(is_out_of_range(Some(0.021), 0.03, 1.0));
        assert!(!is_out_of_range(Some(0.5), 0.03, 1.0));
        assert!(!is_out_of_range(Some(0.03), 0.03, 1.0));
        assert!(!is_out_of_range(Some(1.0), 0.03, 1.0));
        assert!(is_out_of_range(Some(1.0 + 1e-9), 0.03, 1.0));
        assert!(is_out_of_range(None, 0.03, 1.0));
        assert!(is_out_of_range(Some(f64::NAN), 0.03, 1.0));
    }
}
