use serde::{Deserialize, Serialize};

pub const IDEAL_MIN_DBM: f64 = -120.0;
pub const IDEAL_MAX_DBM: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RssiClass {
    Ideal,
    /// Weak enough that packets may be lost.
    BelowIdeal,
    AboveIdeal,
}

/// Both band edges count as ideal. NaN is not in any band and lands in
/// `AboveIdeal`, the catch-all.
pub fn classify_rssi(dbm: f64) -> RssiClass {
    if (IDEAL_MIN_DBM..=IDEAL_MAX_DBM).contains(&dbm) {
        RssiClass::Ideal
    } else if dbm < IDEAL_MIN_DBM {
        RssiClass::BelowIdeal
    } else {
        RssiClass::AboveIdeal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bands() {
        assert_eq!(classify_rssi(-90.0), RssiClass::Ideal);
        assert_eq!(classify_rssi(-125.0), RssiClass::BelowIdeal);
        assert_eq!(classify_rssi(-30.0), RssiClass::Ideal);
        assert_eq!(classify_rssi(-120.0), RssiClass::Ideal);
        assert_eq!(classify_rssi(-29.9), RssiClass::AboveIdeal);
        assert_eq!(classify_rssi(-120.1), RssiClass::BelowIdeal);
    }

    proptest! {
        #[test]
        fn partition(dbm in -400.0f64..100.0) {
            let oracle = if dbm < -120.0 {
                RssiClass::BelowIdeal
            } else if dbm > -30.0 {
                RssiClass::AboveIdeal
            } else {
                RssiClass::Ideal
            };
            prop_assert_eq!(classify_rssi(dbm), oracle);
        }
    }
}
