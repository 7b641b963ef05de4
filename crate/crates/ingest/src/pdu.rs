//! Energy-meter uplink payload: fourteen unsigned big-endian registers in
//! fixed hex widths, each scaled by a power of ten.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PduError {
    #[error("payload has {found} hex chars, need at least {need}")]
    TooShort { found: usize, need: usize },
    #[error("non-hex digit {ch:?} at offset {offset}")]
    NonHexDigit { offset: usize, ch: char },
    #[error("{field} = {value} does not fit {width} hex chars")]
    FieldOverflow {
        field: &'static str,
        value: f64,
        width: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PduField {
    pub name: &'static str,
    pub unit: &'static str,
    pub width: usize,
    pub divisor: u32,
}

const fn field(name: &'static str, unit: &'static str, width: usize, divisor: u32) -> PduField {
    PduField {
        name,
        unit,
        width,
        divisor,
    }
}

/// Register order on the wire.
pub const LAYOUT: [PduField; 14] = [
    field("R Current", "A", 8, 1000),
    field("Y Current", "A", 8, 1000),
    field("B Current", "A", 8, 1000),
    field("R Voltage", "V", 4, 100),
    field("Y Voltage", "V", 4, 100),
    field("B Voltage", "V", 4, 100),
    field("Avg PF", "", 4, 100),
    field("Avg Freq", "Hz", 4, 100),
    field("Power (kVA)", "kVA", 8, 1000),
    field("Power (kW)", "kW", 8, 1000),
    field("Energy (kWh)", "kWh", 8, 100),
    field("kVRh Lead", "kVRh", 8, 100),
    field("kVRh Lag", "kVRh", 8, 100),
    field("Energy (kVAh)", "kVAh", 8, 100),
];

/// 92 hex chars, 46 bytes.
pub const PDU_HEX_LEN: usize = {
    let mut n = 0;
    let mut i = 0;
    while i < LAYOUT.len() {
        n += LAYOUT[i].width;
        i += 1;
    }
    n
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReading {
    pub r_current: f64,
    pub y_current: f64,
    pub b_current: f64,
    pub r_voltage: f64,
    pub y_voltage: f64,
    pub b_voltage: f64,
    pub avg_pf: f64,
    pub avg_freq: f64,
    pub power_kva: f64,
    pub power_kw: f64,
    pub energy_kwh: f64,
    pub kvrh_lead: f64,
    pub kvrh_lag: f64,
    pub energy_kvah: f64,
}

impl EnergyReading {
    /// Values in [`LAYOUT`] order.
    pub fn to_array(&self) -> [f64; 14] {
        [
            self.r_current,
            self.y_current,
            self.b_current,
            self.r_voltage,
            self.y_voltage,
            self.b_voltage,
            self.avg_pf,
            self.avg_freq,
            self.power_kva,
            self.power_kw,
            self.energy_kwh,
            self.kvrh_lead,
            self.kvrh_lag,
            self.energy_kvah,
        ]
    }

    pub fn from_array(v: [f64; 14]) -> Self {
        Self {
            r_current: v[0],
            y_current: v[1],
            b_current: v[2],
            r_voltage: v[3],
            y_voltage: v[4],
            b_voltage: v[5],
            avg_pf: v[6],
            avg_freq: v[7],
            power_kva: v[8],
            power_kw: v[9],
            energy_kwh: v[10],
            kvrh_lead: v[11],
            kvrh_lag: v[12],
            energy_kvah: v[13],
        }
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        LAYOUT.iter().map(|f| f.name).zip(self.to_array()).collect()
    }
}

/// Raw register values in [`LAYOUT`] order.
pub fn decode_registers(hex: &str) -> Result<[u64; 14], PduError> {
    let hex = hex.trim();
    // a bad digit is reported ahead of the length so the message points at
    // the real problem; once the layout prefix is all ASCII, slicing is safe
    check_digits(hex)?;
    if hex.len() < PDU_HEX_LEN {
        return Err(PduError::TooShort {
            found: hex.len(),
            need: PDU_HEX_LEN,
        });
    }
    let mut out = [0u64; 14];
    let mut at = 0;
    for (slot, f) in out.iter_mut().zip(LAYOUT.iter()) {
        *slot = u64::from_str_radix(&hex[at..at + f.width], 16).expect("digits checked");
        at += f.width;
    }
    Ok(out)
}

fn check_digits(hex: &str) -> Result<(), PduError> {
    match hex
        .char_indices()
        .take_while(|(i, _)| *i < PDU_HEX_LEN)
        .find(|(_, c)| !c.is_ascii_hexdigit())
    {
        Some((offset, ch)) => Err(PduError::NonHexDigit { offset, ch }),
        None => Ok(()),
    }
}

/// Trailing bytes after the 46-byte layout are ignored.
pub fn decode_pdu(hex: &str) -> Result<EnergyReading, PduError> {
    let regs = decode_registers(hex)?;
    let mut v = [0f64; 14];
    for ((out, raw), f) in v.iter_mut().zip(regs).zip(LAYOUT.iter()) {
        *out = raw as f64 / f.divisor as f64;
    }
    Ok(EnergyReading::from_array(v))
}

pub fn encode_pdu(r: &EnergyReading) -> Result<String, PduError> {
    let mut out = String::with_capacity(PDU_HEX_LEN);
    for (value, f) in r.to_array().into_iter().zip(LAYOUT.iter()) {
        let scaled = (value * f.divisor as f64).round();
        let max = 16f64.powi(f.width as i32) - 1.0;
        if !scaled.is_finite() || scaled < 0.0 || scaled > max {
            return Err(PduError::FieldOverflow {
                field: f.name,
                value,
                width: f.width,
            });
        }
        out.push_str(&format!("{:0width$X}", scaled as u64, width = f.width));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_46_bytes() {
        assert_eq!(PDU_HEX_LEN, 92);
    }

    #[test]
    fn single_slices() {
        let mut hex = "0".repeat(PDU_HEX_LEN);
        hex.replace_range(0..8, "00000480");
        // Avg PF sits after three currents and three voltages
        hex.replace_range(36..40, "004C");
        let r = decode_pdu(&hex).unwrap();
        assert_eq!(r.r_current, 1.152);
        assert_eq!(r.avg_pf, 0.76);
        assert_eq!(r.y_current, 0.0);
    }

    #[test]
    fn zeros() {
        let z = "0".repeat(PDU_HEX_LEN);
        assert_eq!(decode_pdu(&z).unwrap(), EnergyReading::default());
        assert_eq!(encode_pdu(&EnergyReading::default()).unwrap(), z);
    }

    #[test]
    fn errors() {
        assert_eq!(
            decode_pdu("0000").unwrap_err(),
            PduError::TooShort { found: 4, need: 92 }
        );
        let mut bad = "0".repeat(PDU_HEX_LEN);
        bad.replace_range(10..11, "g");
        assert_eq!(
            decode_pdu(&bad).unwrap_err(),
            PduError::NonHexDigit {
                offset: 10,
                ch: 'g'
            }
        );
        let r = EnergyReading {
            avg_pf: 1000.0,
            ..Default::default()
        };
        assert!(matches!(
            encode_pdu(&r),
            Err(PduError::FieldOverflow {
                field: "Avg PF",
                ..
            })
        ));
        let r = EnergyReading {
            power_kw: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            encode_pdu(&r),
            Err(PduError::FieldOverflow { .. })
        ));
    }

    #[test]
    fn trailer_ignored_and_lowercase_accepted() {
        let mut hex = "0".repeat(PDU_HEX_LEN);
        hex.replace_range(0..8, "0000abcd");
        hex.push_str("DEADBEEF");
        assert_eq!(decode_pdu(&hex).unwrap().r_current, 0xabcd as f64 / 1000.0);
        hex.push('é');
        assert!(decode_pdu(&hex).is_ok());
        let mut wide = "0".repeat(PDU_HEX_LEN - 1);
        wide.push('é');
        assert!(matches!(
            decode_pdu(&wide),
            Err(PduError::NonHexDigit { .. })
        ));
    }
}
