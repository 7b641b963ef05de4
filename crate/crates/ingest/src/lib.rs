//! Traffic sources for the platform: the LoRaWAN energy-meter payload
//! codec, RSSI classification, the charge-point billing state machine and
//! seeded node simulators.

pub mod charger;
pub mod client;
pub mod pdu;
pub mod rssi;
pub mod sim;

pub use charger::{
    ChargeSession, Charger, ChargerConfig, ChargerError, ChargerState, Money, Scenario, Settlement,
    TariffTable,
};
pub use client::{ClientError, PlatformClient};
pub use pdu::{decode_pdu, encode_pdu, EnergyReading, PduError, LAYOUT, PDU_HEX_LEN};
pub use rssi::{classify_rssi, RssiClass};
pub use sim::{simulate, FaultPlan, GroundTruth, SimProfile, SimRecord};
