//! Charge-point session logic: authenticate a swiped RFID against the
//! platform, bill by consumption, and post one transaction record for the
//! user and one for the charger.
//!
//! Platform layout under `AE-EV-Chargers`:
//!
//! ```text
//! USER-DATA/<RFID>/{USER-INFO, TRANSACTIONS}
//! CHARGER-DATA/<CHARGER-ID>/{CHARGER-INFO, TRANSACTIONS}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Timelike, Utc};
use citylab_resource::clock::deployment_offset;
use citylab_resource::Clock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::client::{ClientError, PlatformClient, CSE_PATH};

pub const CHARGER_AE: &str = "AE-EV-Chargers";
pub const USER_NOT_FOUND: &str = "user not found";
pub const INSUFFICIENT_FUNDS: &str = "Insufficient amount in the account";
pub const RECHARGE_METER: &str = "RECHARGE";

pub const F_USER_ID: &str = "USER ID";
pub const F_METER_ID: &str = "METER ID";
pub const F_DATE_TIME: &str = "TRANSACTION DATE-TIME";
pub const F_USER_AMOUNT: &str = "TRANSACTION AMOUNT (IN RS)";
pub const F_BALANCE: &str = "CURRENT AMOUNT IN USER'S ACCOUNT (IN RS)";
pub const F_CHARGER_AMOUNT: &str = "TRANSACTION AMOUNT IN RS";

/// Whole paise, so wallet arithmetic is exact.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(from = "f64", into = "f64")]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn rupees(r: f64) -> Self {
        Money((r * 100.0).round() as i64)
    }

    pub fn as_rupees(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Whole amounts render as integers (`1000`), others with paise (`12.5`).
    pub fn to_json(self) -> Value {
        if self.0 % 100 == 0 {
            json!(self.0 / 100)
        } else {
            json!(self.as_rupees())
        }
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_f64().map(Money::rupees),
            Value::String(s) => s.trim().parse().ok().map(Money::rupees),
            _ => None,
        }
    }
}

impl From<f64> for Money {
    fn from(r: f64) -> Self {
        Money::rupees(r)
    }
}

impl From<Money> for f64 {
    fn from(m: Money) -> f64 {
        m.as_rupees()
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, o: Money) -> Money {
        Money(self.0 + o.0)
    }
}

impl std::ops::Sub for Money {
    type Output = Money;
    fn sub(self, o: Money) -> Money {
        Money(self.0 - o.0)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Price per kWh by local hour of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffTable {
    pub default: Money,
    /// Hour (0-23) to price; hours not listed use `default`.
    #[serde(default, deserialize_with = "hour_keys")]
    pub hours: BTreeMap<u32, Money>,
}

// TOML table keys are always strings, JSON object keys too.
fn hour_keys<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, Money>, D::Error> {
    use serde::de::Error;
    let raw = BTreeMap::<String, Money>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| match k.trim().parse::<u32>() {
            Ok(h) if h < 24 => Ok((h, v)),
            _ => Err(D::Error::custom(format!("tariff hour {k:?} is not 0-23"))),
        })
        .collect()
}

impl Default for TariffTable {
    fn default() -> Self {
        Self {
            default: Money::rupees(10.0),
            hours: BTreeMap::new(),
        }
    }
}

impl TariffTable {
    pub fn at(&self, t: DateTime<Utc>) -> Money {
        let hour = t.with_timezone(&deployment_offset()).hour();
        self.hours.get(&hour).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargerState {
    Idle,
    Authenticating,
    Charging,
    Settling,
    Updating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeSession {
    pub rfid: String,
    pub entered: Money,
    /// Frozen when the session starts.
    pub tariff: Money,
    pub balance_before: Money,
    pub consumed: Money,
    pub started_at: DateTime<Utc>,
    pub state: ChargerState,
}

#[derive(Debug, thiserror::Error)]
pub enum ChargerError {
    #[error("{USER_NOT_FOUND}")]
    UserNotFound,
    #[error("{INSUFFICIENT_FUNDS}")]
    InsufficientFunds { balance: Money, requested: Money },
    #[error("platform unreachable: {0}")]
    PlatformUnreachable(String),
    #[error("charger is {0:?}, operation needs {1:?}")]
    WrongState(ChargerState, ChargerState),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("platform error: {0}")]
    Platform(String),
}

impl From<ClientError> for ChargerError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Unreachable(m) => ChargerError::PlatformUnreachable(m),
            other => ChargerError::Platform(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerConfig {
    pub id: String,
    pub meter_id: String,
    #[serde(default)]
    pub latitude: f64,
    #[serde(default)]
    pub longitude: f64,
}

impl Default for ChargerConfig {
    fn default() -> Self {
        Self {
            id: "CHARGER-1".into(),
            meter_id: "test-charger".into(),
            latitude: 17.44599,
            longitude: 78.35142,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub rfid: String,
    pub deducted: Money,
    pub balance_after: Money,
    pub user_txn: Value,
    pub charger_txn: Value,
    /// Platform was down; the records wait in the local buffer.
    pub buffered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PendingTxn {
    container: String,
    record: Value,
}

pub fn ae_path() -> String {
    format!("{CSE_PATH}/{CHARGER_AE}")
}

pub fn user_path(rfid: &str) -> String {
    format!("{}/USER-DATA/{rfid}", ae_path())
}

pub fn charger_path(id: &str) -> String {
    format!("{}/CHARGER-DATA/{id}", ae_path())
}

pub fn txn_stamp(t: DateTime<Utc>) -> String {
    t.with_timezone(&deployment_offset())
        .format("%Y-%m-%d %H:%M:%S%.6f")
        .to_string()
}

fn record(fields: &[(&str, Value)]) -> Value {
    let mut m = Map::new();
    for (k, v) in fields {
        m.insert((*k).to_owned(), v.clone());
    }
    Value::Object(m)
}

pub struct Charger {
    cfg: ChargerConfig,
    client: PlatformClient,
    tariff: TariffTable,
    clock: Arc<dyn Clock>,
    state: ChargerState,
    /// Survives platform outages, oldest first.
    pending: Vec<PendingTxn>,
}

impl Charger {
    pub fn new(
        cfg: ChargerConfig,
        client: PlatformClient,
        tariff: TariffTable,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            cfg,
            client,
            tariff,
            clock,
            state: ChargerState::Idle,
            pending: Vec::new(),
        }
    }

    pub fn state(&self) -> ChargerState {
        self.state
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Creates the charger's containers and info record.
    pub async fn install(&self) -> Result<(), ChargerError> {
        let c = &self.client;
        let ae = ae_path();
        c.ensure_ae(CHARGER_AE, &[]).await?;
        c.ensure_container(&ae, "USER-DATA", &[], None).await?;
        c.ensure_container(&ae, "CHARGER-DATA", &[], None).await?;
        let base = charger_path(&self.cfg.id);
        c.ensure_container(&format!("{ae}/CHARGER-DATA"), &self.cfg.id, &[], None)
            .await?;
        if c.ensure_container(&base, "CHARGER-INFO", &[], None).await? {
            let info = json!({
                "CHARGER ID": self.cfg.id,
                "GEO-LOCATION": { "Latitude": self.cfg.latitude, "Longitude": self.cfg.longitude },
            });
            c.post_cin(&format!("{base}/CHARGER-INFO"), &info.to_string(), &[])
                .await?;
        }
        c.ensure_container(&base, "TRANSACTIONS", &[], None).await?;
        Ok(())
    }

    /// Registers a user card with an opening balance recorded as a
    /// recharge transaction.
    pub async fn register_user(
        &self,
        rfid: &str,
        name: &str,
        email: &str,
        phone: &str,
        opening: Money,
    ) -> Result<(), ChargerError> {
        let c = &self.client;
        let base = user_path(rfid);
        c.ensure_container(&format!("{}/USER-DATA", ae_path()), rfid, &[], None)
            .await?;
        if c.ensure_container(&base, "USER-INFO", &[], None).await? {
            let info = json!({ "NAME": name, "EMAIL ID": email, "PHONE NUMBER": phone });
            c.post_cin(&format!("{base}/USER-INFO"), &info.to_string(), &[])
                .await?;
        }
        if c.ensure_container(&base, "TRANSACTIONS", &[], None).await? && opening != Money::ZERO {
            self.post_user_txn(rfid, RECHARGE_METER, opening, opening)
                .await?;
        }
        Ok(())
    }

    /// Adds money; any negative balance is absorbed first.
    pub async fn recharge(&mut self, rfid: &str, amount: Money) -> Result<Money, ChargerError> {
        self.replay_pending().await?;
        let balance = self.balance(rfid).await?;
        let after = balance + amount;
        self.post_user_txn(rfid, RECHARGE_METER, amount, after)
            .await?;
        Ok(after)
    }

    async fn post_user_txn(
        &self,
        rfid: &str,
        meter: &str,
        amount: Money,
        balance: Money,
    ) -> Result<(), ChargerError> {
        let txn = record(&[
            (F_USER_ID, json!(rfid)),
            (F_METER_ID, json!(meter)),
            (F_DATE_TIME, json!(txn_stamp(self.clock.now()))),
            (F_USER_AMOUNT, amount.to_json()),
            (F_BALANCE, balance.to_json()),
        ]);
        self.client
            .post_cin(
                &format!("{}/TRANSACTIONS", user_path(rfid)),
                &txn.to_string(),
                &[],
            )
            .await?;
        Ok(())
    }

    /// Balance carried by the newest user transaction; a registered card
    /// without transactions holds zero.
    pub async fn balance(&self, rfid: &str) -> Result<Money, ChargerError> {
        let base = user_path(rfid);
        if !self.client.exists(&base).await? {
            return Err(ChargerError::UserNotFound);
        }
        if let Some(local) = self.pending_balance(rfid) {
            return Ok(local);
        }
        let latest = match self.client.latest(&format!("{base}/TRANSACTIONS")).await {
            Ok(v) => v,
            Err(ClientError::Api { status: 404, .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let Some(cin) = latest else {
            return Ok(Money::ZERO);
        };
        let con = cin["con"].as_str().unwrap_or_default();
        let txn: Value = serde_json::from_str(con)
            .map_err(|e| ChargerError::Platform(format!("unreadable transaction record: {e}")))?;
        Money::from_json(&txn[F_BALANCE])
            .ok_or_else(|| ChargerError::Platform(format!("transaction record lacks {F_BALANCE}")))
    }

    fn pending_balance(&self, rfid: &str) -> Option<Money> {
        let user_txns = format!("{}/TRANSACTIONS", user_path(rfid));
        self.pending
            .iter()
            .rev()
            .find(|p| p.container == user_txns)
            .and_then(|p| Money::from_json(&p.record[F_BALANCE]))
    }

    /// Pushes buffered transaction records in order. Stops at the first
    /// failure and keeps the rest.
    pub async fn replay_pending(&mut self) -> Result<usize, ChargerError> {
        let mut sent = 0;
        while let Some(p) = self.pending.first() {
            self.client
                .post_cin(&p.container, &p.record.to_string(), &[])
                .await?;
            self.pending.remove(0);
            sent += 1;
        }
        Ok(sent)
    }

    pub async fn authenticate(
        &mut self,
        rfid: &str,
        amount: Money,
    ) -> Result<ChargeSession, ChargerError> {
        if self.state != ChargerState::Idle {
            return Err(ChargerError::WrongState(self.state, ChargerState::Idle));
        }
        if amount <= Money::ZERO {
            return Err(ChargerError::BadRequest("amount must be positive".into()));
        }
        self.state = ChargerState::Authenticating;
        let result = self.check_user(rfid, amount).await;
        match result {
            Ok(balance) => {
                let now = self.clock.now();
                self.state = ChargerState::Charging;
                Ok(ChargeSession {
                    rfid: rfid.to_owned(),
                    entered: amount,
                    tariff: self.tariff.at(now),
                    balance_before: balance,
                    consumed: Money::ZERO,
                    started_at: now,
                    state: ChargerState::Charging,
                })
            }
            Err(e) => {
                self.state = ChargerState::Idle;
                Err(e)
            }
        }
    }

    async fn check_user(&mut self, rfid: &str, amount: Money) -> Result<Money, ChargerError> {
        // a failed replay is not fatal: the buffered balance still answers
        if let Err(e) = self.replay_pending().await {
            tracing::warn!(error = %e, pending = self.pending.len(), "transaction replay deferred");
        }
        let balance = self.balance(rfid).await?;
        if balance < amount {
            return Err(ChargerError::InsufficientFunds {
                balance,
                requested: amount,
            });
        }
        Ok(balance)
    }

    /// Bills what was consumed, not what was entered; the wallet may go
    /// negative by the excess.
    pub async fn settle(
        &mut self,
        mut session: ChargeSession,
        consumed: Money,
    ) -> Result<Settlement, ChargerError> {
        if self.state != ChargerState::Charging {
            return Err(ChargerError::WrongState(self.state, ChargerState::Charging));
        }
        if consumed < Money::ZERO {
            return Err(ChargerError::BadRequest(
                "consumption cannot be negative".into(),
            ));
        }
        self.state = ChargerState::Settling;
        session.consumed = consumed;
        session.state = ChargerState::Settling;
        let balance_after = session.balance_before - consumed;
        let now = self.clock.now();
        let user_txn = record(&[
            (F_USER_ID, json!(session.rfid)),
            (F_METER_ID, json!(self.cfg.meter_id)),
            (F_DATE_TIME, json!(txn_stamp(now))),
            (F_USER_AMOUNT, consumed.to_json()),
            (F_BALANCE, balance_after.to_json()),
        ]);
        let charger_txn = record(&[
            (F_USER_ID, json!(session.rfid)),
            (F_METER_ID, json!(self.cfg.meter_id)),
            (F_DATE_TIME, json!(txn_stamp(now))),
            (F_CHARGER_AMOUNT, consumed.to_json()),
        ]);

        self.state = ChargerState::Updating;
        self.pending.push(PendingTxn {
            container: format!("{}/TRANSACTIONS", user_path(&session.rfid)),
            record: user_txn.clone(),
        });
        self.pending.push(PendingTxn {
            container: format!("{}/TRANSACTIONS", charger_path(&self.cfg.id)),
            record: charger_txn.clone(),
        });
        let buffered = match self.replay_pending().await {
            Ok(_) => false,
            Err(ChargerError::PlatformUnreachable(e)) => {
                tracing::warn!(error = %e, "platform down, transactions buffered");
                true
            }
            Err(e) => {
                self.state = ChargerState::Idle;
                return Err(e);
            }
        };
        self.state = ChargerState::Idle;
        Ok(Settlement {
            rfid: session.rfid,
            deducted: consumed,
            balance_after,
            user_txn,
            charger_txn,
            buffered,
        })
    }
}

/// Scripted charger run used by the CLI and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub charger: ChargerConfig,
    #[serde(default)]
    pub tariff: TariffTable,
    #[serde(default)]
    pub users: Vec<ScenarioUser>,
    pub sessions: Vec<ScenarioSession>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioUser {
    pub rfid: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub email: String,
    #[serde(default)]
    pub phone: String,
    pub balance: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSession {
    pub rfid: String,
    pub amount: Money,
    /// Consumption in rupees; alternatively give `kwh` and the frozen
    /// tariff prices it.
    #[serde(default)]
    pub consume: Option<Money>,
    #[serde(default)]
    pub kwh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub rfid: String,
    pub ok: bool,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deducted: Option<Money>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balance_after: Option<Money>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tariff: Option<Money>,
}

pub async fn run_scenario(
    sc: &Scenario,
    client: PlatformClient,
    clock: Arc<dyn Clock>,
) -> Result<Vec<SessionOutcome>, ChargerError> {
    let mut charger = Charger::new(sc.charger.clone(), client, sc.tariff.clone(), clock);
    charger.install().await?;
    for u in &sc.users {
        charger
            .register_user(&u.rfid, &u.name, &u.email, &u.phone, u.balance)
            .await?;
    }
    let mut out = Vec::new();
    for s in &sc.sessions {
        let outcome = match charger.authenticate(&s.rfid, s.amount).await {
            Ok(session) => {
                let consumed = match (s.consume, s.kwh) {
                    (Some(c), _) => c,
                    (None, Some(kwh)) => Money((session.tariff.0 as f64 * kwh).round() as i64),
                    (None, None) => s.amount,
                };
                let tariff = session.tariff;
                let st = charger.settle(session, consumed).await?;
                SessionOutcome {
                    rfid: s.rfid.clone(),
                    ok: true,
                    message: if st.buffered {
                        "settled (buffered)".into()
                    } else {
                        "settled".into()
                    },
                    deducted: Some(st.deducted),
                    balance_after: Some(st.balance_after),
                    tariff: Some(tariff),
                }
            }
            Err(e @ (ChargerError::UserNotFound | ChargerError::InsufficientFunds { .. })) => {
                SessionOutcome {
                    rfid: s.rfid.clone(),
                    ok: false,
                    message: e.to_string(),
                    deducted: None,
                    balance_after: None,
                    tariff: None,
                }
            }
            Err(e) => return Err(e),
        };
        out.push(outcome);
    }
    Ok(out)
}
