use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use citylab_ingest::charger::{
    run_scenario, user_path, ScenarioSession, ScenarioUser, F_BALANCE, F_CHARGER_AMOUNT,
    F_METER_ID, F_USER_AMOUNT, F_USER_ID, INSUFFICIENT_FUNDS, USER_NOT_FOUND,
};
use citylab_ingest::{
    Charger, ChargerConfig, ChargerError, ChargerState, Money, PlatformClient, Scenario,
    TariffTable,
};
use citylab_monitor::{ApiRequest, ApiResponse, Monitor, Transport, Unreachable};
use citylab_resource::{ManualClock, ResourceTree, TreeConfig};
use serde_json::Value;

const ADMIN: &str = "admin:admin";

/// Monitor that can be switched off.
struct Switch {
    monitor: Monitor,
    down: AtomicBool,
}

#[async_trait]
impl Transport for Switch {
    async fn send(&self, req: ApiRequest) -> Result<ApiResponse, Unreachable> {
        if self.down.load(Ordering::SeqCst) {
            return Err(Unreachable("link down".into()));
        }
        Ok(self.monitor.handle(&req))
    }
}

fn platform() -> (Arc<Switch>, PlatformClient, Arc<ManualClock>) {
    let tree = Arc::new(ResourceTree::new(TreeConfig::default()));
    let sw = Arc::new(Switch {
        monitor: Monitor::new(tree),
        down: AtomicBool::new(false),
    });
    let client = PlatformClient::new(sw.clone(), ADMIN);
    (sw, client, Arc::new(ManualClock::at_epoch(1_617_471_934)))
}

fn rs(r: f64) -> Money {
    Money::rupees(r)
}

async fn user_txns(client: &PlatformClient, rfid: &str) -> Vec<Value> {
    let resp = client
        .get(&format!("{}/TRANSACTIONS?rcn=4", user_path(rfid)))
        .await
        .unwrap();
    resp.body.unwrap()["m2m:cnt"]["m2m:cin"]
        .as_array()
        .cloned()
        .unwrap_or_default()
        .into_iter()
        .map(|c| serde_json::from_str(c["con"].as_str().unwrap()).unwrap())
        .collect()
}

#[tokio::test]
async fn billing_follows_consumption() {
    let (_, client, clock) = platform();
    let sc = Scenario {
        charger: ChargerConfig::default(),
        tariff: TariffTable::default(),
        users: vec![
            ScenarioUser {
                rfid: "1111".into(),
                name: "A".into(),
                email: "a@x".into(),
                phone: "1".into(),
                balance: rs(500.0),
            },
            ScenarioUser {
                rfid: "2222".into(),
                name: "B".into(),
                email: "b@x".into(),
                phone: "2".into(),
                balance: rs(100.0),
            },
        ],
        sessions: vec![
            ScenarioSession {
                rfid: "1111".into(),
                amount: rs(100.0),
                consume: Some(rs(90.0)),
                kwh: None,
            },
            ScenarioSession {
                rfid: "2222".into(),
                amount: rs(100.0),
                consume: Some(rs(110.0)),
                kwh: None,
            },
            ScenarioSession {
                rfid: "9999".into(),
                amount: rs(100.0),
                consume: Some(rs(10.0)),
                kwh: None,
            },
            ScenarioSession {
                rfid: "2222".into(),
                amount: rs(1.0),
                consume: Some(rs(1.0)),
                kwh: None,
            },
        ],
    };
    let out = run_scenario(&sc, client.clone(), clock).await.unwrap();
    assert_eq!(out[0].deducted, Some(rs(90.0)));
    assert_eq!(out[0].balance_after, Some(rs(410.0)));
    assert_eq!(out[1].deducted, Some(rs(110.0)));
    assert_eq!(out[1].balance_after, Some(rs(-10.0)));
    assert_eq!(
        (out[2].ok, out[2].message.as_str()),
        (false, USER_NOT_FOUND)
    );
    assert_eq!(
        (out[3].ok, out[3].message.as_str()),
        (false, INSUFFICIENT_FUNDS)
    );

    let txns = user_txns(&client, "2222").await;
    let last = txns.last().unwrap();
    assert_eq!(last[F_USER_ID], "2222");
    assert_eq!(last[F_METER_ID], "test-charger");
    assert_eq!(last[F_USER_AMOUNT], 110);
    assert_eq!(last[F_BALANCE], -10);
}

#[tokio::test]
async fn figure_transaction_shapes() {
    let (_, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client.clone(),
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user(
        "test-user",
        "John Doe",
        "abc@xyz.com",
        "(+91)-1234567890",
        rs(10000.0),
    )
    .await
    .unwrap();
    let s = ch.authenticate("test-user", rs(1000.0)).await.unwrap();
    assert_eq!(s.state, ChargerState::Charging);
    assert_eq!(ch.state(), ChargerState::Charging);
    let st = ch.settle(s, rs(1000.0)).await.unwrap();
    assert_eq!(ch.state(), ChargerState::Idle);
    assert_eq!(st.user_txn[F_USER_AMOUNT], 1000);
    assert_eq!(st.user_txn[F_BALANCE], 9000);
    assert_eq!(st.charger_txn[F_CHARGER_AMOUNT], 1000);
    let keys: Vec<&str> = st
        .user_txn
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(
        keys,
        [
            "USER ID",
            "METER ID",
            "TRANSACTION DATE-TIME",
            "TRANSACTION AMOUNT (IN RS)",
            "CURRENT AMOUNT IN USER'S ACCOUNT (IN RS)"
        ]
    );
    let stamp = st.user_txn["TRANSACTION DATE-TIME"].as_str().unwrap();
    assert_eq!(stamp, "2021-04-03 23:15:34.000000");
}

#[tokio::test]
async fn negative_balance_absorbed_by_recharge() {
    let (_, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client,
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(100.0)).await.unwrap();
    let s = ch.authenticate("u", rs(100.0)).await.unwrap();
    ch.settle(s, rs(110.0)).await.unwrap();
    assert_eq!(ch.balance("u").await.unwrap(), rs(-10.0));
    assert_eq!(ch.recharge("u", rs(50.0)).await.unwrap(), rs(40.0));
}

#[tokio::test]
async fn zero_consumption_leaves_balance() {
    let (_, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client,
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(50.0)).await.unwrap();
    let s = ch.authenticate("u", rs(20.0)).await.unwrap();
    let st = ch.settle(s, Money::ZERO).await.unwrap();
    assert_eq!(st.balance_after, rs(50.0));
}

#[tokio::test]
async fn state_machine_rejects_out_of_order_calls() {
    let (_, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client,
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(50.0)).await.unwrap();
    let s = ch.authenticate("u", rs(20.0)).await.unwrap();
    assert!(matches!(
        ch.authenticate("u", rs(20.0)).await,
        Err(ChargerError::WrongState(..))
    ));
    ch.settle(s.clone(), rs(5.0)).await.unwrap();
    assert!(matches!(
        ch.settle(s, rs(5.0)).await,
        Err(ChargerError::WrongState(..))
    ));
    assert!(matches!(
        ch.authenticate("u", Money::ZERO).await,
        Err(ChargerError::BadRequest(_))
    ));
    assert!(matches!(
        ch.authenticate("nobody", rs(1.0)).await,
        Err(ChargerError::UserNotFound)
    ));
    assert_eq!(ch.state(), ChargerState::Idle);
}

#[tokio::test]
async fn tariff_frozen_at_start() {
    let (_, client, clock) = platform();
    let mut tariff = TariffTable::default();
    // session starts 23:15 local, ends after midnight
    tariff.hours.insert(23, rs(8.0));
    tariff.hours.insert(0, rs(20.0));
    let mut ch = Charger::new(ChargerConfig::default(), client, tariff, clock.clone());
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(1000.0)).await.unwrap();
    let s = ch.authenticate("u", rs(100.0)).await.unwrap();
    clock.advance(chrono::Duration::hours(1));
    assert_eq!(s.tariff, rs(8.0));
}

#[tokio::test]
async fn outage_buffers_then_replays() {
    let (sw, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client.clone(),
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(300.0)).await.unwrap();
    let s = ch.authenticate("u", rs(100.0)).await.unwrap();
    sw.down.store(true, Ordering::SeqCst);
    let st = ch.settle(s, rs(60.0)).await.unwrap();
    assert!(st.buffered);
    assert_eq!(ch.pending(), 2);
    assert!(matches!(
        ch.authenticate("u", rs(10.0)).await,
        Err(ChargerError::PlatformUnreachable(_))
    ));
    sw.down.store(false, Ordering::SeqCst);
    // the next swipe flushes the buffer first and sees the settled balance
    let s = ch.authenticate("u", rs(10.0)).await.unwrap();
    assert_eq!(ch.pending(), 0);
    assert_eq!(s.balance_before, rs(240.0));
    let txns = user_txns(&client, "u").await;
    assert_eq!(txns.len(), 2);
}

#[tokio::test]
async fn wallet_conservation_over_many_sessions() {
    let (_, client, clock) = platform();
    let mut ch = Charger::new(
        ChargerConfig::default(),
        client,
        TariffTable::default(),
        clock,
    );
    ch.install().await.unwrap();
    ch.register_user("u", "", "", "", rs(10_000.0))
        .await
        .unwrap();
    let mut expected = rs(10_000.0);
    for i in 0..40 {
        let consumed = Money(137 * i % 5000);
        let s = ch.authenticate("u", Money(1)).await.unwrap();
        let before = s.balance_before;
        let st = ch.settle(s, consumed).await.unwrap();
        assert_eq!(before - st.balance_after, consumed);
        expected = expected - consumed;
    }
    assert_eq!(ch.balance("u").await.unwrap(), expected);
}
