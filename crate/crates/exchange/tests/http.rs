mod common;

use common::*;
use serde_json::{json, Value};

async fn serve(f: &Fixture) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = citylab_exchange::router(f.ex.clone(), false);
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn token_then_latest_over_http() {
    let f = Fixture::new();
    f.push(
        "AQ-MG00-00",
        &format!("[{LATEST_TS}, 24.2, 103.4, 45.8, 14.74, nan, nan, nan, 102.27, \"POOR\", \"PM10\"]"),
        &["V3.0.02"],
    );
    let base = serve(&f).await;
    let http = reqwest::Client::new();

    let r = http
        .post(format!("{base}/token"))
        .header("clientId", USER)
        .header("clientSecret", USER_SECRET)
        .json(&json!({"itemId": "iudx-rs-onem2m.iiit.ac.in", "itemType": "resource_server", "role": "consumer"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 200);
    let body: Value = r.json().await.unwrap();
    let token = body["results"]["accessToken"].as_str().unwrap().to_owned();

    let id = f.item_id("AQ-MG00-00");
    let r = http.get(format!("{base}/entities/latest")).query(&[("id", &id)]).header("token", &token).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["results"][0]["pm10"]["instValue"], 103.4);

    let r = http
        .get(format!("{base}/entities/latest"))
        .query(&[("id", &id)])
        .header("authorization", format!("Bearer {token}"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 200);

    let r = http.get(format!("{base}/entities/latest")).query(&[("id", &id)]).header("token", "junk").send().await.unwrap();
    assert_eq!(r.status(), 401);
    assert_eq!(
        r.text().await.unwrap(),
        r#"{"type":"urn:dx:rs:InvalidAuthorizationToken","title":"Not Authorized","detail":"Token is invalid"}"#
    );

    let r = http.get(format!("{base}/temporal/entities")).query(&[("id", id.as_str()), ("timerel", "nonsense")]).send().await.unwrap();
    assert_eq!(r.status(), 401);

    let r = http.get(format!("{base}/catalogue")).query(&[("id", &id)]).send().await.unwrap();
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["name"], "AQ-MG00-00");

    let r = http.post(format!("{base}/token")).header("clientId", USER).header("clientSecret", "wrong").body("{}").send().await.unwrap();
    assert_eq!(r.status(), 401);

    let r = http.post(format!("{base}/revoke")).header("token", f.ex.auth.revocation_request(USER)).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let r = http.get(format!("{base}/meta")).query(&[("id", &id)]).header("token", &token).send().await.unwrap();
    assert_eq!(r.status(), 401);
}
