//! Populates a monitor with the demo deployment. Every step checks before
//! it writes, so running it again changes nothing.

use anyhow::{anyhow, Context};
use citylab_ingest::client::ClientError;
use citylab_ingest::PlatformClient;
use citylab_resource::ResourceType;
use serde::Serialize;
use serde_json::{json, Value};

use crate::campus::{self, Site, ADMIN, CSE, DEMO_NODE, GUEST, GUEST_ACP};

/// Subscriptions every data container gets: (name, notification URI).
pub const DATA_SUBSCRIPTIONS: [(&str, &str); 2] = [("sub-lake", "local://lake"), ("sub-quality", "local://quality")];
pub const DESCRIPTOR_SUBSCRIPTIONS: [(&str, &str); 1] = [("sub-quality", "local://quality")];

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct SeedSummary {
    pub created: usize,
    pub existing: usize,
    pub descriptors: usize,
    pub demo_points: usize,
}

impl SeedSummary {
    fn count(&mut self, created: bool) {
        if created {
            self.created += 1;
        } else {
            self.existing += 1;
        }
    }
}

/// The body of a resource envelope, whatever its `m2m:` key.
fn inner(v: &Value) -> Option<&Value> {
    v.as_object()?.values().next()
}

async fn ri_of(client: &PlatformClient, path: &str) -> anyhow::Result<String> {
    let resp = client.get(path).await?;
    if resp.status != 200 {
        return Err(anyhow!("{path}: status {}", resp.status));
    }
    resp.body
        .as_ref()
        .and_then(inner)
        .and_then(|b| b.get("ri"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| anyhow!("{path}: no ri in response"))
}

async fn ensure_policies(client: &PlatformClient, s: &mut SeedSummary) -> anyhow::Result<String> {
    let body = json!({"m2m:acp": {
        "rn": GUEST_ACP,
        "pv": {"acr": [{"acor": [ADMIN], "acop": 63}, {"acor": [GUEST], "acop": 34}]},
        "pvs": {"acr": [{"acor": [ADMIN], "acop": 63}]},
    }});
    s.count(client.ensure(CSE, ResourceType::AccessControlPolicy, &body).await?);
    let guest = ri_of(client, &format!("{CSE}/{GUEST_ACP}")).await?;
    let admin = ri_of(client, &format!("{CSE}/acp-admin")).await?;
    // the CSE itself must let the guest discover
    let cb = client.get("/in-cse").await?;
    let current: Vec<String> = cb
        .body
        .as_ref()
        .and_then(inner)
        .and_then(|b| b.get("acpi"))
        .and_then(|a| serde_json::from_value(a.clone()).ok())
        .unwrap_or_default();
    if current.contains(&guest) {
        s.count(false);
    } else {
        let mut acpi = current;
        if !acpi.contains(&admin) {
            acpi.push(admin);
        }
        acpi.push(guest.clone());
        let resp = client.send(citylab_monitor::ApiRequest::put("/in-cse", client.origin(), &json!({"m2m:cb": {"acpi": acpi}}))).await?;
        if resp.status != 200 {
            return Err(anyhow!("updating CSE policies: status {} {:?}", resp.status, resp.body));
        }
        s.count(true);
    }
    Ok(guest)
}

async fn ensure_site(client: &PlatformClient, site: &Site, s: &mut SeedSummary) -> anyhow::Result<()> {
    for p in site.intermediate() {
        let (parent, rn) = p.rsplit_once('/').expect("nested path");
        s.count(client.ensure_container(parent, rn, &[], None).await?);
    }
    let (parent, rn) = site.path.rsplit_once('/').expect("nested path");
    let labels = vec![site.ae().to_owned(), site.node().to_owned()];
    s.count(client.ensure_container(parent, rn, &labels, None).await?);
    s.count(client.ensure_container(&site.path, "Descriptor", &[], None).await?);
    s.count(client.ensure_container(&site.path, "Data", &site.data_labels(), None).await?);
    for (name, nu) in DESCRIPTOR_SUBSCRIPTIONS {
        s.count(client.subscribe(&site.descriptor_path(), name, nu).await?);
    }
    for (name, nu) in DATA_SUBSCRIPTIONS {
        s.count(client.subscribe(&site.data_path(), name, nu).await?);
    }
    if client.latest(&site.descriptor_path()).await?.is_none() {
        client.post_cin(&site.descriptor_path(), &site.descriptor().to_content(), &labels).await?;
        s.descriptors += 1;
    }
    Ok(())
}

/// Seeds the tree through `client`, which must act as the admin.
pub async fn seed_tree(client: &PlatformClient, with_demo_data: bool) -> anyhow::Result<SeedSummary> {
    let mut s = SeedSummary::default();
    let guest = ensure_policies(client, &mut s).await.context("policies")?;
    for ae in campus::aes() {
        let body = json!({"m2m:ae": {"rn": ae, "api": ae, "rr": true, "lbl": [ae], "acpi": [guest]}});
        s.count(client.ensure(CSE, ResourceType::Ae, &body).await.with_context(|| ae.clone())?);
    }
    for site in campus::sites() {
        ensure_site(client, &site, &mut s).await.with_context(|| site.path.clone())?;
    }
    if with_demo_data {
        let site = campus::site_of(DEMO_NODE).expect("demo node listed");
        let data = site.data_path();
        match client.latest(&data).await {
            Ok(None) => {
                for con in campus::demo_points() {
                    client.post_cin(&data, &con, &site.profile.labels()).await?;
                    s.demo_points += 1;
                }
            }
            Ok(Some(_)) => {}
            Err(ClientError::Api { status: 404, .. }) => return Err(anyhow!("{data} missing after seeding")),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(s)
}

/// Makes sure one node and everything above it exists, for simulator runs
/// against nodes outside the campus inventory.
pub async fn ensure_node(client: &PlatformClient, site: &Site) -> anyhow::Result<SeedSummary> {
    let mut s = SeedSummary::default();
    let guest = ensure_policies(client, &mut s).await.context("policies")?;
    let ae = site.ae();
    let body = json!({"m2m:ae": {"rn": ae, "api": ae, "rr": true, "lbl": [ae], "acpi": [guest]}});
    s.count(client.ensure(CSE, ResourceType::Ae, &body).await.with_context(|| ae.to_owned())?);
    ensure_site(client, site, &mut s).await.with_context(|| site.path.clone())?;
    Ok(s)
}
