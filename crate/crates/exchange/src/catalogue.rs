//! Embedded catalogue: resource groups, their data models, and one item
//! per IoT node.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};

pub const CONTEXT: &str = "https://voc.iudx.org.in/";
pub const DEFAULT_PROVIDER: &str = "research.iiit.ac.in/4786f10afbf48ed5c8c7be9b4d38b33ca16c1d9a";
pub const DEFAULT_SERVER: &str = "iudx-rs-onem2m.iiit.ac.in";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessClass {
    Open,
    Secure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemStatus {
    #[serde(rename = "ACTIVE")]
    Active,
    #[serde(rename = "INACTIVE")]
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// `[longitude, latitude]`
    pub coordinates: [f64; 2],
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemLocation {
    pub geometry: Geometry,
    #[serde(rename = "type")]
    pub kind: String,
    pub address: String,
}

impl ItemLocation {
    pub fn point(latitude: f64, longitude: f64, address: impl Into<String>) -> Self {
        Self {
            geometry: Geometry {
                coordinates: [longitude, latitude],
                kind: "Point".into(),
            },
            kind: "Place".into(),
            address: address.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueItem {
    #[serde(rename = "@context")]
    pub context: String,
    #[serde(rename = "type")]
    pub types: Vec<String>,
    pub id: String,
    pub name: String,
    pub label: String,
    pub description: String,
    pub tags: Vec<String>,
    pub location: ItemLocation,
    pub provider: String,
    #[serde(rename = "resourceGroup")]
    pub resource_group: String,
    #[serde(rename = "itemStatus")]
    pub item_status: ItemStatus,
    #[serde(rename = "itemCreatedAt")]
    pub item_created_at: String,
}

/// How one descriptor parameter appears in exchange records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrMapping {
    pub name: String,
    /// Plain attributes are rendered as strings rather than `{"instValue": v}`.
    #[serde(default)]
    pub plain: bool,
}

/// Descriptor parameter names to exchange attribute names. Parameters not
/// listed fall back to a camel-case spelling of the descriptor name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataModel {
    pub attrs: IndexMap<String, AttrMapping>,
}

impl DataModel {
    pub fn new<'a>(measured: &[(&'a str, &'a str)], plain: &[(&'a str, &'a str)]) -> Self {
        let mut attrs = IndexMap::new();
        for (d, e) in measured {
            attrs.insert(d.to_string(), AttrMapping { name: e.to_string(), plain: false });
        }
        for (d, e) in plain {
            attrs.insert(d.to_string(), AttrMapping { name: e.to_string(), plain: true });
        }
        Self { attrs }
    }

    pub fn map(&self, descriptor_name: &str) -> AttrMapping {
        self.attrs.get(descriptor_name).cloned().unwrap_or_else(|| AttrMapping {
            name: camel_case(descriptor_name),
            plain: false,
        })
    }

    /// Descriptor name carrying exchange attribute `name`, among `params`.
    pub fn reverse<'a>(&self, params: &'a [String], name: &str) -> Option<&'a str> {
        params.iter().map(String::as_str).find(|p| self.map(p).name == name)
    }
}

/// `Total Flow` → `totalFlow`, `Power (kVA)` → `powerKva`.
pub fn camel_case(s: &str) -> String {
    let mut out = String::new();
    for (i, word) in s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).enumerate() {
        let lower = word.to_ascii_lowercase();
        if i == 0 {
            out.push_str(&lower);
        } else {
            let mut c = lower.chars();
            if let Some(f) = c.next() {
                out.push(f.to_ascii_uppercase());
                out.extend(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceGroup {
    pub id: String,
    pub name: String,
    pub access: AccessClass,
    /// Catalogue type tag, e.g. `iudx:EnvAQM`.
    pub type_tag: String,
    /// AE holding the group's nodes on the monitor.
    pub ae: String,
    /// Lake vertical of the group's nodes.
    pub vertical: String,
    pub data_model: DataModel,
    pub description: String,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
struct Inner {
    groups: BTreeMap<String, ResourceGroup>,
    items: BTreeMap<String, CatalogueItem>,
}

#[derive(Debug, Default)]
pub struct Catalogue {
    provider: String,
    server: String,
    inner: RwLock<Inner>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Item(CatalogueItem),
    Group { group: ResourceGroup, members: Vec<CatalogueItem> },
}

impl Lookup {
    pub fn to_json(&self) -> Value {
        match self {
            Lookup::Item(i) => serde_json::to_value(i).expect("json"),
            Lookup::Group { group, members } => json!({
                "@context": CONTEXT,
                "type": ["iudx:ResourceGroup", group.type_tag],
                "id": group.id,
                "name": group.name,
                "description": group.description,
                "accessPolicy": match group.access { AccessClass::Open => "OPEN", AccessClass::Secure => "SECURE" },
                "resources": members.iter().map(|m| m.id.clone()).collect::<Vec<_>>(),
            }),
        }
    }
}

impl Catalogue {
    pub fn new(provider: impl Into<String>, server: impl Into<String>) -> Self {
        Self {
            provider: provider.into(),
            server: server.into(),
            inner: RwLock::default(),
        }
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn server(&self) -> &str {
        &self.server
    }

    pub fn group_id(&self, name: &str) -> String {
        format!("{}/{}/{}", self.provider, self.server, name)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_group(
        &self,
        name: &str,
        access: AccessClass,
        type_tag: &str,
        ae: &str,
        vertical: &str,
        data_model: DataModel,
        description: &str,
    ) -> ResourceGroup {
        let g = ResourceGroup {
            id: self.group_id(name),
            name: name.to_owned(),
            access,
            type_tag: type_tag.to_owned(),
            ae: ae.to_owned(),
            vertical: vertical.to_owned(),
            data_model,
            description: description.to_owned(),
        };
        self.inner.write().groups.insert(g.id.clone(), g.clone());
        g
    }

    /// Adds or replaces the item for `node` in group `group_name`.
    pub fn add_item(
        &self,
        group_name: &str,
        node: &str,
        label: &str,
        description: &str,
        tags: Vec<String>,
        location: ItemLocation,
        created_at: &str,
    ) -> ApiResult<CatalogueItem> {
        let gid = self.group_id(group_name);
        let mut inner = self.inner.write();
        let group = inner.groups.get(&gid).ok_or_else(|| ApiError::UnknownItem(gid.clone()))?;
        let item = CatalogueItem {
            context: CONTEXT.into(),
            types: vec!["iudx:Resource".into(), group.type_tag.clone()],
            id: format!("{gid}/{node}"),
            name: node.to_owned(),
            label: label.to_owned(),
            description: description.to_owned(),
            tags,
            location,
            provider: self.provider.clone(),
            resource_group: gid,
            item_status: ItemStatus::Active,
            item_created_at: created_at.to_owned(),
        };
        inner.items.insert(item.id.clone(), item.clone());
        Ok(item)
    }

    pub fn lookup(&self, id: &str) -> ApiResult<Lookup> {
        let inner = self.inner.read();
        if let Some(i) = inner.items.get(id) {
            return Ok(Lookup::Item(i.clone()));
        }
        if let Some(g) = inner.groups.get(id) {
            let members = inner
                .items
                .values()
                .filter(|i| i.resource_group == g.id)
                .cloned()
                .collect();
            return Ok(Lookup::Group { group: g.clone(), members });
        }
        Err(ApiError::UnknownItem(id.to_owned()))
    }

    pub fn item(&self, id: &str) -> Option<CatalogueItem> {
        self.inner.read().items.get(id).cloned()
    }

    pub fn group(&self, id: &str) -> Option<ResourceGroup> {
        self.inner.read().groups.get(id).cloned()
    }

    pub fn group_by_name(&self, name: &str) -> Option<ResourceGroup> {
        self.group(&self.group_id(name))
    }

    /// The item and its group.
    pub fn resolve(&self, id: &str) -> ApiResult<(CatalogueItem, ResourceGroup)> {
        let inner = self.inner.read();
        let item = inner.items.get(id).ok_or_else(|| ApiError::UnknownResource(id.to_owned()))?;
        let group = inner
            .groups
            .get(&item.resource_group)
            .ok_or_else(|| ApiError::UnknownResource(item.resource_group.clone()))?;
        Ok((item.clone(), group.clone()))
    }

    pub fn groups(&self) -> Vec<ResourceGroup> {
        self.inner.read().groups.values().cloned().collect()
    }

    pub fn items(&self) -> Vec<CatalogueItem> {
        self.inner.read().items.values().cloned().collect()
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(&*self.inner.read()).expect("json")
    }

    pub fn load_json(&self, v: &Value) -> Result<(), serde_json::Error> {
        *self.inner.write() = serde_json::from_value(v.clone())?;
        Ok(())
    }
}

pub fn aq_model() -> DataModel {
    DataModel::new(
        &[
            ("PM2.5", "pm2p5"),
            ("PM10", "pm10"),
            ("Temperature", "airTemperature"),
            ("Relative Humidity", "relativeHumidity"),
            ("CO", "co"),
            ("NO2", "no2"),
            ("NH3", "nh3"),
            ("CO Concentration", "co"),
            ("NO2 Concentration", "no2"),
            ("NH3 Concentration", "nh3"),
        ],
        &[
            ("AQI", "airQualityIndex"),
            ("AQL", "airQualityLevel"),
            ("AQI-MP", "aqiMajorPollutant"),
            ("Data Interval", "dataInterval"),
        ],
    )
}

pub fn weather_model() -> DataModel {
    DataModel::new(
        &[
            ("Temperature", "airTemperature"),
            ("Relative Humidity", "relativeHumidity"),
            ("Wind Speed", "windSpeed"),
            ("Wind Direction", "windDirection"),
            ("Rain", "precipitation"),
            ("Solar Radiation", "solarRadiation"),
        ],
        &[],
    )
}

pub fn water_model() -> DataModel {
    DataModel::new(
        &[
            ("Flowrate", "flowRate"),
            ("Total Flow", "totalFlow"),
            ("Pressure", "pressure"),
            ("Pressure Voltage", "pressureVoltage"),
        ],
        &[],
    )
}

/// The five campus groups: air quality and weather open, the rest secure.
pub fn campus_catalogue() -> Catalogue {
    let c = Catalogue::new(DEFAULT_PROVIDER, DEFAULT_SERVER);
    c.add_group("iiith-env-aqm", AccessClass::Open, "iudx:EnvAQM", "AE-AQ", "AQ", aq_model(), "Air quality monitoring nodes");
    c.add_group(
        "iiith-energy-meter",
        AccessClass::Secure,
        "iudx:EnergyMeter",
        "AE-EM",
        "EM",
        DataModel::default(),
        "Energy consumption monitoring nodes",
    );
    c.add_group("iiith-env-weather", AccessClass::Open, "iudx:EnvWeather", "AE-WE", "WE", weather_model(), "Weather monitoring nodes");
    c.add_group(
        "iiith-water-monitoring",
        AccessClass::Secure,
        "iudx:WaterMonitoring",
        "AE-WM-WF",
        "WM",
        water_model(),
        "Water flow monitoring nodes",
    );
    c.add_group(
        "iiith-solar-panel",
        AccessClass::Secure,
        "iudx:SolarPanel",
        "AE-SL",
        "SL",
        DataModel::default(),
        "Solar energy monitoring nodes",
    );
    c
}
