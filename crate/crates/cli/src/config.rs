//! Runtime configuration: a TOML file, then environment overrides, then
//! command-line flags.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use citylab_exchange::token::MIN_SECRET_LEN;
use citylab_ingest::TariffTable;
use citylab_lake::{Durability, Tenancy};
use serde::{Deserialize, Serialize};

pub const SECRET_ENV: &str = "CITYLAB_SECRET";
pub const DATA_DIR_ENV: &str = "CITYLAB_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub monitor_addr: SocketAddr,
    pub lake_addr: SocketAddr,
    pub exchange_addr: SocketAddr,
    pub quality_addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Inline signing secret. `secret_file` wins when both are set.
    pub secret: Option<String>,
    pub secret_file: Option<PathBuf>,
    pub tariff: TariffTable,
    /// Default to `<data_dir>/kb.json` and `<data_dir>/factors.json`.
    pub kb_file: Option<PathBuf>,
    pub factors_file: Option<PathBuf>,
    /// Extra simulator profiles, JSON.
    pub profiles: Vec<PathBuf>,
    pub seed: u64,
    pub tenancy: Tenancy,
    pub durability: Durability,
    pub gzip: bool,
    /// Origin the tools use against the monitor.
    pub origin: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            monitor_addr: ([127, 0, 0, 1], 8080).into(),
            lake_addr: ([127, 0, 0, 1], 8081).into(),
            exchange_addr: ([127, 0, 0, 1], 8082).into(),
            quality_addr: ([127, 0, 0, 1], 8083).into(),
            data_dir: PathBuf::from("citylab-data"),
            secret: None,
            secret_file: None,
            tariff: TariffTable::default(),
            kb_file: None,
            factors_file: None,
            profiles: Vec::new(),
            seed: 42,
            tenancy: Tenancy::PerVertical,
            durability: Durability::Flush,
            gzip: true,
            origin: "admin:admin".into(),
        }
    }
}

impl Config {
    /// Reads `path` when given, then applies the environment.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let mut c: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                // relative paths in the file are relative to the file
                if let Some(base) = p.parent() {
                    c.rebase(base);
                }
                c
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(s) = get(SECRET_ENV).filter(|s| !s.is_empty()) {
            self.secret = Some(s);
            self.secret_file = None;
        }
        if let Some(d) = get(DATA_DIR_ENV).filter(|s| !s.is_empty()) {
            self.data_dir = PathBuf::from(d);
        }
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [&mut self.secret_file, &mut self.kb_file, &mut self.factors_file].into_iter().flatten() {
            fix(p);
        }
        self.profiles.iter_mut().for_each(fix);
    }

    /// The signing secret, refusing anything shorter than the verifier accepts.
    pub fn signing_secret(&self) -> anyhow::Result<Vec<u8>> {
        let raw = match (&self.secret_file, &self.secret) {
            (Some(f), _) => {
                let text = std::fs::read_to_string(f).with_context(|| format!("reading secret file {}", f.display()))?;
                text.trim_end_matches(['\r', '\n']).as_bytes().to_vec()
            }
            (None, Some(s)) => s.as_bytes().to_vec(),
            (None, None) => bail!("no signing secret: set {SECRET_ENV}, `secret` or `secret_file`"),
        };
        if raw.len() < MIN_SECRET_LEN {
            bail!("signing secret is {} bytes, at least {MIN_SECRET_LEN} required", raw.len());
        }
        Ok(raw)
    }

    pub fn kb_path(&self) -> PathBuf {
        self.kb_file.clone().unwrap_or_else(|| self.data_dir.join("kb.json"))
    }

    pub fn factors_path(&self) -> PathBuf {
        self.factors_file.clone().unwrap_or_else(|| self.data_dir.join("factors.json"))
    }

    pub fn tree_dir(&self) -> PathBuf {
        self.data_dir.join("tree")
    }

    pub fn lake_dir(&self) -> PathBuf {
        self.data_dir.join("lake")
    }

    pub fn quality_dir(&self) -> PathBuf {
        self.data_dir.join("quality")
    }

    pub fn catalogue_path(&self) -> PathBuf {
        self.data_dir.join("catalogue.json")
    }

    pub fn users_path(&self) -> PathBuf {
        self.data_dir.join("users.json")
    }

    pub fn revocations_path(&self) -> PathBuf {
        self.data_dir.join("revocations.json")
    }

    pub fn dispatch_dead_letters(&self) -> PathBuf {
        self.data_dir.join("notify-dead-letters.jsonl")
    }

    pub fn monitor_url(&self) -> String {
        format!("http://{}", self.monitor_addr)
    }

    pub fn exchange_url(&self) -> String {
        format!("http://{}", self.exchange_addr)
    }

    pub fn quality_url(&self) -> String {
        format!("http://{}", self.quality_addr)
    }

    pub fn lake_url(&self) -> String {
        format!("http://{}", self.lake_addr)
    }

    /// Every configured file that must exist does.
    pub fn check(&self) -> anyhow::Result<()> {
        let addrs = [self.monitor_addr, self.lake_addr, self.exchange_addr, self.quality_addr];
        for (i, a) in addrs.iter().enumerate() {
            if a.port() != 0 && addrs[..i].contains(a) {
                bail!("listen address {a} is configured twice");
            }
        }
        for p in &self.profiles {
            if !p.exists() {
                bail!("simulator profile {} not found", p.display());
            }
        }
        for p in [&self.kb_file, &self.factors_file].into_iter().flatten() {
            if !p.exists() {
                bail!("{} not found", p.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let mut c: Config = toml::from_str("data_dir = \"/srv/x\"\nsecret = \"from-the-file-0000\"\nseed = 7").unwrap();
        assert_eq!(c.seed, 7);
        c.apply_env(|k| match k {
            SECRET_ENV => Some("from-the-environment".into()),
            DATA_DIR_ENV => Some("/tmp/y".into()),
            _ => None,
        });
        assert_eq!(c.data_dir, PathBuf::from("/tmp/y"));
        assert_eq!(c.signing_secret().unwrap(), b"from-the-environment");
    }

    #[test]
    fn weak_or_missing_secret_refused() {
        let mut c = Config::default();
        assert!(c.signing_secret().is_err());
        c.secret = Some("short".into());
        assert!(c.signing_secret().unwrap_err().to_string().contains("at least 16"));
        c.secret = Some("0123456789abcdef".into());
        assert!(c.signing_secret().is_ok());
    }

    #[test]
    fn secret_file_is_read_and_trimmed() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("secret");
        std::fs::write(&f, "0123456789abcdef\n").unwrap();
        let c = Config { secret_file: Some(f.clone()), ..Config::default() };
        assert_eq!(c.signing_secret().unwrap().len(), 16);
        std::fs::write(&f, "tiny\n").unwrap();
        assert!(c.signing_secret().is_err());
        let missing = Config { secret_file: Some(dir.path().join("nope")), ..Config::default() };
        assert!(missing.signing_secret().is_err());
    }

    #[test]
    fn tariff_and_enums_from_toml() {
        let c: Config = toml::from_str("tenancy = \"Single\"\ndurability = \"Sync\"\n[tariff]\ndefault = 10.0\nhours = { 18 = 12.5 }").unwrap();
        assert_eq!(c.tenancy, Tenancy::Single);
        assert_eq!(c.durability, Durability::Sync);
        assert_eq!(c.tariff.hours[&18], citylab_ingest::charger::Money::rupees(12.5));
    }

    #[test]
    fn unknown_keys_and_duplicate_ports_rejected() {
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
        let c = Config { lake_addr: Config::default().monitor_addr, ..Config::default() };
        assert!(c.check().is_err());
        assert!(Config::default().check().is_ok());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("citylab.toml");
        std::fs::write(&p, "data_dir = \"data\"\ntariff = { default = 12 }\n").unwrap();
        let c = Config::load(Some(&p)).unwrap();
        assert!(c.data_dir.starts_with(dir.path()) || std::env::var(DATA_DIR_ENV).is_ok());
        assert_eq!(c.tariff.default, citylab_ingest::Money::rupees(12.0));
    }
}
