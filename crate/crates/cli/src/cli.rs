//! Command-line surface.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "citylab", version, about = "Smart-city IoT platform: monitor, data lake, data exchange and quality pipeline")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true, env = "CITYLAB_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides `data_dir`.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the monitor, lake intake, exchange and quality listeners.
    Serve(ServeArgs),
    /// Create the campus deployment: policies, AEs, node containers,
    /// descriptors and subscriptions.
    Seed(SeedArgs),
    /// Decode energy-meter payloads.
    DecodePdu(DecodeArgs),
    /// Encode readings, JSON objects, into payloads.
    EncodePdu(EncodeArgs),
    /// Generate a seeded node run and post it to the platform.
    Simulate(SimulateArgs),
    /// Quality report for a node over a window.
    Report(ReportArgs),
    /// Query the exchange or the monitor.
    #[command(subcommand)]
    Query(QueryCommand),
    /// Issue or revoke exchange tokens.
    #[command(subcommand)]
    Token(TokenCommand),
    /// Data lake maintenance.
    #[command(subcommand)]
    Lake(LakeCommand),
    /// Run a scripted charge-point scenario.
    #[command(subcommand)]
    Charger(ChargerCommand),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Seed the campus deployment once the listeners are up.
    #[arg(long)]
    pub seed: bool,
    #[arg(long)]
    pub monitor_addr: Option<SocketAddr>,
    #[arg(long)]
    pub lake_addr: Option<SocketAddr>,
    #[arg(long)]
    pub exchange_addr: Option<SocketAddr>,
    #[arg(long)]
    pub quality_addr: Option<SocketAddr>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Monitor base URL; without it the data directory is seeded directly.
    #[arg(long)]
    pub url: Option<String>,
    /// Skip the demo readings on the air-quality node.
    #[arg(long)]
    pub no_demo_data: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// 92 hex digits.
    pub hex: Option<String>,
    /// One payload per line.
    #[arg(long, conflicts_with = "hex")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// A reading as a JSON object.
    pub reading: Option<String>,
    /// One JSON reading per line.
    #[arg(long, conflicts_with = "reading")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in profile (aq, wm, we, em), a campus node name, or a JSON profile file.
    #[arg(long)]
    pub profile: String,
    /// Rename the simulated node.
    #[arg(long)]
    pub node: Option<String>,
    /// Run length, e.g. `1h` or `3600s`.
    #[arg(long, default_value = "1h")]
    pub duration: String,
    /// none, typical, aq-day, or a JSON plan file. Defaults to the profile's own.
    #[arg(long)]
    pub faults: Option<String>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epoch seconds or RFC 3339.
    #[arg(long)]
    pub start: Option<String>,
    /// Where the run log goes; defaults under the data directory.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Post to a running monitor instead of the data directory.
    #[arg(long)]
    pub url: Option<String>,
    /// Generate and log only.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub node: String,
    /// Epoch seconds or RFC 3339.
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub end: String,
    /// Delay histogram bin width in seconds.
    #[arg(long, default_value_t = citylab_quality::DEFAULT_BIN_SECS)]
    pub bin: i64,
    /// Quality service URL; without it the data directory is read.
    #[arg(long)]
    pub url: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExchangeTarget {
    /// Exchange base URL; defaults to the configured address.
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long, env = "CITYLAB_TOKEN")]
    pub token: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum QueryCommand {
    /// Latest observation of a node.
    Latest {
        id: String,
        #[command(flatten)]
        target: ExchangeTarget,
    },
    /// Time-series query.
    Temporal {
        id: String,
        #[arg(long, default_value = "during")]
        timerel: String,
        #[arg(long)]
        time: String,
        #[arg(long)]
        end_time: Option<String>,
        /// Comma-separated attributes.
        #[arg(long)]
        attrs: Option<String>,
        /// Filter such as `pm2p5>30.00`.
        #[arg(long)]
        q: Option<String>,
        #[arg(long)]
        offset: Option<u64>,
        #[command(flatten)]
        target: ExchangeTarget,
    },
    /// Descriptor of a node.
    Meta {
        id: String,
        #[command(flatten)]
        target: ExchangeTarget,
    },
    /// Catalogue entry of an item.
    Catalogue {
        id: String,
        #[command(flatten)]
        target: ExchangeTarget,
    },
    /// Resource paths in the monitor carrying every given label.
    Discover {
        #[arg(long = "label", short = 'l', required = true)]
        labels: Vec<String>,
        #[arg(long)]
        origin: Option<String>,
        /// Monitor base URL.
        #[arg(long)]
        url: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TokenCommand {
    Issue {
        #[arg(long, env = "CITYLAB_CLIENT_ID")]
        user: String,
        #[arg(long, env = "CITYLAB_CLIENT_SECRET")]
        secret: String,
        /// Resource group name or id; without it the whole server is requested.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, default_value = "consumer")]
        role: String,
        #[arg(long)]
        url: Option<String>,
    },
    /// Revoke every token issued to a user so far.
    Revoke {
        #[arg(long)]
        user: String,
        #[arg(long)]
        url: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LakeCommand {
    /// Apply journaled notifications the stores have not seen.
    Replay {
        /// Replay another journal into the lake.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Rebuild every store from the journal in a scratch directory and
        /// compare exports byte for byte.
        #[arg(long)]
        verify: bool,
    },
    /// Notifications the lake, the dispatcher or the quality pipeline gave up on.
    DeadLetters,
}

#[derive(Debug, Subcommand)]
pub enum ChargerCommand {
    Run {
        scenario: PathBuf,
        /// Monitor base URL; without it the data directory is used.
        #[arg(long)]
        url: Option<String>,
    },
}
