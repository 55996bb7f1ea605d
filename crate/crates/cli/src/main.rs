//! `audit`: security audit toolkit for Electron-style application bundles.
//!
//! Exit status: 0 clean, 1 findings present, 2 operational or usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

#[derive(Parser)]
#[command(
    name = "audit",
    version,
    about = "Audit Electron application bundles, update feeds and dependencies"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, env = "AUDIT_FORMAT", default_value_t = Format::Table)]
    format: Format,

    /// key=value config file; flags and environment variables take precedence.
    #[arg(long, global = true, env = "AUDIT_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read and write asar archives.
    #[command(subcommand)]
    Asar(AsarCmd),
    /// Inspect bundle dependencies.
    #[command(subcommand)]
    Scan(ScanCmd),
    /// Squirrel-style update feeds.
    #[command(subcommand)]
    Update(UpdateCmd),
    /// Tamper detection.
    #[command(subcommand)]
    Integrity(IntegrityCmd),
    /// Test fixtures.
    #[command(subcommand)]
    Fixture(FixtureCmd),
}

#[derive(Subcommand)]
pub enum AsarCmd {
    /// Unpack an archive into a new or empty directory.
    Extract { archive: PathBuf, dest: PathBuf },
    /// Pack a directory deterministically.
    Pack { dir: PathBuf, out: PathBuf },
    /// List archive entries.
    List { archive: PathBuf },
}

#[derive(Args)]
pub struct WalkArgs {
    /// Follow devDependencies too.
    #[arg(long)]
    pub dev: bool,
    /// Follow optionalDependencies too.
    #[arg(long)]
    pub optional: bool,
    /// Follow peerDependencies too.
    #[arg(long)]
    pub peer: bool,
}

#[derive(Subcommand)]
pub enum ScanCmd {
    /// Module tree and direct/total counts.
    Deps {
        bundle: PathBuf,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Match installed modules against an advisory database.
    Advisories {
        /// Advisory database (JSON).
        #[arg(long, env = "AUDIT_DB")]
        db: PathBuf,
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Commits between each module's release tag and its default branch.
    Divergence {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        /// Answer repository lookups from a recorded cassette instead of the network.
        #[arg(long, env = "AUDIT_CASSETTE", conflicts_with = "github_api")]
        cassette: Option<PathBuf>,
        /// GitHub API base URL. The token is read from AUDIT_GITHUB_TOKEN.
        #[arg(long, env = "AUDIT_GITHUB_API", default_value = "https://api.github.com")]
        github_api: String,
        /// Extra PEM root certificate for the API endpoint.
        #[arg(long, env = "AUDIT_CA_CERT")]
        ca_cert: Option<PathBuf>,
        /// Commits behind at or above which a module is suspect.
        #[arg(long, env = "AUDIT_THRESHOLD", default_value_t = bundle_audit::divergence::DEFAULT_THRESHOLD)]
        threshold: u64,
        /// Concurrent repository lookups.
        #[arg(long, env = "AUDIT_PARALLELISM", default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
        parallelism: u16,
    },
}

#[derive(Subcommand)]
pub enum UpdateCmd {
    /// Serve a feed directory over HTTP or HTTPS.
    Serve {
        /// Directory laid out as <platform>/RELEASES and <platform>/<package>.
        #[arg(long)]
        root: PathBuf,
        #[arg(long, env = "AUDIT_BIND", default_value = "127.0.0.1:8080")]
        bind: std::net::SocketAddr,
        /// PEM certificate chain; enables HTTPS together with --tls-key.
        #[arg(long, env = "AUDIT_TLS_CERT", requires = "tls_key")]
        tls_cert: Option<PathBuf>,
        #[arg(long, env = "AUDIT_TLS_KEY", requires = "tls_cert")]
        tls_key: Option<PathBuf>,
        /// Stop after this many seconds instead of running until killed.
        #[arg(long, value_name = "SECS")]
        duration: Option<u64>,
    },
    /// Check an update feed for insecure transport and missing signatures.
    Probe {
        /// Feed directory URL or RELEASES URL.
        url: String,
        /// Download RELEASES and look for signature manifests.
        #[arg(long)]
        fetch: bool,
        #[arg(long, env = "AUDIT_CA_CERT")]
        ca_cert: Option<PathBuf>,
    },
    /// Build a full package from an app directory and publish it to a feed directory.
    MakePackage {
        app_dir: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        version: String,
        #[arg(long)]
        title: Option<String>,
        #[arg(long, default_value = "")]
        authors: String,
        /// Platform directory that receives the package and RELEASES.
        #[arg(long)]
        feed_dir: PathBuf,
        /// Also write a signature manifest.
        #[arg(long)]
        sign: bool,
    },
    /// Run one update cycle of a mock client against a feed.
    SimulateClient {
        feed_url: String,
        /// Installed version.
        #[arg(long)]
        current: String,
        /// Highest version ever seen; defaults to --current.
        #[arg(long)]
        highest_seen: Option<String>,
        #[arg(long)]
        install_dir: PathBuf,
        #[arg(long)]
        require_signature: bool,
        #[arg(long)]
        require_tls: bool,
        #[arg(long, env = "AUDIT_CA_CERT")]
        ca_cert: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum IntegrityCmd {
    /// Record a SHA-256 digest of every file.
    Baseline {
        bundle: PathBuf,
        /// Where to write the baseline (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a bundle against a baseline.
    Check {
        bundle: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
    },
    /// Look for an injected require without a baseline.
    Heuristics { bundle: PathBuf },
}

#[derive(Subcommand)]
pub enum FixtureCmd {
    /// Plant a payload module in a marked fixture archive.
    Inject {
        archive: PathBuf,
        /// Payload package directory.
        #[arg(long)]
        payload: PathBuf,
        /// Module name; must match the payload's package.json.
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::locate(&args) {
        if let Err(e) = config::apply(path.as_ref()) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let out = output::Out::new(cli.format);
    let result = match cli.command {
        Command::Asar(c) => commands::asar(c, &out),
        Command::Scan(c) => commands::scan(c, &out),
        Command::Update(c) => commands::update(c, &out),
        Command::Integrity(c) => commands::integrity(c, &out),
        Command::Fixture(c) => commands::fixture(c, &out),
    };
    match result {
        Ok(commands::Status::Clean) => ExitCode::SUCCESS,
        Ok(commands::Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
