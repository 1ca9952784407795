//! `medeval`: one binary over the toolkit's modules.
//!
//! Exit codes: 0 success, 1 domain error (bad data, contamination found,
//! numerical failure), 2 usage error (bad flags, unreadable config).

pub mod cmd;
pub mod config;
pub mod manifest;
pub mod server;

use clap::{Parser, Subcommand};
use config::PipelineConfig;
use serde::Serialize;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

pub use manifest::TOOL_VERSION;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

pub type CmdResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn domain(msg: impl Into<String>) -> CliError {
    CliError::Domain(msg.into())
}

/// Resolved configuration shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub config: PipelineConfig,
    pub fingerprint: String,
}

impl Ctx {
    pub fn new(config: PipelineConfig) -> Self {
        let fingerprint = config.fingerprint();
        Ctx { config, fingerprint }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Key/value pairs embedded in PNG text chunks.
    pub fn png_text(&self) -> [(&str, &str); 2] {
        [("tool_version", TOOL_VERSION), ("config_fingerprint", self.fingerprint.as_str())]
    }

    pub fn manifest(&self, path: &Path) -> CmdResult<manifest::ManifestWriter<std::io::BufWriter<std::fs::File>>> {
        Ok(manifest::create(path, &self.fingerprint)?)
    }

    /// Pretty JSON with the tool version and fingerprint in front of `body`'s fields.
    pub fn write_json<T: Serialize>(&self, path: &Path, body: &T) -> CmdResult {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            tool_version: &'a str,
            config_fingerprint: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let stamped = Stamped {
            tool_version: TOOL_VERSION,
            config_fingerprint: &self.fingerprint,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&stamped)?;
        bytes.push(b'\n');
        ensure_parent(path)?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// CSV text behind a `#` provenance line.
    pub fn write_csv(&self, path: &Path, body: &str) -> CmdResult {
        ensure_parent(path)?;
        std::fs::write(
            path,
            format!("# medeval {TOOL_VERSION} config_fingerprint={}\n{body}", self.fingerprint),
        )?;
        Ok(())
    }
}

pub fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p),
        _ => Ok(()),
    }
}

/// `path` relative to `base` with forward slashes, for manifests that must not
/// depend on where the output directory lives.
pub fn rel_path(path: &Path, base: &Path) -> String {
    let rel = path.strip_prefix(base).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Parser)]
#[command(name = "medeval", about = "Medical imaging and report evaluation toolkit", disable_version_flag = true)]
pub struct Cli {
    /// Sectioned TOML config; `MEDEVAL_<SECTION>_<KEY>` variables override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Global seed; every stage derives its own seed from this one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the version.
    #[arg(long)]
    pub version: bool,
    /// With --version, print machine-readable JSON.
    #[arg(long, requires = "version")]
    pub json: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DICOM ingestion: radiographs, CT volumes, windowed CT slices.
    #[command(subcommand)]
    Ingest(cmd::ingest::IngestCmd),
    /// Polygenic risk score images and case/control sampling.
    #[command(subcommand)]
    Featurize(cmd::featurize::FeaturizeCmd),
    /// Dataset split building and leakage checks.
    #[command(subcommand)]
    Split(cmd::split::SplitCmd),
    /// Linear probes on frozen embeddings.
    #[command(subcommand)]
    Probe(cmd::probe::ProbeCmd),
    /// Text generation metrics.
    #[command(subcommand)]
    Metrics(cmd::metrics::MetricsCmd),
    /// Blinded report rating: server and summary.
    #[command(subcommand)]
    Rate(cmd::rate::RateCmd),
    /// Report labels: keyword flags, revision prompts, adjudication.
    #[command(subcommand)]
    Labels(cmd::labels::LabelsCmd),
    /// End-to-end runs on synthetic data.
    #[command(subcommand)]
    Pipeline(cmd::pipeline::PipelineCmd),
}

fn version_text(json: bool) -> String {
    if json {
        serde_json::json!({
            "name": "medeval",
            "version": TOOL_VERSION,
            "manifest_schema": manifest::schema_version(),
        })
        .to_string()
    } else {
        format!("medeval {TOOL_VERSION}")
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CmdResult {
    if cli.version {
        println!("{}", version_text(cli.json));
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(usage("no subcommand given; see `medeval --help`"));
    };
    let mut config = PipelineConfig::from_env(cli.config.as_deref()).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Ctx::new(config);
    log::info!("config fingerprint {} (seed {})", ctx.fingerprint, ctx.seed());
    match command {
        Command::Ingest(c) => cmd::ingest::run(&ctx, c),
        Command::Featurize(c) => cmd::featurize::run(&ctx, c),
        Command::Split(c) => cmd::split::run(&ctx, c),
        Command::Probe(c) => cmd::probe::run(&ctx, c),
        Command::Metrics(c) => cmd::metrics::run(&ctx, c),
        Command::Rate(c) => cmd::rate::run(&ctx, c),
        Command::Labels(c) => cmd::labels::run(&ctx, c),
        Command::Pipeline(c) => cmd::pipeline::run(&ctx, c),
    }
}
