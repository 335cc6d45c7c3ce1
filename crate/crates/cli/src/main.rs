mod analyze;

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qgms_core::blind_harness::{verify_ledger, AnonymizationManifest, CommitmentLedger};
use qgms_core::market_data::read_csv_file;
use qgms_core::{
    build_tree, check_admissibility, detect_terminal_zones, evaluate_predictions, DetectorConfig, EvaluationConfig,
    ExactSeries, HierarchyConfig,
};

#[derive(Debug, Parser)]
#[command(name = "qgms", version, about = "Multi-scale market-structure analysis and blind replay validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a bar file, then write it in normalized form.
    Ingest(IngestArgs),
    /// Build the structure tree, check admissibility and detect terminal zones.
    Analyze(AnalyzeArgs),
    /// Blind replay sessions.
    Blind {
        #[command(subcommand)]
        command: BlindCommand,
    },
    /// Score the calls in a ledger against the revealed series.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Subcommand)]
enum BlindCommand {
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Check a ledger and manifest against a published commitment.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    /// Bar file (`timestamp,open,high,low,close[,volume]`).
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the part of the file name before the first `_`.
    #[arg(long)]
    symbol: Option<String>,
    /// Defaults to the part of the file name after the first `_`.
    #[arg(long)]
    timeframe: Option<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Reversal threshold of the finest level, as a fraction of the swing.
    #[arg(long, default_value_t = 0.382)]
    rho: f64,
    /// Threshold ratio between consecutive levels.
    #[arg(long, default_value_t = 1.6)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    min_bars: usize,
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.15)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value = "qgms-data")]
    data_dir: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Hex SHA-256 published when the session was created.
    #[arg(long)]
    commitment: String,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// The revealed (original) series.
    #[arg(long)]
    series: PathBuf,
    /// When given, the series must match the manifest's digest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long, default_value_t = 14)]
    atr: usize,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path, symbol: Option<&str>, timeframe: Option<&str>) -> Result<ExactSeries> {
    read_csv_file(path, symbol, timeframe).with_context(|| format!("cannot load {}", path.display()))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let s = &args.series;
    let series = load(&s.input, s.symbol.as_deref(), s.timeframe.as_deref())?;
    let csv = series.to_csv();
    match &args.output {
        Some(path) => fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{csv}"),
    }
    eprintln!("{} {}: {} bars", series.symbol(), series.timeframe(), series.len());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let hierarchy = HierarchyConfig {
        levels: args.levels,
        rho0: args.rho,
        gamma: args.gamma,
        min_bars: args.min_bars,
        ..HierarchyConfig::default()
    };
    let detector = DetectorConfig { epsilon: args.epsilon, delta: args.delta };
    hierarchy.validate()?;
    detector.validate()?;

    let series = load(&args.input, None, None)?;
    let roots = build_tree(&series, &hierarchy)?;
    let violations = check_admissibility(&roots, &hierarchy.regions);
    let zones = detect_terminal_zones(&roots, &detector, &hierarchy.regions)?;
    let report = analyze::report(series.len(), &hierarchy, &detector, &roots, &violations, &zones);
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    let config = qgms_service::ServiceConfig { addr: SocketAddr::new(args.host, args.port), data_dir: args.data_dir };
    let runtime = tokio::runtime::Runtime::new().context("cannot start the async runtime")?;
    runtime.block_on(qgms_service::serve(config))?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let ledger = read_text(&args.ledger)?;
    let manifest = read_text(&args.manifest)?;
    let v = verify_ledger(&ledger, &manifest, &args.commitment)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    if let Some(link) = v.first_broken_link {
        eprintln!("first broken link: {link}");
    }
    if !v.commitment_ok {
        eprintln!("manifest does not match the commitment");
    }
    if !v.no_lookahead {
        eprintln!("ledger references bars that had not been served");
    }
    if !v.all_ok() {
        bail!("verification failed");
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let config = EvaluationConfig { horizon_bars: args.horizon, atr_window: args.atr, hit_multiplier: args.k };
    config.validate()?;
    let series = load(&args.series, None, None)?;
    if let Some(path) = &args.manifest {
        let manifest = AnonymizationManifest::from_json(&read_text(path)?)?;
        if !manifest.matches_series(&series) {
            bail!("{} does not match the manifest digest", args.series.display());
        }
    }
    let ledger = CommitmentLedger::from_jsonl(&read_text(&args.ledger)?)?;
    let check = ledger.verify();
    if !check.chain_ok {
        eprintln!("warning: ledger chain is broken at entry {:?}", check.first_broken_link);
    }
    let report = evaluate_predictions(&series, &ledger.predictions(), &config)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => print!("{}", report.to_table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Analyze(args) => analyze(args),
        Command::Blind { command: BlindCommand::Serve(args) } => serve(args),
        Command::Blind { command: BlindCommand::Verify(args) } => verify(args),
        Command::Evaluate(args) => evaluate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
