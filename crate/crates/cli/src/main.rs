use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mamdi::engine::{self, TrialParams};
use mamdi::experiment::{self, SweepGrid, SweepKind};
use mamdi::figures::Figure;
use mamdi::output::{self, FileHeader, OutputRow};
use mamdi::{ConfigError, Mode, RawConfig, SourceKind, SystemConfig};

const WORKERS_ENV: &str = "MAMDI_WORKERS";

#[derive(Parser)]
#[command(name = "mamdi", version, about = "Key-rate models for memory-assisted MDI-QKD over free-space links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic rate curves only.
    Analytic(SweepArgs),
    /// One Monte Carlo batch at a single operating point, reported as JSON.
    Simulate(SimulateArgs),
    /// Monte Carlo plus analytic, guide and BB84 rows over a grid.
    Sweep(SweepArgs),
    /// Runs a named figure grid and writes a table plus per-curve plot data.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (directory for `compare`); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Distances in km; defaults to 1 km steps up to 35 km (50 km when async).
    #[arg(long, value_delimiter = ',')]
    distance_km: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    mode: Vec<Mode>,
    #[arg(long, value_delimiter = ',', value_parser = parse_source)]
    source: Vec<SourceKind>,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eta_mem: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    tau_ms: Vec<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_source)]
    source: Option<SourceKind>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    distance_km: Option<f64>,
    #[arg(long)]
    eta_mem: Option<f64>,
    #[arg(long)]
    tau_ms: Option<f64>,
    /// Include the distribution of clock units per success.
    #[arg(long)]
    histogram: bool,
    /// Test hook: per-round load probability, bypassing the channel model.
    #[arg(long, hide = true, requires = "force_survive")]
    force_p_load: Option<f64>,
    /// Test hook: per-round survival probability.
    #[arg(long, hide = true, requires = "force_p_load")]
    force_survive: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// One of sync-eff, sync-coh, async-eff, async-coh, mean-gc.
    figure: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "sync" => Ok(Mode::Sync),
        "async" => Ok(Mode::Async),
        "bb84" => Ok(Mode::Bb84),
        _ => Err(format!("expected sync, async or bb84, got `{s}`")),
    }
}

fn parse_source(s: &str) -> Result<SourceKind, String> {
    match s {
        "sps" => Ok(SourceKind::Sps),
        "wcp" => Ok(SourceKind::Wcp),
        _ => Err(format!("expected sps or wcp, got `{s}`")),
    }
}

/// Failures split by exit status.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_workers() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analytic(args) => cmd_sweep(args, SweepKind::AnalyticOnly),
        Command::Sweep(args) => cmd_sweep(args, SweepKind::Full),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn load_config(common: &Common) -> Result<SystemConfig, Failure> {
    let raw = match &common.config {
        Some(path) => RawConfig::from_file(path).map_err(|e| with_path(e, path))?,
        None => RawConfig::default(),
    };
    let mut cfg = match &common.config {
        Some(path) => raw.validate().map_err(|e| with_path(e, path))?,
        None => raw.validate()?,
    };
    if let Some(t) = common.trials {
        cfg = cfg.with_trials(t);
    }
    if let Some(s) = common.seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg.revalidate()?)
}

fn with_path(e: ConfigError, path: &Path) -> Failure {
    Failure::Config(anyhow::Error::new(e).context(format!("config file {}", path.display())))
}

fn sweep_grid(args: &SweepArgs, cfg: &SystemConfig) -> Result<SweepGrid, Failure> {
    let mut grid = SweepGrid::single(cfg);
    if !args.mode.is_empty() {
        grid.modes = args.mode.clone();
    }
    if !args.source.is_empty() {
        grid.sources = args.source.clone();
    }
    if !args.mu.is_empty() {
        grid.mean_photon_numbers = args.mu.clone();
    }
    if !args.eta_mem.is_empty() {
        grid.memory_efficiencies = args.eta_mem.clone();
    }
    if !args.tau_ms.is_empty() {
        grid.coherence_times_ms = args.tau_ms.clone();
    }
    grid.distances_km = if args.distance_km.is_empty() {
        let mode = if grid.modes.contains(&Mode::Async) { Mode::Async } else { Mode::Sync };
        experiment::default_distances(mode)
    } else {
        args.distance_km.clone()
    };
    // Reject bad flag values up front instead of as per-point error rows.
    for point in grid.points() {
        point.apply(cfg)?;
    }
    Ok(grid)
}

fn cmd_sweep(args: SweepArgs, kind: SweepKind) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let grid = sweep_grid(&args, &cfg)?;
    let rows = experiment::sweep(&grid, &cfg, kind).map_err(|e| Failure::Config(e.into()))?;
    let label = match kind {
        SweepKind::Full => "sweep",
        SweepKind::AnalyticOnly => "analytic",
    };
    let text = render(&FileHeader::new(&cfg, label), &rows, args.format)?;
    emit(args.common.out.as_deref(), &text)?;
    Ok(())
}

fn render(header: &FileHeader, rows: &[OutputRow], format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Csv => output::to_csv(header, rows)?,
        Format::Json => output::to_json(header, rows),
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if let Some(mode) = args.mode {
        cfg = cfg.with_mode(mode);
    }
    if let Some(kind) = args.source {
        let mu = args.mu.unwrap_or(cfg.source.mean_photon_number);
        cfg = cfg.with_source(kind, mu);
    } else if let Some(mu) = args.mu {
        cfg.source.mean_photon_number = mu;
    }
    if let Some(km) = args.distance_km {
        cfg = cfg.with_distance_km(km);
    }
    if args.eta_mem.is_some() || args.tau_ms.is_some() {
        let eff = args.eta_mem.unwrap_or(cfg.memory.efficiency);
        let tau = args.tau_ms.unwrap_or(cfg.coherence_time_ms());
        cfg = cfg.with_memory(eff, tau);
    }
    let cfg = cfg.revalidate()?;

    let params = match (args.force_p_load, args.force_survive) {
        (Some(p), Some(s)) => {
            for (name, v) in [("--force-p-load", p), ("--force-survive", s)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Failure::Config(anyhow::anyhow!("{name} must lie in [0, 1], got {v}")));
                }
            }
            TrialParams::from_probabilities(cfg.protocol.mode, p, s, cfg.simulation.max_rounds)
        }
        _ => TrialParams::from_config(&cfg),
    };
    let tally = engine::run_batch_params(&params, cfg.simulation.trials, cfg.simulation.seed);
    let est = experiment::aggregate(&tally, &cfg).map_err(anyhow::Error::from)?;
    let point = SweepGrid::single(&cfg).points().remove(0);
    let mut row = OutputRow::from_estimate(&point, &cfg, &tally, &est);
    if params != TrialParams::from_config(&cfg) {
        row.push_flag("forced_probabilities");
    }

    let mut report = json!({
        "header": FileHeader::new(&cfg, "simulate"),
        "result": row,
        "n_loaded": tally.n_loaded,
        "low_statistics": est.flags.low_statistics,
    });
    if args.histogram {
        let hist: Vec<_> = tally.m_histogram.iter().map(|(m, c)| json!({ "m": m, "count": c })).collect();
        report["m_histogram"] = json!(hist);
    }
    let mut text = serde_json::to_string_pretty(&report).context("encoding report")?;
    text.push('\n');
    emit(args.common.out.as_deref(), &text)?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let figure: Figure = args.figure.parse().map_err(|e| Failure::Config(anyhow::Error::new(e)))?;
    let cfg = load_config(&args.common)?;
    let Some(dir) = args.common.out.as_deref() else {
        return Err(Failure::Config(anyhow::anyhow!("compare needs --out <DIR>")));
    };
    let rows = experiment::sweep(&figure.grid(), &cfg, SweepKind::Full).map_err(|e| Failure::Config(e.into()))?;
    let header = FileHeader::new(&cfg, format!("compare {figure}"));

    let ext = match args.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let table_name = format!("{figure}.{ext}");
    let mut files = vec![(PathBuf::from(&table_name), render(&header, &rows, args.format)?)];
    let mut manifest = Vec::new();
    for curve in output::curves(&rows, figure.plot_columns()) {
        let rel = PathBuf::from("curves").join(format!("{}.csv", curve.name));
        manifest.push(json!({
            "file": rel.to_string_lossy(),
            "curve": curve.name,
            "column": curve.column,
            "points": curve.points.len(),
        }));
        files.push((rel, output::curve_to_text(&header, &curve)));
    }
    let manifest = json!({ "header": header, "table": table_name, "curves": manifest });
    let mut manifest_text = serde_json::to_string_pretty(&manifest).context("encoding manifest")?;
    manifest_text.push('\n');
    files.push((PathBuf::from("manifest.json"), manifest_text));

    fs::create_dir_all(dir.join("curves")).with_context(|| format!("creating {}", dir.display()))?;
    for (rel, text) in &files {
        write_atomic(&dir.join(rel), text)?;
    }
    eprintln!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()).context("writing to standard output"),
    }
}

/// Writes via a sibling temp file and a rename so a failed run never leaves
/// a truncated output behind.
fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        bail!("renaming {} to {}: {e}", tmp.display(), path.display());
    }
    Ok(())
}
