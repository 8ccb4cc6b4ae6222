//! Command-line interface.
//!
//! Five subcommands cover the full workflow: `synth` writes a synthetic
//! dataset, `backtest` turns a dataset into per-method forecast curves,
//! `evaluate` scores curves against observed prices, `selection-report`
//! aggregates regression coefficients into selection frequencies and `bench`
//! times one day of forecasts per method.
//!
//! Exit codes: 0 on success (including `--help`/`--version`), 1 for
//! command-line usage errors, 2 when execution fails.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::backtest::{self, BacktestConfig, BacktestError, MethodForecasts};
use crate::bench::{self, BenchConfig, BenchError};
use crate::ingest::{load_dataset, save_dataset, IngestError};
use crate::methods::{
    selection_frequency, Centering, MethodError, MethodKind, MethodSpec, TauCoefficients,
};
use crate::report::{
    format_summary, read_coefficients_csv, read_curves_csv, score_methods, write_coefficients_csv,
    write_crps_csv, write_curves_csv, write_levels_csv, write_reports_json, write_selection_csv,
    ReportError,
};
use crate::synth::{self, SynthConfig, SynthError, SynthRegime};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser)]
#[command(
    name = "probcast",
    version,
    about = "Probabilistic electricity price forecasts from point-forecast ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic day-ahead dataset CSV.
    Synth(SynthArgs),
    /// Run the rolling backtest and write per-method forecast curves.
    Backtest(BacktestArgs),
    /// Score forecast curves against observed prices.
    Evaluate(EvaluateArgs),
    /// Aggregate regression coefficients into selection frequencies.
    SelectionReport(SelectionArgs),
    /// Time one day of forecasts per method.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Destination CSV file.
    #[arg(long)]
    output: PathBuf,
    /// Number of days to generate.
    #[arg(long)]
    days: usize,
    /// Delivery hours per day (1..=24).
    #[arg(long, default_value_t = 24)]
    hours: u32,
    /// Ensemble members per record.
    #[arg(long, default_value_t = 25)]
    members: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Error regime: gaussian-ensemble, skewed-errors or spread-informative.
    #[arg(long, default_value_t = SynthRegime::GaussianEnsemble)]
    regime: SynthRegime,
    #[arg(long, default_value = "2020-01-01")]
    start_date: NaiveDate,
    /// Standard deviation of member forecast errors.
    #[arg(long, default_value_t = 5.0)]
    member_noise: f64,
    /// Standard deviation scale of observation errors.
    #[arg(long, default_value_t = 5.0)]
    observation_noise: f64,
}

#[derive(Args)]
struct BacktestArgs {
    /// Dataset CSV (date,hour,observed,f1..fM).
    #[arg(long)]
    input: PathBuf,
    /// Output directory; one subdirectory per method.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',', default_values_t = MethodKind::ALL)]
    methods: Vec<MethodKind>,
    /// Calibration window length in days.
    #[arg(long, default_value_t = 364)]
    window: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Ensemble center for the error-quantile methods: mean or median.
    #[arg(long, default_value_t = Centering::EnsembleMean)]
    centering: Centering,
    /// Average duplicated clock-change hours and impute the missing one.
    #[arg(long)]
    merge_dst: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Backtest output directory holding <method>/curves.csv.
    #[arg(long)]
    forecasts: PathBuf,
    /// Dataset CSV with the observed prices.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for scores.json, levels.csv and crps.csv.
    #[arg(long)]
    output: PathBuf,
    /// Methods to score (default: every method directory present).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodKind>>,
    /// Miscoverage levels alpha for the interval diagnostics.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.04, 0.10, 0.20])]
    alphas: Vec<f64>,
    /// Reference method for the conditional-predictive-ability columns.
    #[arg(long, default_value_t = MethodKind::Iqra)]
    reference: MethodKind,
    /// Average duplicated clock-change hours and impute the missing one.
    #[arg(long)]
    merge_dst: bool,
}

#[derive(Args)]
struct SelectionArgs {
    /// Backtest output directory holding <method>/coefficients.csv.
    #[arg(long)]
    forecasts: PathBuf,
    /// Regression method to aggregate (qra, qrm, lqra or iqra).
    #[arg(long)]
    method: MethodKind,
    /// Destination CSV for the per-level selection matrix.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset CSV (date,hour,observed,f1..fM).
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',', default_values_t = MethodKind::ALL)]
    methods: Vec<MethodKind>,
    /// Calibration window length in days.
    #[arg(long, default_value_t = 364)]
    window: usize,
    /// Timed passes per method; the best is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Optional JSON destination for the raw timings.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Average duplicated clock-change hours and impute the missing one.
    #[arg(long)]
    merge_dst: bool,
}

/// Parses `args` and runs the selected subcommand, returning the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn"),
    )
    .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::SelectionReport(args) => cmd_selection_report(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            2
        }
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        days: args.days,
        hours: args.hours,
        members: args.members,
        seed: args.seed,
        regime: args.regime,
        start_date: args.start_date,
        member_noise: args.member_noise,
        observation_noise: args.observation_noise,
    };
    let dataset = synth::generate(&config)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_dataset(&args.output, &dataset)?;
    println!(
        "wrote {} records ({} days x {} hours, {} members, {} regime) to {}",
        dataset.len(),
        args.days,
        args.hours,
        args.members,
        args.regime,
        args.output.display()
    );
    Ok(())
}

fn cmd_backtest(args: BacktestArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.input, args.merge_dst)?;
    let methods = args
        .methods
        .iter()
        .map(|&kind| MethodSpec { centering: args.centering, ..MethodSpec::new(kind) })
        .collect();
    let config = BacktestConfig { methods, window_len: args.window, workers: args.workers };
    let results = backtest::run(&dataset, &config)?;
    for method in &results {
        let dir = args.output.join(method.kind.name());
        create_dir(&dir)?;
        write_curves_csv(&dir.join("curves.csv"), &method.curves)?;
        if method.kind.logs_coefficients() {
            let members = method
                .coefficients
                .first()
                .map_or(0, |row| row.coefficients.slopes.len());
            write_coefficients_csv(&dir.join("coefficients.csv"), &method.coefficients, members)?;
        }
        println!(
            "{}: {} curves{} -> {}",
            method.kind,
            method.curves.len(),
            if method.kind.logs_coefficients() {
                format!(", {} coefficient rows", method.coefficients.len())
            } else {
                String::new()
            },
            dir.display()
        );
    }
    Ok(())
}

/// Method directories under `root` that contain a curves.csv, in canonical
/// order.
fn discover_methods(root: &Path) -> Result<Vec<MethodKind>, CliError> {
    let entries = fs::read_dir(root)
        .map_err(|source| CliError::Io { path: root.display().to_string(), source })?;
    let mut found = Vec::new();
    for entry in entries {
        let entry =
            entry.map_err(|source| CliError::Io { path: root.display().to_string(), source })?;
        let name = entry.file_name();
        let Ok(kind) = name.to_string_lossy().parse::<MethodKind>() else {
            continue;
        };
        if entry.path().join("curves.csv").is_file() {
            found.push(kind);
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(CliError::Usage(format!(
            "no method directories with curves.csv found under {}",
            root.display()
        )));
    }
    Ok(found)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    for &alpha in &args.alphas {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Usage(format!("alpha {alpha} is not in (0, 1)")));
        }
    }
    let dataset = load_dataset(&args.input, args.merge_dst)?;
    let methods = match args.methods {
        Some(mut methods) => {
            methods.sort();
            methods.dedup();
            methods
        }
        None => discover_methods(&args.forecasts)?,
    };
    let mut forecasts = Vec::with_capacity(methods.len());
    for kind in methods {
        let path = args.forecasts.join(kind.name()).join("curves.csv");
        let curves = read_curves_csv(&path)?;
        forecasts.push(MethodForecasts { kind, curves, coefficients: Vec::new() });
    }
    let reports = score_methods(&forecasts, &dataset, &args.alphas, args.reference)?;
    create_dir(&args.output)?;
    write_reports_json(&args.output.join("scores.json"), &reports)?;
    write_levels_csv(&args.output.join("levels.csv"), &reports)?;
    write_crps_csv(&args.output.join("crps.csv"), &reports)?;
    print!("{}", format_summary(&reports));
    println!("wrote scores to {}", args.output.display());
    Ok(())
}

fn cmd_selection_report(args: SelectionArgs) -> Result<(), CliError> {
    if !args.method.logs_coefficients() {
        return Err(CliError::Usage(format!(
            "method {} does not produce regression coefficients",
            args.method
        )));
    }
    let path = args.forecasts.join(args.method.name()).join("coefficients.csv");
    let (rows, members) = read_coefficients_csv(&path)?;
    let entries: Vec<TauCoefficients> = rows.into_iter().map(|r| r.coefficients).collect();
    let frequency = selection_frequency(&entries, members)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_selection_csv(&args.output, &frequency)?;
    println!(
        "{}: {} models per level; aggregate selection frequency {:.2}% over 99 levels x {} members; matrix -> {}",
        args.method,
        frequency.models_per_level,
        frequency.aggregate,
        frequency.members,
        args.output.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.input, args.merge_dst)?;
    let config =
        BenchConfig { methods: args.methods, window_len: args.window, repeats: args.repeats };
    let report = bench::run(&dataset, &config)?;
    println!(
        "one forecast day: {} hours x 99 levels, window {} days, {} members, best of {}",
        report.hours, report.window_len, report.members, report.repeats
    );
    for entry in &report.entries {
        println!("{:<5} {:>10.4}s", entry.method.name(), entry.best());
    }
    for note in report.ordering_notes() {
        println!("{note}");
    }
    if let Some(path) = args.output {
        let file = fs::File::create(&path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &report)
            .map_err(|e| CliError::Report(ReportError::Json(e)))?;
        println!("timings -> {}", path.display());
    }
    Ok(())
}
