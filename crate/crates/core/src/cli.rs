//! Command-line front end: dataset ingestion and the `test`, `simulate` and
//! `weights` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::bootstrap::{BootstrapConfig, MultiplierLaw};
use crate::data::Dataset;
use crate::engine::{self, CriticalMode, TestConfig, TestVariant};
use crate::error::{Error, Result};
use crate::harness::{self, Preset, Scale};
use crate::model::{FitOptions, ParametricModel};
use crate::smoother::{SmootherFamily, SmootherGrid};
use crate::variance::{VarianceMethod, DEFAULT_LOCAL_BANDWIDTH};

/// Smallest accepted dataset.
pub const MIN_ROWS: usize = 10;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Bootstrap { source, .. } => exit_code(source),
        e if e.is_numerical() => exit::NUMERICAL,
        Error::InvalidGrid(_) | Error::InvalidBandwidth { .. } | Error::InvalidConfig(_) => exit::USAGE,
        _ => exit::DATA,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DatasetOptions {
    /// `None` detects a header from a non-numeric first row.
    pub header: Option<bool>,
}

/// Reads `p` design columns followed by one response column and maps the
/// design onto `[0,1]^p` by each column's range.
pub fn parse_dataset(path: &Path, options: DatasetOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    let skip = match options.header {
        Some(h) => usize::from(h),
        None => usize::from(
            records
                .first()
                .is_some_and(|r| r.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err())),
        ),
    };
    let rows = &records[skip.min(records.len())..];
    if rows.len() < MIN_ROWS {
        return Err(Error::Data(format!(
            "{} data rows, at least {MIN_ROWS} are required",
            rows.len()
        )));
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::Data(
            "need at least one design column and a response column".into(),
        ));
    }
    let n = rows.len();
    let p = width - 1;
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (i, rec) in rows.iter().enumerate() {
        let line = i + skip + 1;
        if rec.len() != width {
            return Err(Error::DataCell {
                row: line,
                column: rec.len().min(width) + 1,
                reason: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            let reason = if cell.is_empty() {
                Some("empty cell".to_string())
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        if col < p {
                            x[(i, col)] = v;
                        } else {
                            y.push(v);
                        }
                        None
                    }
                    Ok(_) => Some(format!("'{cell}' is not finite")),
                    Err(_) => Some(format!("'{cell}' is not a number")),
                }
            };
            if let Some(reason) = reason {
                return Err(Error::DataCell {
                    row: line,
                    column: col + 1,
                    reason,
                });
            }
        }
    }
    Dataset::new(x, y)
}

#[derive(Debug, Parser)]
#[command(
    name = "smoothspec",
    version,
    about = "Data-driven smooth specification tests for parametric regressions",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a parametric null model on a dataset.
    Test(TestArgs),
    /// Run a Monte Carlo rejection-rate experiment.
    Simulate(SimulateArgs),
    /// Export one weight matrix as dense CSV.
    Weights(WeightsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file: design columns, then the response.
    #[arg(long)]
    pub data: PathBuf,
    /// Treat the first row as a header (auto-detected otherwise).
    #[arg(long)]
    pub header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let header = if self.header { Some(true) } else { None };
        parse_dataset(&self.data, DatasetOptions { header })
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Null model: zero, linear, affine-p, sum-of-linears.
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// poly | piecewise:<q> | kernel:<kind> | additive
    #[arg(long, default_value = "piecewise:0")]
    pub family: String,
    #[arg(long, default_value_t = 0.25)]
    pub h0: f64,
    /// Grid ratio a.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Number of refinements J_n.
    #[arg(long = "Jn", default_value_t = 5)]
    pub jn: usize,
    /// Penalty multiplier c.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// asymptotic | bootstrap:<B>
    #[arg(long, default_value = "bootstrap:199")]
    pub mode: String,
    /// rice | local:<b> | known:<variance>; rice for scalar designs, local otherwise.
    #[arg(long)]
    pub variance: Option<String>,
    /// two-point | rademacher | gaussian
    #[arg(long, default_value = "two-point")]
    pub multiplier: String,
    /// adaptive | max | self-normalized | fixed-h<j>
    #[arg(long, default_value = "adaptive")]
    pub test: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-bandwidth table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// table1 .. table5
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Experiment file (`key = value`, `[scenario.NAME]` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 5000 null / 1000 alternative replications instead of 1000 / 500.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Bootstrap draws per replication.
    #[arg(long)]
    pub draws: Option<usize>,
    /// CSV destination; a text rendering is written next to it with a .txt extension.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "piecewise:0")]
    pub family: String,
    /// Bandwidth on the [0,1] design scale.
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_mode(mode: &str, multiplier: MultiplierLaw, seed: u64) -> Result<CriticalMode> {
    match mode.split_once(':') {
        None if mode == "asymptotic" => Ok(CriticalMode::Asymptotic),
        None if mode == "bootstrap" => Ok(CriticalMode::Bootstrap(BootstrapConfig {
            draws: 199,
            multiplier,
            seed,
        })),
        Some(("bootstrap", b)) => {
            let draws = b
                .parse::<usize>()
                .ok()
                .filter(|&b| b > 0)
                .ok_or_else(|| Error::InvalidConfig(format!("bad bootstrap size '{b}'")))?;
            Ok(CriticalMode::Bootstrap(BootstrapConfig {
                draws,
                multiplier,
                seed,
            }))
        }
        _ => Err(Error::InvalidConfig(format!("unknown mode '{mode}'"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_test_command(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let family: SmootherFamily = args.family.parse()?;
    let grid = if family.needs_bin_grid() {
        SmootherGrid::for_bins(args.h0, args.a, args.jn)?
    } else {
        SmootherGrid::new(args.h0, args.a, args.jn)?
    };
    let multiplier: MultiplierLaw = args.multiplier.parse()?;
    let mode = parse_mode(&args.mode, multiplier, args.seed)?;
    let data = args.data.load()?;
    let variance = match &args.variance {
        Some(v) => v.parse()?,
        None if data.p() == 1 => VarianceMethod::Rice,
        None => VarianceMethod::Local {
            bandwidth: DEFAULT_LOCAL_BANDWIDTH,
        },
    };
    let model = ParametricModel::by_name(&args.model, data.p())?;
    let variant: TestVariant = match args.test.as_str() {
        "adaptive" => TestVariant::Adaptive { c: args.c },
        "self-normalized" => TestVariant::SelfNormalized { c: args.c },
        other => other.parse()?,
    };
    let cfg = TestConfig {
        grid: grid.clone(),
        family,
        c: args.c,
        alpha: args.alpha,
        variance,
        mode,
        fit: FitOptions {
            seed: args.seed,
            ..FitOptions::default()
        },
    };
    if variant.penalty_multiplier().is_some() {
        cfg.gamma()?;
    }
    let outcome = engine::run_variant(&data, &model, &cfg, &grid, variant)?;

    writeln!(out, "{}", outcome.verdict())?;
    let rescaled: Vec<String> = data
        .maps()
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_identity())
        .map(|(l, m)| format!("x{} from [{}, {}]", l + 1, m.lower, m.upper))
        .collect();
    if !rescaled.is_empty() {
        log::info!("design rescaled to [0,1]: {}", rescaled.join(", "));
    }
    match &args.output {
        Some(path) => outcome.write_table(create(path)?)?,
        None => outcome.write_table(&mut *out)?,
    }
    Ok(())
}

fn run_simulate_command(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let scale = if args.full_scale { Scale::FULL } else { Scale::DESK };
    let mut cfg = match (&args.preset, &args.config) {
        (Some(p), None) => harness::preset(p.parse::<Preset>()?, scale, args.seed.unwrap_or(0)),
        (None, Some(path)) => harness::parse_config(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(Error::InvalidConfig(
                "simulate needs exactly one of --preset or --config".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = Some(jobs);
    }
    if let Some(draws) = args.draws {
        cfg.draws = draws;
    }
    let report = harness::run_experiment(&cfg)?;
    if report.total_failures() > 0 {
        log::warn!("{} replicates failed and were excluded", report.total_failures());
    }
    if report.selection_violations + report.monotonicity_violations > 0 {
        log::warn!(
            "selection invariants violated in {} / {} replicates",
            report.selection_violations + report.monotonicity_violations,
            report.checked
        );
    }
    let text = report.table.render_text();
    match &args.output {
        Some(path) => {
            harness::emit_table(&report.table, create(path)?)?;
            std::fs::write(path.with_extension("txt"), &text)?;
            out.write_all(text.as_bytes())?;
        }
        None => {
            harness::emit_table(&report.table, &mut *out)?;
            eprint!("{text}");
        }
    }
    Ok(())
}

fn run_weights_command(args: &WeightsArgs, out: &mut dyn Write) -> Result<()> {
    let family: SmootherFamily = args.family.parse()?;
    let data = args.data.load()?;
    let w = family.build(data.unit_x(), args.h)?;
    match &args.output {
        Some(path) => w.write_csv(create(path)?),
        None => w.write_csv(out),
    }
}

/// Executes a parsed command line, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Test(a) => run_test_command(a, out),
        Command::Simulate(a) => run_simulate_command(a, out),
        Command::Weights(a) => run_weights_command(a, out),
    }
}
