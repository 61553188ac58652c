//! Seeded Monte Carlo experiments: data generation, bootstrap-calibrated
//! replications and rejection tables.

mod config;
mod dgp;
mod table;

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

pub use config::{parse_config, preset, reference_grid, Preset, Scale};
pub use dgp::{alternative_amplitude, generate_dgp, DgpSpec, ErrorFamily};
pub use table::{RejectionTable, TableCell};

use crate::bootstrap::{bootstrap_statistics, critical_value, BootstrapConfig, MultiplierLaw};
use crate::data::Dataset;
use crate::engine::{beating_set, check_selection, penalty, Pipeline, TestVariant};
use crate::error::{Error, Result};
use crate::model::{FitOptions, ParametricModel};
use crate::smoother::{SmootherFamily, SmootherGrid};
use crate::variance::VarianceMethod;

/// One row block of a table: a data-generating process and how it is analysed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dgp: DgpSpec,
    /// Registry name of the null model.
    pub model: String,
    /// Variance estimator; bandwidths are on the `[0,1]` design scale.
    pub variance: VarianceMethod,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<Scenario>,
    pub variants: Vec<TestVariant>,
    pub family: SmootherFamily,
    pub grid: SmootherGrid,
    pub levels: Vec<f64>,
    pub draws: usize,
    pub multiplier: MultiplierLaw,
    pub seed: u64,
    pub fit: FitOptions,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

/// Table plus the bookkeeping needed to trust it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub table: RejectionTable,
    /// Replicates whose pipeline failed, per scenario.
    pub failures: Vec<usize>,
    /// Replicates checked for the selection invariants.
    pub checked: usize,
    pub selection_violations: usize,
    pub monotonicity_violations: usize,
}

impl ExperimentReport {
    pub fn total_failures(&self) -> usize {
        self.failures.iter().sum()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(parent, index)`; used for scenario, replicate and bootstrap streams.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix(splitmix(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

struct ReplicateResult {
    /// `[variant][level]`.
    rejections: Vec<Vec<bool>>,
    selection_ok: bool,
    monotone_ok: bool,
}

fn run_replicate(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64, rep: usize) -> Result<ReplicateResult> {
    let (x, y) = generate_dgp(&scenario.dgp, seed, rep as u64);
    let data = Dataset::with_support(DMatrix::from_column_slice(x.len(), 1, &x), y, -1.0, 1.0)?;
    let model = ParametricModel::by_name(&scenario.model, 1)?;
    let pipeline = Pipeline::new(&data, &model, cfg.family, &cfg.grid, scenario.variance, cfg.fit)?;
    let outer = pipeline.analyse(data.y())?;
    let refinements = cfg.grid.refinements();

    let observed = cfg
        .variants
        .iter()
        .map(|v| v.evaluate(&outer.panel, refinements).map(|e| e.statistic))
        .collect::<Result<Vec<_>>>()?;

    let mut selection_ok = true;
    let mut multipliers: Vec<f64> = cfg.variants.iter().filter_map(|v| v.penalty_multiplier()).collect();
    multipliers.sort_by(f64::total_cmp);
    multipliers.dedup();
    for &c in &multipliers {
        selection_ok &= check_selection(&outer.panel, penalty(c, refinements)?)?.holds();
    }
    let sets = multipliers
        .iter()
        .map(|&c| Ok(beating_set(&outer.panel, penalty(c, refinements)?)))
        .collect::<Result<Vec<_>>>()?;
    let monotone_ok = sets.windows(2).all(|w| w[1].iter().all(|k| w[0].contains(k)));

    let boot = BootstrapConfig {
        draws: cfg.draws,
        multiplier: cfg.multiplier,
        seed: derive_seed(seed, rep as u64 ^ 0xB007_0000_0000_0000),
    };
    let stats = bootstrap_statistics(&pipeline, &outer, &cfg.variants, &boot)?;
    let rejections = observed
        .iter()
        .zip(&stats)
        .map(|(&obs, boot_stats)| {
            cfg.levels
                .iter()
                .map(|&alpha| obs >= critical_value(boot_stats, alpha))
                .collect()
        })
        .collect();
    Ok(ReplicateResult {
        rejections,
        selection_ok,
        monotone_ok,
    })
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.variants.is_empty() {
        return Err(Error::InvalidConfig("no test variants requested".into()));
    }
    if cfg.levels.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidConfig("levels must lie in (0, 1]".into()));
    }
    if cfg.draws == 0 {
        return Err(Error::InvalidConfig("the bootstrap needs at least one draw".into()));
    }
    for s in &cfg.scenarios {
        if s.replications == 0 {
            return Err(Error::InvalidConfig(format!(
                "scenario '{}' has no replications",
                s.name
            )));
        }
    }
    for v in &cfg.variants {
        if let Some(c) = v.penalty_multiplier() {
            penalty(c, cfg.grid.refinements())?;
        }
        if let TestVariant::Fixed { index } = v {
            if *index >= cfg.grid.len() {
                return Err(Error::InvalidConfig(format!(
                    "fixed bandwidth index {index} is outside the grid"
                )));
            }
        }
    }
    Ok(())
}

fn execute(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut table = RejectionTable::default();
    let mut failures = Vec::new();
    let (mut checked, mut selection_violations, mut monotonicity_violations) = (0, 0, 0);

    for (si, scenario) in cfg.scenarios.iter().enumerate() {
        info!(
            "scenario {} ({} replications, {} bootstrap draws)",
            scenario.name, scenario.replications, cfg.draws
        );
        let seed = derive_seed(cfg.seed, si as u64);
        let results: Vec<Result<ReplicateResult>> = (0..scenario.replications)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, scenario, seed, rep))
            .collect();

        let mut counts = vec![vec![0usize; cfg.levels.len()]; cfg.variants.len()];
        let mut ok = 0;
        let mut failed = 0;
        for (rep, r) in results.into_iter().enumerate() {
            match r {
                Ok(r) => {
                    ok += 1;
                    checked += 1;
                    selection_violations += usize::from(!r.selection_ok);
                    monotonicity_violations += usize::from(!r.monotone_ok);
                    for (v, levels) in r.rejections.iter().enumerate() {
                        for (l, &rej) in levels.iter().enumerate() {
                            counts[v][l] += usize::from(rej);
                        }
                    }
                }
                Err(e) => {
                    warn!("scenario {} replicate {rep} failed: {e}", scenario.name);
                    failed += 1;
                }
            }
        }
        failures.push(failed);
        for (v, variant) in cfg.variants.iter().enumerate() {
            for (l, &level) in cfg.levels.iter().enumerate() {
                table.cells.push(TableCell {
                    scenario: scenario.name.clone(),
                    test: variant.kind(),
                    c: variant.penalty_multiplier(),
                    level,
                    rejections: counts[v][l],
                    replications: ok,
                });
            }
        }
    }
    Ok(ExperimentReport {
        table,
        failures,
        checked,
        selection_violations,
        monotonicity_violations,
    })
}

/// Runs every scenario; the result depends only on the configuration, not on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    validate(cfg)?;
    match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| execute(cfg)),
        None => execute(cfg),
    }
}

/// Writes the CSV form of a table.
pub fn emit_table<W: std::io::Write>(table: &RejectionTable, out: W) -> Result<()> {
    table.write_csv(out)
}
