//! Built-in table designs and the `key = value` experiment file format.
//!
//! ```text
//! seed = 7
//! draws = 199
//! family = piecewise:0
//! h0 = 0.25
//! a = 2
//! jn = 5
//! tests = fixed-h0, fixed-h5, max, adaptive:1
//! levels = 0.02, 0.05
//!
//! [scenario.H0]
//! n = 150
//! r = 0
//! errors = gaussian
//! model = zero
//! variance = rice
//! replications = 1000
//! ```

use std::str::FromStr;

use super::dgp::{alternative_amplitude, DgpSpec, ErrorFamily};
use super::{ExperimentConfig, Scenario};
use crate::bootstrap::MultiplierLaw;
use crate::engine::TestVariant;
use crate::error::{Error, Result};
use crate::model::FitOptions;
use crate::smoother::{SmootherFamily, SmootherGrid};
use crate::variance::VarianceMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            "table3" => Ok(Preset::Table3),
            "table4" => Ok(Preset::Table4),
            "table5" => Ok(Preset::Table5),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

/// Replication counts under the null and under alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub null: usize,
    pub alternative: usize,
}

impl Scale {
    pub const DESK: Scale = Scale {
        null: 1000,
        alternative: 500,
    };
    pub const FULL: Scale = Scale {
        null: 5000,
        alternative: 1000,
    };
}

const SAMPLE_SIZE: usize = 150;

/// Local variance bandwidth of `1/8` on `[-1, 1]`, expressed on the `[0,1]` scale.
const HETERO_BANDWIDTH: f64 = 1.0 / 16.0;

/// Standard scenario rows: the null and cosine alternatives with t = 2, 5, 10.
pub fn standard_scenarios(
    errors: ErrorFamily,
    theta: (f64, f64),
    model: &str,
    variance: VarianceMethod,
    scale: Scale,
) -> Vec<Scenario> {
    let mut rows = vec![("H0".to_string(), 0.0, 0u32, scale.null)];
    for t in [2u32, 5, 10] {
        rows.push((format!("t={t}"), alternative_amplitude(), t, scale.alternative));
    }
    rows.into_iter()
        .map(|(name, amplitude, frequency, replications)| Scenario {
            name,
            dgp: DgpSpec {
                theta1: theta.0,
                theta2: theta.1,
                amplitude,
                frequency,
                errors,
                n: SAMPLE_SIZE,
            },
            model: model.to_string(),
            variance,
            replications,
        })
        .collect()
}

/// Comparator and adaptive columns; the self-normalized columns appear in the first table only.
pub fn standard_variants(with_self_normalized: bool) -> Vec<TestVariant> {
    let mut v = vec![
        TestVariant::Fixed { index: 0 },
        TestVariant::Fixed { index: 5 },
        TestVariant::Max,
    ];
    if with_self_normalized {
        v.extend([1.0, 1.5, 2.0].map(|c| TestVariant::SelfNormalized { c }));
    }
    v.extend([1.0, 1.5, 2.0].map(|c| TestVariant::Adaptive { c }));
    v
}

/// Regressogram grid `{2^-2, ..., 2^-7}`.
pub fn reference_grid() -> SmootherGrid {
    SmootherGrid::for_bins(0.25, 2.0, 5).expect("valid grid")
}

pub fn preset(which: Preset, scale: Scale, seed: u64) -> ExperimentConfig {
    let (errors, theta, model, variance) = match which {
        Preset::Table1 => (ErrorFamily::Gaussian, (0.0, 0.0), "zero", VarianceMethod::Rice),
        Preset::Table2 => (ErrorFamily::Exponential, (0.0, 0.0), "zero", VarianceMethod::Rice),
        Preset::Table3 => (ErrorFamily::Student5, (0.0, 0.0), "zero", VarianceMethod::Rice),
        Preset::Table4 => (
            ErrorFamily::Heteroscedastic,
            (0.0, 0.0),
            "zero",
            VarianceMethod::Local {
                bandwidth: HETERO_BANDWIDTH,
            },
        ),
        Preset::Table5 => (ErrorFamily::Gaussian, (1.0, 3.0), "linear", VarianceMethod::Rice),
    };
    ExperimentConfig {
        scenarios: standard_scenarios(errors, theta, model, variance, scale),
        variants: standard_variants(which == Preset::Table1),
        family: SmootherFamily::regressogram(),
        grid: reference_grid(),
        levels: vec![0.02, 0.05],
        draws: 199,
        multiplier: MultiplierLaw::TwoPointGolden,
        seed,
        fit: FitOptions::default(),
        jobs: None,
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::InvalidConfig(format!("line {line}: cannot parse '{value}' for '{key}'"))
    })
}

#[derive(Default)]
struct ScenarioDraft {
    name: String,
    n: Option<usize>,
    theta1: f64,
    theta2: f64,
    amplitude: f64,
    frequency: u32,
    errors: ErrorFamily,
    model: Option<String>,
    variance: Option<VarianceMethod>,
    replications: Option<usize>,
}

/// Parses an experiment file. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = preset(Preset::Table1, Scale::DESK, 0);
    cfg.scenarios.clear();
    let (mut h0, mut ratio, mut jn) = (0.25, 2.0, 5usize);
    let mut default_n = SAMPLE_SIZE;
    let mut default_reps = Scale::DESK.null;
    let mut drafts: Vec<ScenarioDraft> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = section.trim().strip_prefix("scenario.").ok_or_else(|| {
                Error::InvalidConfig(format!("line {line_no}: unknown section [{section}]"))
            })?;
            drafts.push(ScenarioDraft {
                name: name.to_string(),
                ..Default::default()
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {line_no}: expected 'key = value'"))
        })?;
        let (key, value) = (key.trim(), value.trim());

        if let Some(d) = drafts.last_mut() {
            match key {
                "n" => d.n = Some(parse_value(key, value, line_no)?),
                "theta1" => d.theta1 = parse_value(key, value, line_no)?,
                "theta2" => d.theta2 = parse_value(key, value, line_no)?,
                "r" | "amplitude" => {
                    d.amplitude = if value == "sqrt(2/3)" {
                        alternative_amplitude()
                    } else {
                        parse_value(key, value, line_no)?
                    }
                }
                "t" | "frequency" => d.frequency = parse_value(key, value, line_no)?,
                "errors" => d.errors = value.parse()?,
                "model" => d.model = Some(value.to_string()),
                "variance" => d.variance = Some(value.parse()?),
                "replications" => d.replications = Some(parse_value(key, value, line_no)?),
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "line {line_no}: unknown scenario key '{key}'"
                    )))
                }
            }
            continue;
        }
        match key {
            "seed" => cfg.seed = parse_value(key, value, line_no)?,
            "draws" | "B" => cfg.draws = parse_value(key, value, line_no)?,
            "multiplier" => cfg.multiplier = value.parse()?,
            "family" => cfg.family = value.parse()?,
            "h0" => h0 = parse_value(key, value, line_no)?,
            "a" => ratio = parse_value(key, value, line_no)?,
            "jn" | "Jn" => jn = parse_value(key, value, line_no)?,
            "n" => default_n = parse_value(key, value, line_no)?,
            "replications" => default_reps = parse_value(key, value, line_no)?,
            "jobs" => cfg.jobs = Some(parse_value(key, value, line_no)?),
            "restarts" => cfg.fit.restarts = parse_value(key, value, line_no)?,
            "tests" => {
                cfg.variants = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<TestVariant>>>()?
            }
            "levels" => {
                cfg.levels = value
                    .split(',')
                    .map(|v| parse_value(key, v.trim(), line_no))
                    .collect::<Result<Vec<f64>>>()?
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "line {line_no}: unknown key '{key}'"
                )))
            }
        }
    }

    cfg.grid = if cfg.family.needs_bin_grid() {
        SmootherGrid::for_bins(h0, ratio, jn)?
    } else {
        SmootherGrid::new(h0, ratio, jn)?
    };
    if drafts.is_empty() {
        return Err(Error::InvalidConfig("no [scenario.NAME] sections".into()));
    }
    cfg.scenarios = drafts
        .into_iter()
        .map(|d| Scenario {
            dgp: DgpSpec {
                theta1: d.theta1,
                theta2: d.theta2,
                amplitude: d.amplitude,
                frequency: d.frequency,
                errors: d.errors,
                n: d.n.unwrap_or(default_n),
            },
            model: d.model.unwrap_or_else(|| "zero".into()),
            variance: d.variance.unwrap_or(VarianceMethod::Rice),
            replications: d.replications.unwrap_or(default_reps),
            name: d.name,
        })
        .collect();
    Ok(cfg)
}
