//! Smooth conditional moments bootstrap: `Y* = mu(X, theta_hat) + sigma_hat(X) omega`
//! with the whole test pipeline re-run on every draw.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::{Analysis, Pipeline, TestVariant};
use crate::error::{Error, Result};
use crate::model::ParametricModel;
use crate::variance::SigmaEstimate;

/// Centered, unit-variance multiplier distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierLaw {
    /// `(1 - sqrt5)/2` w.p. `(5 + sqrt5)/10`, `(1 + sqrt5)/2` otherwise.
    #[default]
    TwoPointGolden,
    Rademacher,
    Gaussian,
}

impl MultiplierLaw {
    /// Support points and the probability of the first one, for the two-point laws.
    pub fn two_point(&self) -> Option<(f64, f64, f64)> {
        let r5 = 5f64.sqrt();
        match self {
            MultiplierLaw::TwoPointGolden => Some(((1.0 - r5) / 2.0, (1.0 + r5) / 2.0, (5.0 + r5) / 10.0)),
            MultiplierLaw::Rademacher => Some((-1.0, 1.0, 0.5)),
            MultiplierLaw::Gaussian => None,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.two_point() {
            Some((lo, hi, p_lo)) => {
                if rng.random::<f64>() < p_lo {
                    lo
                } else {
                    hi
                }
            }
            None => rng.sample(StandardNormal),
        }
    }
}

impl fmt::Display for MultiplierLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultiplierLaw::TwoPointGolden => "two-point",
            MultiplierLaw::Rademacher => "rademacher",
            MultiplierLaw::Gaussian => "gaussian",
        })
    }
}

impl FromStr for MultiplierLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "two-point" | "two-point-golden" | "golden" => Ok(MultiplierLaw::TwoPointGolden),
            "rademacher" => Ok(MultiplierLaw::Rademacher),
            "gaussian" | "normal" => Ok(MultiplierLaw::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown multiplier law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub draws: usize,
    pub multiplier: MultiplierLaw,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self {
            draws,
            multiplier: MultiplierLaw::default(),
            seed,
        }
    }
}

/// i.i.d. multipliers for draw `stream`; the same `(seed, stream)` always gives the same vector.
pub fn draw_multipliers(n: usize, cfg: &BootstrapConfig, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    (0..n).map(|_| cfg.multiplier.sample(&mut rng)).collect()
}

/// `Y*_i = mu(X_i; theta_hat) + sigma_hat(X_i) omega_i`.
pub fn bootstrap_sample(
    theta_hat: &[f64],
    sigma: &SigmaEstimate,
    model: &ParametricModel,
    x: &DMatrix<f64>,
    omega: &[f64],
) -> Vec<f64> {
    model
        .fitted(x, theta_hat)
        .into_iter()
        .enumerate()
        .map(|(i, m)| m + sigma.std_dev(i) * omega[i])
        .collect()
}

/// Bootstrap statistics for several variants from the same draws, `[variant][draw]`.
pub fn bootstrap_statistics(
    pipeline: &Pipeline<'_>,
    outer: &Analysis,
    variants: &[TestVariant],
    cfg: &BootstrapConfig,
) -> Result<Vec<Vec<f64>>> {
    if cfg.draws == 0 {
        return Err(Error::InvalidConfig("the bootstrap needs at least one draw".into()));
    }
    let data = pipeline.data();
    let n = data.n();
    let fitted = pipeline.model().fitted(data.x(), &outer.fit.theta_hat);
    let scale: Vec<f64> = (0..n).map(|i| outer.sigma.std_dev(i)).collect();
    let refinements = pipeline.refinements();

    let per_draw: Vec<Vec<f64>> = (0..cfg.draws)
        .into_par_iter()
        .map(|b| {
            let omega = draw_multipliers(n, cfg, b as u64);
            let y_star: Vec<f64> = (0..n).map(|i| fitted[i] + scale[i] * omega[i]).collect();
            let run = || -> Result<Vec<f64>> {
                let analysis = pipeline.analyse(&y_star)?;
                variants
                    .iter()
                    .map(|v| v.evaluate(&analysis.panel, refinements).map(|e| e.statistic))
                    .collect()
            };
            run().map_err(|e| Error::Bootstrap {
                replicate: b,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    Ok((0..variants.len())
        .map(|v| per_draw.iter().map(|d| d[v]).collect())
        .collect())
}

/// Order statistic of rank `ceil((B+1)(1-alpha))`, clipped to `B`; `-inf` when the rank is 0.
pub fn critical_value(stats: &[f64], alpha: f64) -> f64 {
    let b = stats.len();
    assert!(b > 0, "no bootstrap statistics");
    let rank = ((b + 1) as f64 * (1.0 - alpha) - 1e-9).ceil().max(0.0) as usize;
    if rank == 0 {
        return f64::NEG_INFINITY;
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[rank.min(b) - 1]
}

/// Rank used by [`critical_value`] before clipping.
pub fn critical_rank(draws: usize, alpha: f64) -> usize {
    ((draws + 1) as f64 * (1.0 - alpha) - 1e-9).ceil().max(0.0) as usize
}

/// Full bootstrap critical value for one test variant.
pub fn bootstrap_critical_value(
    pipeline: &Pipeline<'_>,
    variant: TestVariant,
    alpha: f64,
    cfg: &BootstrapConfig,
) -> Result<f64> {
    if (cfg.draws as f64) < 1.0 / alpha - 1.0 {
        warn!(
            "{} bootstrap draws are too few for level {alpha}; the critical value is the sample maximum",
            cfg.draws
        );
    }
    let outer = pipeline.analyse(pipeline.data().y())?;
    let stats = bootstrap_statistics(pipeline, &outer, &[variant], cfg)?;
    Ok(critical_value(&stats[0], alpha))
}
