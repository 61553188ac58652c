//! Lack-of-fit statistics, penalized bandwidth selection and the test decisions.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::bootstrap::{self, BootstrapConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, FitOptions, FitResult, ParametricModel};
use crate::quadform::PairForm;
use crate::smoother::{SmootherFamily, SmootherGrid, WeightMatrix};
use crate::variance::{SigmaEstimate, VarianceMethod};

/// `T_h = U' W_h U`.
pub fn statistic_th(w: &WeightMatrix, u: &[f64]) -> f64 {
    assert_eq!(w.n(), u.len(), "weight matrix and residual sizes differ");
    w.quad_form(u)
}

/// `gamma_n = c sqrt(2 ln J_n)`; needs `J_n >= 2`.
pub fn penalty(c: f64, refinements: usize) -> Result<f64> {
    if refinements < 2 {
        return Err(Error::InvalidConfig(format!(
            "the penalty needs at least two refinements, got Jn = {refinements}"
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidConfig(format!("penalty multiplier c = {c} must be positive")));
    }
    Ok(c * (2.0 * (refinements as f64).ln()).sqrt())
}

/// Index maximizing `T_h - gamma v_{h,h0}`; ties go to the coarser bandwidth.
pub fn select_h(stats: &[f64], penalties: &[f64], gamma: f64) -> Result<usize> {
    if stats.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if stats.len() != penalties.len() {
        return Err(Error::DimensionMismatch {
            expected: stats.len(),
            found: penalties.len(),
        });
    }
    if penalties[0] != 0.0 {
        return Err(Error::InvalidConfig(
            "the penalty at h0 must be exactly zero".into(),
        ));
    }
    let mut best = 0;
    let mut best_obj = stats[0];
    for k in 1..stats.len() {
        let obj = stats[k] - gamma * penalties[k];
        if obj > best_obj {
            best = k;
            best_obj = obj;
        }
    }
    Ok(best)
}

/// Standard normal `1 - alpha` quantile; `-inf` once `alpha >= 1`.
pub fn normal_critical_value(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return f64::NEG_INFINITY;
    }
    Normal::standard().inverse_cdf(1.0 - alpha)
}

/// Weight matrices for every grid value, plus their compiled quadratic forms.
#[derive(Debug, Clone)]
pub struct SmootherSet {
    grid: SmootherGrid,
    matrices: Vec<WeightMatrix>,
    forms: Vec<PairForm>,
    diff_forms: Vec<PairForm>,
}

impl SmootherSet {
    pub fn build(family: SmootherFamily, grid: &SmootherGrid, unit_x: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let matrices = grid
            .values()
            .iter()
            .map(|&h| family.build(unit_x, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_matrices(grid.clone(), matrices))
    }

    pub fn from_matrices(grid: SmootherGrid, matrices: Vec<WeightMatrix>) -> Self {
        let forms = matrices.iter().map(PairForm::from_matrix).collect();
        let diff_forms = matrices
            .iter()
            .enumerate()
            .map(|(k, w)| {
                if k == 0 {
                    PairForm::default()
                } else {
                    PairForm::difference(w, &matrices[0])
                }
            })
            .collect();
        Self {
            grid,
            matrices,
            forms,
            diff_forms,
        }
    }

    pub fn grid(&self) -> &SmootherGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[WeightMatrix] {
        &self.matrices
    }

    /// All per-bandwidth statistics for one residual vector.
    pub fn panel(&self, residuals: &[f64], sigma: &SigmaEstimate) -> Panel {
        let s = &sigma.per_point;
        let constant = s
            .first()
            .copied()
            .filter(|&c| s.iter().all(|&v| v == c));
        let t = self.forms.iter().map(|f| f.quad(residuals)).collect();
        let v_single = self
            .forms
            .iter()
            .map(|f| (2.0 * f.sq_weighted(s, constant)).sqrt())
            .collect();
        let v_diff = self
            .diff_forms
            .iter()
            .map(|f| (2.0 * f.sq_weighted(s, constant)).sqrt())
            .collect();
        Panel {
            t,
            v_single,
            v_diff,
        }
    }
}

/// `T_h`, `v_h` and `v_{h,h0}` along the grid; index 0 is `h0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub t: Vec<f64>,
    pub v_single: Vec<f64>,
    pub v_diff: Vec<f64>,
}

impl Panel {
    /// `v_{h0}`.
    pub fn v_baseline(&self) -> f64 {
        self.v_single[0]
    }
}

/// Which statistic is reported and calibrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestVariant {
    /// Penalized selection, standardized by `v_{h0}`.
    Adaptive { c: f64 },
    /// `max_h T_h / v_h`.
    Max,
    /// `T_h / v_h` at one grid index.
    Fixed { index: usize },
    /// Penalized selection, standardized by `v_{h~}`.
    SelfNormalized { c: f64 },
}

impl TestVariant {
    pub fn penalty_multiplier(&self) -> Option<f64> {
        match *self {
            TestVariant::Adaptive { c } | TestVariant::SelfNormalized { c } => Some(c),
            _ => None,
        }
    }

    /// Short name without the multiplier.
    pub fn kind(&self) -> String {
        match self {
            TestVariant::Adaptive { .. } => "adaptive".into(),
            TestVariant::Max => "max".into(),
            TestVariant::Fixed { index } => format!("fixed-h{index}"),
            TestVariant::SelfNormalized { .. } => "self-normalized".into(),
        }
    }

    /// Whether the standard normal is a valid asymptotic calibration.
    pub fn has_normal_limit(&self) -> bool {
        !matches!(self, TestVariant::Max)
    }

    pub fn evaluate(&self, panel: &Panel, refinements: usize) -> Result<Evaluation> {
        let ratio = |num: f64, den: f64, what: &str| -> Result<f64> {
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::Degenerate(format!("{what} standardization is zero")))
            }
        };
        match *self {
            TestVariant::Adaptive { c } => {
                let gamma = penalty(c, refinements)?;
                let selected = select_h(&panel.t, &panel.v_diff, gamma)?;
                Ok(Evaluation {
                    statistic: ratio(panel.t[selected], panel.v_baseline(), "baseline")?,
                    selected,
                })
            }
            TestVariant::SelfNormalized { c } => {
                let gamma = penalty(c, refinements)?;
                let selected = select_h(&panel.t, &panel.v_diff, gamma)?;
                Ok(Evaluation {
                    statistic: ratio(panel.t[selected], panel.v_single[selected], "selected")?,
                    selected,
                })
            }
            TestVariant::Max => {
                let mut best: Option<Evaluation> = None;
                for (k, (&t, &v)) in panel.t.iter().zip(&panel.v_single).enumerate() {
                    if v > 0.0 {
                        let s = t / v;
                        if best.as_ref().is_none_or(|b| s > b.statistic) {
                            best = Some(Evaluation {
                                statistic: s,
                                selected: k,
                            });
                        }
                    }
                }
                best.ok_or_else(|| Error::Degenerate("every standardization is zero".into()))
            }
            TestVariant::Fixed { index } => {
                if index >= panel.t.len() {
                    return Err(Error::InvalidConfig(format!(
                        "fixed bandwidth index {index} is outside the grid"
                    )));
                }
                Ok(Evaluation {
                    statistic: ratio(panel.t[index], panel.v_single[index], "fixed-bandwidth")?,
                    selected: index,
                })
            }
        }
    }
}

impl fmt::Display for TestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.penalty_multiplier() {
            Some(c) => write!(f, "{}:{c}", self.kind()),
            None => f.write_str(&self.kind()),
        }
    }
}

impl FromStr for TestVariant {
    type Err = Error;

    /// `adaptive:<c>`, `self-normalized:<c>`, `max`, `fixed-h<j>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("unknown test variant '{s}'"));
        let mult = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0 && c.is_finite())
                .ok_or_else(bad)
        };
        if s == "max" {
            return Ok(TestVariant::Max);
        }
        if let Some(j) = s.strip_prefix("fixed-h") {
            return Ok(TestVariant::Fixed {
                index: j.parse().map_err(|_| bad())?,
            });
        }
        match s.split_once(':') {
            Some(("adaptive", c)) => Ok(TestVariant::Adaptive { c: mult(c)? }),
            Some(("self-normalized", c)) => Ok(TestVariant::SelfNormalized { c: mult(c)? }),
            None if s == "adaptive" => Ok(TestVariant::Adaptive { c: 1.0 }),
            None if s == "self-normalized" => Ok(TestVariant::SelfNormalized { c: 1.0 }),
            _ => Err(bad()),
        }
    }
}

/// Statistic value and the grid index it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub statistic: f64,
    pub selected: usize,
}

/// How the critical value is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalMode {
    Asymptotic,
    Bootstrap(BootstrapConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub grid: SmootherGrid,
    pub family: SmootherFamily,
    /// Penalty multiplier `c` in `gamma_n = c sqrt(2 ln J_n)`.
    pub c: f64,
    pub alpha: f64,
    pub variance: VarianceMethod,
    pub mode: CriticalMode,
    pub fit: FitOptions,
}

impl TestConfig {
    /// Regressogram on `{2^-2, ..., 2^-7}`, `c = 1`, 5% level, 199 bootstrap draws.
    pub fn reference(seed: u64) -> Self {
        Self {
            grid: SmootherGrid::for_bins(0.25, 2.0, 5).expect("valid grid"),
            family: SmootherFamily::regressogram(),
            c: 1.0,
            alpha: 0.05,
            variance: VarianceMethod::Rice,
            mode: CriticalMode::Bootstrap(BootstrapConfig::new(199, seed)),
            fit: FitOptions::default(),
        }
    }

    pub fn gamma(&self) -> Result<f64> {
        penalty(self.c, self.grid.refinements())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if self.family.needs_bin_grid() {
            SmootherGrid::for_bins(self.grid.h0(), self.grid.ratio(), self.grid.refinements().max(1))?;
        }
        Ok(())
    }
}

/// Fit, variance estimate and panel for one response vector.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub fit: FitResult,
    pub sigma: SigmaEstimate,
    pub panel: Panel,
}

/// Everything that depends only on the design: the model, the smoothers and
/// the estimation settings. Reused across bootstrap draws.
pub struct Pipeline<'a> {
    data: &'a Dataset,
    model: &'a ParametricModel,
    smoothers: SmootherSet,
    variance: VarianceMethod,
    fit: FitOptions,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        data: &'a Dataset,
        model: &'a ParametricModel,
        family: SmootherFamily,
        grid: &SmootherGrid,
        variance: VarianceMethod,
        fit: FitOptions,
    ) -> Result<Self> {
        let smoothers = SmootherSet::build(family, grid, data.unit_x())?;
        Ok(Self::with_smoothers(data, model, smoothers, variance, fit))
    }

    pub fn with_smoothers(
        data: &'a Dataset,
        model: &'a ParametricModel,
        smoothers: SmootherSet,
        variance: VarianceMethod,
        fit: FitOptions,
    ) -> Self {
        Self {
            data,
            model,
            smoothers,
            variance,
            fit,
        }
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn model(&self) -> &ParametricModel {
        self.model
    }

    pub fn smoothers(&self) -> &SmootherSet {
        &self.smoothers
    }

    pub fn refinements(&self) -> usize {
        self.smoothers.grid().refinements()
    }

    pub fn analyse(&self, y: &[f64]) -> Result<Analysis> {
        let fit = model::fit(self.model, self.data.x(), y, &self.fit)?;
        let sigma = self.variance.estimate(self.data.unit_x(), y)?;
        let panel = self.smoothers.panel(&fit.residuals, &sigma);
        Ok(Analysis { fit, sigma, panel })
    }
}

/// One row of the per-bandwidth report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub h: f64,
    pub t: f64,
    pub v_diff: f64,
    pub v_single: f64,
    /// `T_h - gamma v_{h,h0}` (just `T_h` without a penalty).
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub variant: TestVariant,
    pub per_h: Vec<GridRow>,
    pub selected_index: usize,
    pub h_selected: f64,
    pub statistic: f64,
    pub v_baseline: f64,
    pub gamma: Option<f64>,
    pub threshold: f64,
    pub alpha: f64,
    pub reject: bool,
    pub theta_hat: Vec<f64>,
}

impl TestOutcome {
    /// Per-bandwidth table as CSV: `h,T_h,v_h_h0,v_h,objective`.
    pub fn write_table<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["h", "T_h", "v_h_h0", "v_h", "objective"])?;
        for r in &self.per_h {
            wtr.write_record([
                r.h.to_string(),
                r.t.to_string(),
                r.v_diff.to_string(),
                r.v_single.to_string(),
                r.objective.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn verdict(&self) -> String {
        format!(
            "{}: statistic = {:.6}, critical value = {:.6}, selected h = {}, {} at level {}",
            self.variant,
            self.statistic,
            self.threshold,
            self.h_selected,
            if self.reject { "REJECT H0" } else { "do not reject H0" },
            self.alpha
        )
    }
}

fn outcome(
    pipeline: &Pipeline<'_>,
    analysis: &Analysis,
    variant: TestVariant,
    threshold: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    let eval = variant.evaluate(&analysis.panel, pipeline.refinements())?;
    let gamma = match variant.penalty_multiplier() {
        Some(c) => Some(penalty(c, pipeline.refinements())?),
        None => None,
    };
    let grid = pipeline.smoothers().grid().values();
    let p = &analysis.panel;
    let per_h = (0..grid.len())
        .map(|k| GridRow {
            h: grid[k],
            t: p.t[k],
            v_diff: p.v_diff[k],
            v_single: p.v_single[k],
            objective: p.t[k] - gamma.unwrap_or(0.0) * p.v_diff[k],
        })
        .collect();
    Ok(TestOutcome {
        variant,
        per_h,
        selected_index: eval.selected,
        h_selected: grid[eval.selected],
        statistic: eval.statistic,
        v_baseline: p.v_baseline(),
        gamma,
        threshold,
        alpha,
        reject: eval.statistic >= threshold,
        theta_hat: analysis.fit.theta_hat.clone(),
    })
}

/// Runs `variant` on the data with a grid of the caller's choosing.
pub fn run_variant(
    data: &Dataset,
    model: &ParametricModel,
    cfg: &TestConfig,
    grid: &SmootherGrid,
    variant: TestVariant,
) -> Result<TestOutcome> {
    cfg.validate()?;
    let pipeline = Pipeline::new(data, model, cfg.family, grid, cfg.variance, cfg.fit)?;
    let analysis = pipeline.analyse(data.y())?;
    let threshold = match cfg.mode {
        CriticalMode::Asymptotic => {
            if !variant.has_normal_limit() {
                return Err(Error::InvalidConfig(format!(
                    "the {variant} test has no standard normal limit; use bootstrap mode"
                )));
            }
            normal_critical_value(cfg.alpha)
        }
        CriticalMode::Bootstrap(boot) => {
            let stats = bootstrap::bootstrap_statistics(&pipeline, &analysis, &[variant], &boot)?;
            bootstrap::critical_value(&stats[0], cfg.alpha)
        }
    };
    outcome(&pipeline, &analysis, variant, threshold, cfg.alpha)
}

/// The data-driven test: penalized selection of `h~`, statistic `T_{h~} / v_{h0}`.
pub fn run_test(data: &Dataset, model: &ParametricModel, cfg: &TestConfig) -> Result<TestOutcome> {
    cfg.gamma()?;
    run_variant(data, model, cfg, &cfg.grid, TestVariant::Adaptive { c: cfg.c })
}

/// `max_h T_h / v_h`, calibrated by the bootstrap.
pub fn run_max_test(data: &Dataset, model: &ParametricModel, cfg: &TestConfig) -> Result<TestOutcome> {
    run_variant(data, model, cfg, &cfg.grid, TestVariant::Max)
}

/// `T_h / v_h` at a single bandwidth.
pub fn run_fixed_h_test(
    data: &Dataset,
    model: &ParametricModel,
    cfg: &TestConfig,
    h: f64,
) -> Result<TestOutcome> {
    let grid = SmootherGrid::single(h)?;
    run_variant(data, model, cfg, &grid, TestVariant::Fixed { index: 0 })
}

/// Same selection as [`run_test`], standardized by `v_{h~}` instead of `v_{h0}`.
pub fn run_selected_self_normalized(
    data: &Dataset,
    model: &ParametricModel,
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.gamma()?;
    run_variant(data, model, cfg, &cfg.grid, TestVariant::SelfNormalized { c: cfg.c })
}

/// Grid indices `h != h0` whose standardized excess over `T_{h0}` exceeds `gamma`.
pub fn beating_set(panel: &Panel, gamma: f64) -> Vec<usize> {
    (1..panel.t.len())
        .filter(|&k| panel.v_diff[k] > 0.0 && (panel.t[k] - panel.t[0]) / panel.v_diff[k] > gamma)
        .collect()
}

/// Outcome of the deterministic checks implied by the argmax definition of `h~`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionCheck {
    /// `T_{h~} >= T_{h0} + gamma v_{h~,h0} >= T_{h0}`.
    pub power_bound: bool,
    /// `h~ != h0` exactly when some `h` beats `h0` in standardized terms.
    pub characterization: bool,
}

impl SelectionCheck {
    pub fn holds(&self) -> bool {
        self.power_bound && self.characterization
    }
}

pub fn check_selection(panel: &Panel, gamma: f64) -> Result<SelectionCheck> {
    let sel = select_h(&panel.t, &panel.v_diff, gamma)?;
    let scale = panel.t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let slack = 1e-12 * (scale + gamma * panel.v_diff.iter().fold(0.0f64, |m, v| m.max(*v)));
    let t0 = panel.t[0];
    let bound = t0 + gamma * panel.v_diff[sel];
    let power_bound = panel.t[sel] >= bound - slack && bound >= t0;

    let beats = beating_set(panel, gamma);
    let near_edge = (1..panel.t.len()).any(|k| {
        panel.v_diff[k] > 0.0 && ((panel.t[k] - t0) - gamma * panel.v_diff[k]).abs() <= slack
    });
    let characterization = (sel != 0) == !beats.is_empty() || near_edge;
    Ok(SelectionCheck {
        power_bound,
        characterization,
    })
}
