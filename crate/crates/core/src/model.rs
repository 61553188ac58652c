//! Null parametric families `mu(x; theta)` and their least-squares fits.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type MeanFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type DesignFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Bound used for the parameters of the built-in linear models.
pub const DEFAULT_BOUND: f64 = 1e6;

/// A parametric regression family over a compact parameter box.
#[derive(Clone)]
pub struct ParametricModel {
    name: String,
    bounds: Vec<(f64, f64)>,
    mean: Arc<MeanFn>,
    gradient: Option<Arc<VectorFn>>,
    linear_design: Option<Arc<DesignFn>>,
}

impl fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricModel")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("gradient", &self.gradient.is_some())
            .field("linear", &self.linear_design.is_some())
            .finish()
    }
}

impl ParametricModel {
    pub fn new<F>(name: impl Into<String>, bounds: Vec<(f64, f64)>, mean: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "parameter {k} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            bounds,
            mean: Arc::new(mean),
            gradient: None,
            linear_design: None,
        })
    }

    /// Analytic gradient `d mu / d theta`, written into the output slice.
    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Marks the model as linear in theta: `mu(x; theta) = theta . design(x)`.
    pub fn with_linear_design<D>(mut self, design: D) -> Self
    where
        D: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.linear_design = Some(Arc::new(design));
        self
    }

    /// White-noise null `mu = 0`, no parameters.
    pub fn zero() -> Self {
        Self::new("zero", Vec::new(), |_, _| 0.0)
            .expect("empty box is valid")
            .with_linear_design(|_, _| {})
    }

    /// `theta_1 + theta_2 x` for scalar x.
    pub fn linear() -> Self {
        let b = (-DEFAULT_BOUND, DEFAULT_BOUND);
        Self::new("linear", vec![b, b], |x, t| t[0] + t[1] * x[0])
            .expect("finite box")
            .with_linear_design(|x, out| {
                out[0] = 1.0;
                out[1] = x[0];
            })
    }

    /// Intercept plus one slope per coordinate.
    pub fn affine(p: usize) -> Self {
        let b = (-DEFAULT_BOUND, DEFAULT_BOUND);
        Self::new("affine-p", vec![b; p + 1], |x, t| {
            t[0] + x.iter().zip(&t[1..]).map(|(a, b)| a * b).sum::<f64>()
        })
        .expect("finite box")
        .with_linear_design(|x, out| {
            out[0] = 1.0;
            out[1..].copy_from_slice(x);
        })
    }

    /// Additive null `sum_l (a_l + b_l x_l)`; intercepts collapse into one.
    pub fn sum_of_linears(p: usize) -> Self {
        let mut m = Self::affine(p);
        m.name = "sum-of-linears".into();
        m
    }

    /// Registry lookup by CLI name.
    pub fn by_name(name: &str, p: usize) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "linear" if p == 1 => Ok(Self::linear()),
            "linear" => Err(Error::InvalidConfig(format!(
                "model 'linear' needs one design column, got {p}"
            ))),
            "affine-p" | "affine" => Ok(Self::affine(p)),
            "sum-of-linears" => Ok(Self::sum_of_linears(p)),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of parameters `d`.
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn is_linear(&self) -> bool {
        self.linear_design.is_some()
    }

    pub fn eval(&self, x: &[f64], theta: &[f64]) -> f64 {
        (self.mean)(x, theta)
    }

    /// Fills `out` with the linear design row, if the model is linear.
    pub fn design_row(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.linear_design {
            Some(d) => {
                d(x, out);
                true
            }
            None => false,
        }
    }

    /// `mu(X_i; theta)` for every row of `x`.
    pub fn fitted(&self, x: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|i| {
                for (l, v) in row.iter_mut().enumerate() {
                    *v = x[(i, l)];
                }
                self.eval(&row, theta)
            })
            .collect()
    }

    fn clip(&self, theta: &mut [f64]) {
        for (t, &(lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            *t = t.clamp(lo, hi);
        }
    }

    fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(&self.bounds)
            .all(|(t, &(lo, hi))| *t >= lo && *t <= hi)
    }
}

/// Tuning of the multistart Gauss-Newton fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 200,
            tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

/// Least-squares estimate and the residuals it leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub converged: bool,
    pub restarts_used: usize,
    /// Objective after every accepted iteration of the winning start.
    pub trace: Vec<f64>,
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

fn residuals_at(
    model: &ParametricModel,
    rows: &[Vec<f64>],
    y: &[f64],
    theta: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let mut sse = 0.0;
    let mut res = Vec::with_capacity(y.len());
    for (row, &yi) in rows.iter().zip(y) {
        let m = model.eval(row, theta);
        if !m.is_finite() {
            return Err(Error::NonFiniteModel {
                theta: theta.to_vec(),
            });
        }
        let r = yi - m;
        sse += r * r;
        res.push(r);
    }
    Ok((res, sse))
}

fn no_parameter_fit(y: &[f64]) -> FitResult {
    let sse = y.iter().map(|v| v * v).sum();
    FitResult {
        theta_hat: Vec::new(),
        residuals: y.to_vec(),
        sse,
        converged: true,
        restarts_used: 0,
        trace: vec![sse],
    }
}

fn check_sizes(model: &ParametricModel, x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.len() < model.dim() {
        return Err(Error::TooFewObservations {
            n: y.len(),
            needed: model.dim(),
        });
    }
    Ok(())
}

/// Jacobian of the mean (not of the residuals), `n x d`.
fn jacobian(
    model: &ParametricModel,
    rows: &[Vec<f64>],
    theta: &[f64],
    fitted: &[f64],
) -> Result<DMatrix<f64>> {
    let d = theta.len();
    let mut jac = DMatrix::zeros(rows.len(), d);
    if let Some(g) = &model.gradient {
        let mut buf = vec![0.0; d];
        for (i, row) in rows.iter().enumerate() {
            g(row, theta, &mut buf);
            for k in 0..d {
                jac[(i, k)] = buf[k];
            }
        }
    } else {
        let step_base = f64::EPSILON.cbrt();
        let mut probe = theta.to_vec();
        for k in 0..d {
            let (lo, hi) = model.bounds[k];
            let step = step_base * (1.0 + theta[k].abs());
            let up = (theta[k] + step).min(hi);
            let down = (theta[k] - step).max(lo);
            probe[k] = up;
            let plus: Vec<f64> = rows.iter().map(|r| model.eval(r, &probe)).collect();
            probe[k] = down;
            let minus: Vec<f64> = if down < theta[k] {
                rows.iter().map(|r| model.eval(r, &probe)).collect()
            } else {
                fitted.to_vec()
            };
            probe[k] = theta[k];
            let width = up - down;
            for i in 0..rows.len() {
                jac[(i, k)] = (plus[i] - minus[i]) / width;
            }
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteModel {
            theta: theta.to_vec(),
        });
    }
    Ok(jac)
}

struct LocalFit {
    theta: Vec<f64>,
    residuals: Vec<f64>,
    sse: f64,
    converged: bool,
    trace: Vec<f64>,
}

/// Projected Levenberg-Marquardt from one starting point; only decreasing steps are accepted.
fn local_fit(
    model: &ParametricModel,
    rows: &[Vec<f64>],
    y: &[f64],
    start: Vec<f64>,
    opts: &FitOptions,
) -> Result<LocalFit> {
    let d = start.len();
    let mut theta = start;
    let (mut residuals, mut sse) = residuals_at(model, rows, y, &theta)?;
    let mut trace = vec![sse];
    let mut damping = 1e-3;
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let fitted: Vec<f64> = y.iter().zip(&residuals).map(|(a, b)| a - b).collect();
        let jac = jacobian(model, rows, &theta, &fitted)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&residuals);
        if jtr.amax() <= opts.tol * (1.0 + sse) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for k in 0..d {
                lhs[(k, k)] += damping * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&jtr)) else {
                damping *= 10.0;
                continue;
            };
            let mut candidate: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            model.clip(&mut candidate);
            let (cand_res, cand_sse) = match residuals_at(model, rows, y, &candidate) {
                Ok(v) => v,
                Err(_) => {
                    damping *= 4.0;
                    continue;
                }
            };
            if cand_sse < sse {
                let decrease = sse - cand_sse;
                let moved = candidate
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                    .fold(0.0f64, f64::max);
                theta = candidate;
                residuals = cand_res;
                sse = cand_sse;
                trace.push(sse);
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                if decrease <= opts.tol * (1.0 + sse) || moved <= opts.tol {
                    converged = true;
                }
                break;
            }
            damping *= 4.0;
            if damping > 1e16 {
                break;
            }
        }
        if !accepted {
            // No descent direction left inside the box.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LocalFit {
        theta,
        residuals,
        sse,
        converged,
        trace,
    })
}

fn better(a: &LocalFit, b: &LocalFit) -> bool {
    if a.sse != b.sse {
        return a.sse < b.sse;
    }
    a.theta
        .iter()
        .zip(&b.theta)
        .find(|(x, y)| x != y)
        .map(|(x, y)| x < y)
        .unwrap_or(false)
}

/// Multistart box-constrained nonlinear least squares.
pub fn fit_nls(
    model: &ParametricModel,
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_sizes(model, x, y)?;
    if model.dim() == 0 {
        return Ok(no_parameter_fit(y));
    }
    let rows = rows_of(x);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let restarts = opts.restarts.max(1);
    let mut best: Option<LocalFit> = None;
    for _ in 0..restarts {
        let start: Vec<f64> = model
            .bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        let fit = local_fit(model, &rows, y, start, opts)?;
        if best.as_ref().is_none_or(|b| better(&fit, b)) {
            best = Some(fit);
        }
    }
    let best = best.expect("at least one start");
    Ok(FitResult {
        theta_hat: best.theta,
        residuals: best.residuals,
        sse: best.sse,
        converged: best.converged,
        restarts_used: restarts,
        trace: best.trace,
    })
}

/// Closed-form least squares for models that are linear in theta.
pub fn fit_ols(model: &ParametricModel, x: &DMatrix<f64>, y: &[f64]) -> Result<FitResult> {
    check_sizes(model, x, y)?;
    if !model.is_linear() {
        return Err(Error::InvalidConfig(format!(
            "model '{}' is not linear in its parameters",
            model.name()
        )));
    }
    let d = model.dim();
    if d == 0 {
        return Ok(no_parameter_fit(y));
    }
    let n = y.len();
    let mut design = DMatrix::zeros(n, d);
    let mut buf = vec![0.0; d];
    let mut row = vec![0.0; x.ncols()];
    for i in 0..n {
        for (l, v) in row.iter_mut().enumerate() {
            *v = x[(i, l)];
        }
        model.design_row(&row, &mut buf);
        for k in 0..d {
            design[(i, k)] = buf[k];
        }
    }
    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * n.max(d) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < d {
        return Err(Error::RankDeficient { rank, columns: d });
    }
    let theta = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let theta: Vec<f64> = theta.iter().copied().collect();
    if !model.contains(&theta) {
        return Err(Error::OutsideParameterBox { theta });
    }
    let rows = rows_of(x);
    let (residuals, sse) = residuals_at(model, &rows, y, &theta)?;
    Ok(FitResult {
        theta_hat: theta,
        residuals,
        sse,
        converged: true,
        restarts_used: 0,
        trace: vec![sse],
    })
}

/// OLS when the model is linear and its solution lies in the box, multistart NLS otherwise.
pub fn fit(
    model: &ParametricModel,
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    if model.is_linear() {
        match fit_ols(model, x, y) {
            Err(Error::OutsideParameterBox { .. }) => {}
            other => return other,
        }
    }
    fit_nls(model, x, y, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn column(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn exp_model() -> ParametricModel {
        ParametricModel::new("exp", vec![(0.1, 5.0), (-3.0, 3.0)], |x, t| {
            t[0] * (t[1] * x[0]).exp()
        })
        .unwrap()
    }

    #[test]
    fn linear_interpolation_recovered() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| 0.7 - 1.3 * x).collect();
        let x = column(&xs);
        for fit in [
            fit_nls(&ParametricModel::linear(), &x, &y, &FitOptions::default()).unwrap(),
            fit_ols(&ParametricModel::linear(), &x, &y).unwrap(),
        ] {
            assert!((fit.theta_hat[0] - 0.7).abs() < 1e-8);
            assert!((fit.theta_hat[1] + 1.3).abs() < 1e-8);
            assert!(fit.sse <= 1e-16 * 20.0);
        }
    }

    #[test]
    fn constant_response_gives_flat_line() {
        let xs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = vec![2.5; 15];
        let fit = fit_nls(&ParametricModel::linear(), &column(&xs), &y, &FitOptions::default())
            .unwrap();
        assert!((fit.theta_hat[0] - 2.5).abs() < 1e-8);
        assert!(fit.theta_hat[1].abs() < 1e-8);
    }

    #[test]
    fn exponential_model_matches_grid_search() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let truth = [1.7, -0.8];
        let y: Vec<f64> = xs.iter().map(|x| truth[0] * (truth[1] * x).exp()).collect();
        let model = exp_model();
        let x = column(&xs);
        let fit = fit_nls(&model, &x, &y, &FitOptions::default()).unwrap();

        // Oracle: dense grid over the box, then the best cell must contain the fit.
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for a in 0..=490 {
            for b in 0..=600 {
                let t = [0.1 + a as f64 * 0.01, -3.0 + b as f64 * 0.01];
                let sse: f64 = xs
                    .iter()
                    .zip(&y)
                    .map(|(x, y)| (y - t[0] * (t[1] * x).exp()).powi(2))
                    .sum();
                if sse < best.0 {
                    best = (sse, t);
                }
            }
        }
        assert!((fit.theta_hat[0] - best.1[0]).abs() <= 0.01);
        assert!((fit.theta_hat[1] - best.1[1]).abs() <= 0.01);
        assert!(fit.sse <= best.0);
        assert!((fit.theta_hat[0] - truth[0]).abs() < 1e-6);
        assert!((fit.theta_hat[1] - truth[1]).abs() < 1e-6);
    }

    #[test]
    fn trace_is_monotone_with_analytic_gradient() {
        let model = exp_model().with_gradient(|x, t, g| {
            let e = (t[1] * x[0]).exp();
            g[0] = e;
            g[1] = t[0] * x[0] * e;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * (0.5 * x).exp() + 0.05 * { let z: f64 = StandardNormal.sample(&mut rng); z })
            .collect();
        let fit = fit_nls(&model, &column(&xs), &y, &FitOptions::default()).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.converged);
    }

    #[test]
    fn zero_model_residuals_are_response() {
        let y = vec![0.3, -1.0, 2.0];
        let x = column(&[0.0, 0.5, 1.0]);
        let fit = fit_ols(&ParametricModel::zero(), &x, &y).unwrap();
        assert_eq!(fit.residuals, y);
        assert!(fit.theta_hat.is_empty());
        assert_eq!(fit.sse, 0.09 + 1.0 + 4.0);
    }

    #[test]
    fn rank_deficient_design_reported() {
        let x = column(&[0.5; 6]);
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(matches!(
            fit_ols(&ParametricModel::linear(), &x, &y),
            Err(Error::RankDeficient { rank: 1, columns: 2 })
        ));
    }

    #[test]
    fn non_finite_model_names_theta() {
        let model =
            ParametricModel::new("log", vec![(-1.0, 1.0)], |x, t| (x[0] * t[0]).ln()).unwrap();
        let x = column(&[0.5, 1.0]);
        let err = fit_nls(&model, &x, &[0.0, 0.0], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteModel { .. }));
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(ParametricModel::new("m", vec![(1.0, 1.0)], |_, _| 0.0).is_err());
        assert!(ParametricModel::new("m", vec![(0.0, f64::INFINITY)], |_, _| 0.0).is_err());
    }

    #[test]
    fn registry_names() {
        for name in ["zero", "linear", "affine-p", "sum-of-linears"] {
            assert!(ParametricModel::by_name(name, 1).is_ok());
        }
        assert!(ParametricModel::by_name("linear", 2).is_err());
        assert!(ParametricModel::by_name("cubic", 1).is_err());
        assert_eq!(ParametricModel::affine(3).dim(), 4);
    }
}
