//! Conditional variance estimates and the standardizations built from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::smoother::WeightMatrix;

/// How `sigma^2(X_i)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMethod {
    /// Local moments over sup-norm neighborhoods of radius `bandwidth` (unit scale).
    Local { bandwidth: f64 },
    /// Squared successive differences of the response ordered by the covariate.
    Rice,
    /// A known constant variance.
    Known { variance: f64 },
}

/// Default local bandwidth on the `[0,1]` scale.
pub const DEFAULT_LOCAL_BANDWIDTH: f64 = 0.125;

impl VarianceMethod {
    pub fn estimate(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<SigmaEstimate> {
        match *self {
            VarianceMethod::Local { bandwidth } => local_variance(x, y, bandwidth),
            VarianceMethod::Rice => rice_variance(x, y),
            VarianceMethod::Known { variance } => known_variance(y.len(), variance),
        }
    }
}

impl fmt::Display for VarianceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceMethod::Local { bandwidth } => write!(f, "local:{bandwidth}"),
            VarianceMethod::Rice => f.write_str("rice"),
            VarianceMethod::Known { variance } => write!(f, "known:{variance}"),
        }
    }
}

impl FromStr for VarianceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let number = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::InvalidConfig(format!("'{v}' is not a positive number")))
        };
        match s.split_once(':') {
            None if s == "rice" => Ok(VarianceMethod::Rice),
            None if s == "local" => Ok(VarianceMethod::Local {
                bandwidth: DEFAULT_LOCAL_BANDWIDTH,
            }),
            Some(("local", b)) => Ok(VarianceMethod::Local {
                bandwidth: number(b)?,
            }),
            Some(("known", v)) => Ok(VarianceMethod::Known {
                variance: number(v)?,
            }),
            _ => Err(Error::InvalidConfig(format!("unknown variance method '{s}'"))),
        }
    }
}

/// Per-observation variance estimates, floored away from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub per_point: Vec<f64>,
    pub method: VarianceMethod,
    pub floor_applied: usize,
}

impl SigmaEstimate {
    /// Wraps externally known variances.
    pub fn from_values(per_point: Vec<f64>) -> Result<Self> {
        if let Some(v) = per_point.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidConfig(format!("variance {v} is not positive")));
        }
        let variance = per_point.first().copied().unwrap_or(1.0);
        Ok(Self {
            per_point,
            method: VarianceMethod::Known { variance },
            floor_applied: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.per_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_point.is_empty()
    }

    /// `sigma(X_i)`.
    pub fn std_dev(&self, i: usize) -> f64 {
        self.per_point[i].sqrt()
    }

    /// Multiplies every variance by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            per_point: self.per_point.iter().map(|v| v * c).collect(),
            method: self.method,
            floor_applied: self.floor_applied,
        }
    }
}

/// `1e-10 * (1 + sample variance of y)`.
pub fn sigma_floor(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 1e-10;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1e-10 * (1.0 + var)
}

fn floored(raw: Vec<f64>, y: &[f64], method: VarianceMethod) -> SigmaEstimate {
    let floor = sigma_floor(y);
    let mut count = 0;
    let per_point = raw
        .into_iter()
        .map(|v| {
            if v < floor || !v.is_finite() {
                count += 1;
                floor
            } else {
                v
            }
        })
        .collect();
    SigmaEstimate {
        per_point,
        method,
        floor_applied: count,
    }
}

/// Neighborhood mean of `Y^2` minus squared neighborhood mean of `Y`; each
/// neighborhood is the sup-norm ball of radius `bandwidth` and contains its center.
pub fn local_variance(x: &DMatrix<f64>, y: &[f64], bandwidth: f64) -> Result<SigmaEstimate> {
    let (n, p) = x.shape();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "local variance bandwidth {bandwidth} must be positive"
        )));
    }
    let raw = (0..n)
        .map(|i| {
            let (mut count, mut s1, mut s2) = (0usize, 0.0, 0.0);
            for j in 0..n {
                let inside = (0..p).all(|l| (x[(j, l)] - x[(i, l)]).abs() <= bandwidth);
                if inside {
                    count += 1;
                    s1 += y[j];
                    s2 += y[j] * y[j];
                }
            }
            let m1 = s1 / count as f64;
            s2 / count as f64 - m1 * m1
        })
        .collect();
    Ok(floored(raw, y, VarianceMethod::Local { bandwidth }))
}

/// Differencing estimator `sum (Y_(i+1) - Y_(i))^2 / (2(n-1))` with `Y` ordered by `X`.
pub fn rice_variance(x: &DMatrix<f64>, y: &[f64]) -> Result<SigmaEstimate> {
    let (n, p) = x.shape();
    if p != 1 {
        return Err(Error::InvalidConfig(format!(
            "the differencing estimator needs a scalar covariate, got {p} columns"
        )));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewObservations { n, needed: 2 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[(a, 0)].total_cmp(&x[(b, 0)]));
    let sum: f64 = order.windows(2).map(|w| (y[w[1]] - y[w[0]]).powi(2)).sum();
    let value = sum / (2.0 * (n - 1) as f64);
    Ok(floored(vec![value; n], y, VarianceMethod::Rice))
}

fn known_variance(n: usize, variance: f64) -> Result<SigmaEstimate> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "known variance {variance} must be positive"
        )));
    }
    Ok(SigmaEstimate {
        per_point: vec![variance; n],
        method: VarianceMethod::Known { variance },
        floor_applied: 0,
    })
}

fn check_len(w: &WeightMatrix, s: &SigmaEstimate) {
    assert_eq!(w.n(), s.len(), "weight matrix and variance sizes differ");
}

/// `sqrt(2 sum_{i,j} w_ij(h0)^2 s_i s_j)`.
pub fn vhat_baseline(w0: &WeightMatrix, s: &SigmaEstimate) -> f64 {
    vhat_single(w0, s)
}

/// `sqrt(2 sum_{i,j} w_ij(h)^2 s_i s_j)`.
pub fn vhat_single(wh: &WeightMatrix, s: &SigmaEstimate) -> f64 {
    check_len(wh, s);
    (2.0 * wh.weighted_sq_sum(&s.per_point)).max(0.0).sqrt()
}

/// `sqrt(2 sum_{i,j} (w_ij(h) - w_ij(h0))^2 s_i s_j)`.
pub fn vhat_diff(wh: &WeightMatrix, w0: &WeightMatrix, s: &SigmaEstimate) -> f64 {
    check_len(wh, s);
    check_len(w0, s);
    let n = wh.n();
    let (a, b) = (wh.entries(), w0.entries());
    let sp = &s.per_point;
    let mut acc = 0.0;
    for j in 1..n {
        let mut t = 0.0;
        for i in 0..j {
            let d = a[(i, j)] - b[(i, j)];
            t += d * d * sp[i];
        }
        acc += t * sp[j];
    }
    (4.0 * acc).sqrt()
}
