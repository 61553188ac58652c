//! Geometric bandwidth grids `h_j = h0 * a^-j`.

use crate::error::{Error, Result};

/// Relative tolerance used when deciding that a real number is an integer.
pub(crate) const INTEGER_TOL: f64 = 1e-9;

pub(crate) fn is_integer(v: f64) -> bool {
    (v - v.round()).abs() <= INTEGER_TOL * v.abs().max(1.0)
}

/// Ordered set of bandwidths, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherGrid {
    h0: f64,
    ratio: f64,
    refinements: usize,
    values: Vec<f64>,
}

impl SmootherGrid {
    /// Builds `{h0 * a^-j : j = 0..=jn}`.
    pub fn new(h0: f64, ratio: f64, refinements: usize) -> Result<Self> {
        if !(h0 > 0.0 && h0 < 1.0) {
            return Err(Error::InvalidGrid(format!("h0 = {h0} must lie in (0, 1)")));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidGrid(format!("ratio a = {ratio} must exceed 1")));
        }
        if refinements < 1 {
            return Err(Error::InvalidGrid("Jn must be at least 1".into()));
        }
        let values = (0..=refinements)
            .map(|j| h0 / ratio.powi(j as i32))
            .collect();
        Ok(Self {
            h0,
            ratio,
            refinements,
            values,
        })
    }

    /// Grid for bin-based smoothers: `a` and `1/h0` must both be integers.
    pub fn for_bins(h0: f64, ratio: f64, refinements: usize) -> Result<Self> {
        if !is_integer(ratio) {
            return Err(Error::InvalidGrid(format!(
                "ratio a = {ratio} must be an integer for piecewise smoothers"
            )));
        }
        if !is_integer(1.0 / h0) {
            return Err(Error::InvalidGrid(format!(
                "1/h0 = {} must be an integer for piecewise smoothers",
                1.0 / h0
            )));
        }
        Self::new(h0, ratio, refinements)
    }

    /// Single-bandwidth "grid", used by fixed-bandwidth tests.
    pub fn single(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("bandwidth {h} must be positive")));
        }
        Ok(Self {
            h0: h,
            ratio: 2.0,
            refinements: 0,
            values: vec![h],
        })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `J_n`, the number of refinements below `h0`.
    pub fn refinements(&self) -> usize {
        self.refinements
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Finest bandwidth `h_{J_n}`.
    pub fn finest(&self) -> f64 {
        *self.values.last().expect("grid is never empty")
    }
}
