//! Samples `(X, Y)` together with the affine map of `X` onto `[0,1]^p`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-coordinate affine map `u = (x - lower) / (upper - lower)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub lower: f64,
    pub upper: f64,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.lower) / (self.upper - self.lower)
    }

    pub fn is_identity(&self) -> bool {
        self.lower == 0.0 && self.upper == 1.0
    }
}

/// A regression sample. Models are evaluated on the original `x`; smoothers
/// and local variance neighborhoods use the rescaled `unit_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    unit_x: DMatrix<f64>,
    y: Vec<f64>,
    maps: Vec<AffineMap>,
}

impl Dataset {
    /// Rescales each coordinate by its observed range.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let maps = (0..x.ncols())
            .map(|l| {
                let col = x.column(l);
                let (lo, hi) = (col.min(), col.max());
                if !(hi > lo) {
                    return Err(Error::Data(format!(
                        "design column {} is constant",
                        l + 1
                    )));
                }
                // Columns already inside [0,1] keep the identity map.
                if lo >= 0.0 && hi <= 1.0 {
                    Ok(AffineMap::identity())
                } else {
                    Ok(AffineMap { lower: lo, upper: hi })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_maps(x, y, maps)
    }

    /// Uses a known support box, e.g. `[-1, 1]` for a uniform design.
    pub fn with_support(x: DMatrix<f64>, y: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::InvalidConfig(format!(
                "support [{lower}, {upper}] is empty"
            )));
        }
        let maps = vec![AffineMap { lower, upper }; x.ncols()];
        Self::with_maps(x, y, maps)
    }

    /// Design already on `[0,1]^p`.
    pub fn unit(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let maps = vec![AffineMap::identity(); x.ncols()];
        Self::with_maps(x, y, maps)
    }

    /// Scalar design convenience.
    pub fn from_column(x: &[f64], y: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        Self::with_support(DMatrix::from_column_slice(x.len(), 1, x), y, lower, upper)
    }

    pub fn with_maps(x: DMatrix<f64>, y: Vec<f64>, maps: Vec<AffineMap>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if maps.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: maps.len(),
            });
        }
        let unit_x = DMatrix::from_fn(x.nrows(), x.ncols(), |i, l| maps[l].apply(x[(i, l)]));
        Ok(Self { x, unit_x, y, maps })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn unit_x(&self) -> &DMatrix<f64> {
        &self.unit_x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}
