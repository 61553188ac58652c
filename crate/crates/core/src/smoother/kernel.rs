use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Product kernels on `R^p`; each coordinate factor is a univariate density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    #[default]
    Gaussian,
    Triangular,
    Laplace,
    Cauchy,
}

impl KernelKind {
    /// Univariate factor.
    pub fn factor(self, u: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KernelKind::Triangular => (1.0 - u.abs()).max(0.0),
            KernelKind::Laplace => 0.5 * (-u.abs()).exp(),
            KernelKind::Cauchy => 1.0 / (PI * (1.0 + u * u)),
        }
    }

    pub fn is_compact(self) -> bool {
        matches!(self, KernelKind::Triangular)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Triangular => "triangular",
            KernelKind::Laplace => "laplace",
            KernelKind::Cauchy => "cauchy",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "triangular" => Ok(KernelKind::Triangular),
            "laplace" => Ok(KernelKind::Laplace),
            "cauchy" => Ok(KernelKind::Cauchy),
            other => Err(Error::InvalidConfig(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A product kernel `K(x) = prod_l k(x_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KernelSpec {
    pub kind: KernelKind,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&u| self.kind.factor(u)).product()
    }

    /// `K_h(d) = K(d / h)`.
    pub fn eval_scaled(&self, d: impl Iterator<Item = f64>, h: f64) -> f64 {
        d.map(|u| self.kind.factor(u / h)).product()
    }
}
