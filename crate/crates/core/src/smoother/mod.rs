//! Smoother weight matrices, bandwidth grids and matrix diagnostics.

mod grid;
mod kernel;
mod linalg;
mod weights;

pub use grid::SmootherGrid;
pub use kernel::{KernelKind, KernelSpec};
pub use weights::{
    frobenius_sq, spectral_radius, weights_additive, weights_kernel, weights_piecewise,
    weights_polynomial, ProjectionInfo, SmootherFamily, WeightMatrix, DENSITY_FLOOR,
};
