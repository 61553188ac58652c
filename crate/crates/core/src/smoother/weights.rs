//! Weight matrices `W_h`: symmetric, zero diagonal, one per smoother and bandwidth.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use super::grid::is_integer;
use super::kernel::{KernelKind, KernelSpec};
use super::linalg::{orthogonal_projector, tensor_basis};
use crate::error::{Error, Result};

/// Density estimates below this mark a kernel bandwidth as degenerate.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Smoother family used to build the weight matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherFamily {
    /// Projection on tensor polynomials of coordinate-wise degree `floor(1/h)`.
    Polynomial,
    /// Piecewise polynomials of degree `<= degree` on a regular grid of bins.
    /// `degree = 0` is the regressogram.
    Piecewise { degree: usize },
    /// Leave-one-out kernel smoother normalized by the density estimate.
    Kernel(KernelKind),
    /// Polynomials without cross-products, for additive alternatives.
    Additive,
}

impl SmootherFamily {
    pub fn regressogram() -> Self {
        SmootherFamily::Piecewise { degree: 0 }
    }

    /// Bin-based families need integer `1/h` and an integer grid ratio.
    pub fn needs_bin_grid(&self) -> bool {
        matches!(self, SmootherFamily::Piecewise { .. })
    }

    /// Builds `W_h` on a design already mapped to `[0,1]^p`.
    pub fn build(&self, x: &DMatrix<f64>, h: f64) -> Result<WeightMatrix> {
        match *self {
            SmootherFamily::Polynomial => weights_polynomial(x, h),
            SmootherFamily::Piecewise { degree } => weights_piecewise(x, h, degree),
            SmootherFamily::Kernel(kind) => weights_kernel(x, h, &KernelSpec::new(kind)),
            SmootherFamily::Additive => weights_additive(x, h),
        }
    }
}

impl Default for SmootherFamily {
    fn default() -> Self {
        SmootherFamily::regressogram()
    }
}

impl fmt::Display for SmootherFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmootherFamily::Polynomial => f.write_str("poly"),
            SmootherFamily::Piecewise { degree } => write!(f, "piecewise:{degree}"),
            SmootherFamily::Kernel(k) => write!(f, "kernel:{k}"),
            SmootherFamily::Additive => f.write_str("additive"),
        }
    }
}

impl FromStr for SmootherFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("poly" | "polynomial", None) => Ok(SmootherFamily::Polynomial),
            ("additive", None) => Ok(SmootherFamily::Additive),
            ("regressogram", None) => Ok(SmootherFamily::regressogram()),
            ("piecewise", arg) => {
                let degree = match arg {
                    None => 0,
                    Some(a) => a.parse().map_err(|_| {
                        Error::InvalidConfig(format!("piecewise degree '{a}' is not an integer"))
                    })?,
                };
                Ok(SmootherFamily::Piecewise { degree })
            }
            ("kernel", arg) => Ok(SmootherFamily::Kernel(match arg {
                None => KernelKind::default(),
                Some(a) => a.parse()?,
            })),
            _ => Err(Error::InvalidConfig(format!("unknown smoother family '{s}'"))),
        }
    }
}

/// Rank information for projection-based weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInfo {
    pub columns: usize,
    pub rank: usize,
    /// Diagonal of the projector `P_h` before it was zeroed.
    pub leverage: Vec<f64>,
}

/// Symmetric `n x n` matrix with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    h: f64,
    family: SmootherFamily,
    entries: DMatrix<f64>,
    projection: Option<ProjectionInfo>,
}

impl WeightMatrix {
    /// Wraps an arbitrary matrix after checking the zero-diagonal and symmetry invariants.
    pub fn from_entries(h: f64, family: SmootherFamily, entries: DMatrix<f64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: c,
            });
        }
        for i in 0..r {
            if entries[(i, i)] != 0.0 {
                return Err(Error::InvalidConfig(format!("weight diagonal at {i} is not zero")));
            }
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::InvalidConfig(format!(
                        "weight matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            h,
            family,
            entries,
            projection: None,
        })
    }

    fn from_projector(
        h: f64,
        family: SmootherFamily,
        mut p: DMatrix<f64>,
        columns: usize,
        rank: usize,
    ) -> Self {
        let leverage = p.diagonal().iter().copied().collect();
        p.fill_diagonal(0.0);
        Self {
            h,
            family,
            entries: p,
            projection: Some(ProjectionInfo {
                columns,
                rank,
                leverage,
            }),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn family(&self) -> SmootherFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn projection(&self) -> Option<&ProjectionInfo> {
        self.projection.as_ref()
    }

    /// Effective rank of the underlying projector, if any.
    pub fn rank(&self) -> Option<usize> {
        self.projection.as_ref().map(|p| p.rank)
    }

    /// `u' W u`, summed over the strict upper triangle.
    pub fn quad_form(&self, u: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for j in 1..n {
            let col = self.entries.column(j);
            let mut s = 0.0;
            for i in 0..j {
                s += col[i] * u[i];
            }
            acc += s * u[j];
        }
        2.0 * acc
    }

    /// `sum_{i,j} w_ij^2 s_i s_j`.
    pub fn weighted_sq_sum(&self, s: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for j in 1..n {
            let col = self.entries.column(j);
            let mut t = 0.0;
            for i in 0..j {
                t += col[i] * col[i] * s[i];
            }
            acc += t * s[j];
        }
        2.0 * acc
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|w| w * w).sum()
    }

    /// Row-major dense CSV, full matrix.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.n() {
            wtr.write_record(self.entries.row(i).iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `spectral_radius(W)`.
pub fn spectral_radius(w: &WeightMatrix) -> f64 {
    w.spectral_radius()
}

/// `frobenius_sq(W)`.
pub fn frobenius_sq(w: &WeightMatrix) -> f64 {
    w.frobenius_sq()
}

fn degree_for(h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidBandwidth {
            h,
            reason: "must be positive and finite".into(),
        });
    }
    Ok((1.0 / h + 1e-9).floor() as usize)
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

fn check_basis_size(n: usize, columns: usize) -> Result<()> {
    if n < columns {
        return Err(Error::TooFewObservations { n, needed: columns });
    }
    if 2 * columns > n {
        warn!("basis dimension {columns} exceeds half the sample size {n}");
    }
    Ok(())
}

fn warn_rank(h: f64, rank: usize, columns: usize) {
    if rank < columns {
        warn!("bandwidth {h}: projection basis is rank deficient ({rank} of {columns} columns)");
    }
}

/// Projection on all tensor monomials with coordinate-wise degree `<= floor(1/h)`.
pub fn weights_polynomial(x: &DMatrix<f64>, h: f64) -> Result<WeightMatrix> {
    let degree = degree_for(h)?;
    let (n, p) = x.shape();
    let columns = (degree + 1).pow(p as u32);
    check_basis_size(n, columns)?;
    let rows = rows_of(x);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let basis = tensor_basis(&refs, p, degree);
    let proj = orthogonal_projector(&basis);
    warn_rank(h, proj.rank, columns);
    Ok(WeightMatrix::from_projector(
        h,
        SmootherFamily::Polynomial,
        proj.matrix,
        columns,
        proj.rank,
    ))
}

/// Bin index of `v` among `bins` cells of `[0,1)`; the endpoint 1 goes to the last cell.
fn bin_of(v: f64, bins: usize) -> usize {
    let k = (v * bins as f64).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

/// Piecewise polynomials of coordinate-wise degree `<= degree` on bins of side `h`.
pub fn weights_piecewise(x: &DMatrix<f64>, h: f64, degree: usize) -> Result<WeightMatrix> {
    if !(h > 0.0 && h <= 1.0) || !is_integer(1.0 / h) {
        return Err(Error::InvalidBandwidth {
            h,
            reason: "1/h must be an integer for piecewise smoothers".into(),
        });
    }
    let bins = (1.0 / h).round() as usize;
    let (n, p) = x.shape();
    let local_cols = (degree + 1).pow(p as u32);

    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key: Vec<usize> = (0..p).map(|l| bin_of(x[(i, l)], bins)).collect();
        cells.entry(key).or_default().push(i);
    }

    let mut proj = DMatrix::zeros(n, n);
    let mut rank = 0;
    let mut local = Vec::new();
    for (key, members) in &cells {
        // Local coordinates in [0,1) keep the per-bin basis well conditioned.
        local.clear();
        for &i in members {
            local.push(
                (0..p)
                    .map(|l| (x[(i, l)] * bins as f64 - key[l] as f64).clamp(0.0, 1.0))
                    .collect::<Vec<f64>>(),
            );
        }
        let refs: Vec<&[f64]> = local.iter().map(Vec::as_slice).collect();
        let block = orthogonal_projector(&tensor_basis(&refs, p, degree));
        rank += block.rank;
        for (a, &i) in members.iter().enumerate() {
            for (b, &j) in members.iter().enumerate() {
                proj[(i, j)] = block.matrix[(a, b)];
            }
        }
    }
    let columns = local_cols * bins.pow(p as u32);
    Ok(WeightMatrix::from_projector(
        h,
        SmootherFamily::Piecewise { degree },
        proj,
        columns,
        rank,
    ))
}

/// Kernel weights `K_h(X_i - X_j) / ((n-1) h^p sqrt(f_i f_j))`.
pub fn weights_kernel(x: &DMatrix<f64>, h: f64, kernel: &KernelSpec) -> Result<WeightMatrix> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::TooFewObservations { n, needed: 2 });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidBandwidth {
            h,
            reason: "must be positive and finite".into(),
        });
    }
    let scale = 1.0 / ((n - 1) as f64 * h.powi(p as i32));
    let mut k = DMatrix::zeros(n, n);
    for j in 1..n {
        for i in 0..j {
            let v = kernel.eval_scaled((0..p).map(|l| x[(i, l)] - x[(j, l)]), h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let density: Vec<f64> = (0..n).map(|i| scale * k.row(i).sum()).collect();
    let degenerate: Vec<usize> = density
        .iter()
        .enumerate()
        .filter(|(_, &f)| !(f >= DENSITY_FLOOR))
        .map(|(i, _)| i)
        .collect();
    if !degenerate.is_empty() {
        return Err(Error::DegenerateBandwidth {
            h,
            points: degenerate,
        });
    }
    let root: Vec<f64> = density.iter().map(|f| f.sqrt()).collect();
    for j in 1..n {
        for i in 0..j {
            let v = scale * k[(i, j)] / (root[i] * root[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(WeightMatrix {
        h,
        family: SmootherFamily::Kernel(kernel.kind),
        entries: k,
        projection: None,
    })
}

/// Projection on `{1} ∪ {x_l^k : k = 1..=floor(1/h), l = 1..=p}` (no cross-products).
pub fn weights_additive(x: &DMatrix<f64>, h: f64) -> Result<WeightMatrix> {
    let degree = degree_for(h)?;
    let (n, p) = x.shape();
    let columns = 1 + p * degree;
    check_basis_size(n, columns)?;
    let mut basis = DMatrix::zeros(n, columns);
    let mut table = Vec::new();
    for i in 0..n {
        basis[(i, 0)] = 1.0;
        for l in 0..p {
            super::linalg::legendre(2.0 * x[(i, l)] - 1.0, degree, &mut table);
            for k in 1..=degree {
                basis[(i, 1 + l * degree + (k - 1))] = table[k];
            }
        }
    }
    let proj = orthogonal_projector(&basis);
    warn_rank(h, proj.rank, columns);
    Ok(WeightMatrix::from_projector(
        h,
        SmootherFamily::Additive,
        proj.matrix,
        columns,
        proj.rank,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.random::<f64>())
    }

    fn assert_weight_invariants(w: &WeightMatrix) {
        let n = w.n();
        for i in 0..n {
            assert_eq!(w.get(i, i), 0.0);
            for j in 0..n {
                assert_eq!(w.get(i, j), w.get(j, i));
            }
        }
    }

    #[test]
    fn constant_basis_gives_uniform_weights() {
        let x = uniform_design(9, 1, 3);
        let w = weights_polynomial(&x, 1.5).unwrap();
        assert_weight_invariants(&w);
        for i in 0..9 {
            for j in 0..9 {
                let expect = if i == j { 0.0 } else { 1.0 / 9.0 };
                assert!((w.get(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_point_constant_projector() {
        // h = 1 already admits the linear term, so use h > 1.
        let x = DMatrix::from_column_slice(2, 1, &[0.2, 0.7]);
        let w = weights_polynomial(&x, 2.0).unwrap();
        assert!((w.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(w.get(0, 0), 0.0);
    }

    #[test]
    fn cubic_projector_has_trace_four() {
        let x = uniform_design(50, 1, 11);
        let w = weights_polynomial(&x, 1.0 / 3.0).unwrap();
        assert_weight_invariants(&w);
        let info = w.projection().unwrap();
        assert_eq!(info.columns, 4);
        assert_eq!(info.rank, 4);
        let trace: f64 = info.leverage.iter().sum();
        assert!((trace - 4.0).abs() < 1e-10);
        // ||P||_F^2 = trace(P) for a projector, and W drops the diagonal.
        let sum_sq_lev: f64 = info.leverage.iter().map(|v| v * v).sum();
        assert!((w.frobenius_sq() - (4.0 - sum_sq_lev)).abs() < 1e-10);
    }

    #[test]
    fn polynomial_rejects_small_samples() {
        let x = uniform_design(3, 1, 1);
        assert!(matches!(
            weights_polynomial(&x, 0.25),
            Err(Error::TooFewObservations { n: 3, needed: 5 })
        ));
    }

    #[test]
    fn regressogram_pairs_within_bins() {
        let x = DMatrix::from_column_slice(4, 1, &[0.1, 0.2, 0.6, 0.9]);
        let w = weights_piecewise(&x, 0.5, 0).unwrap();
        assert_weight_invariants(&w);
        let expect = [
            [0.0, 0.5, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.5],
            [0.0, 0.0, 0.5, 0.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                assert!((w.get(i, j) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_points_give_zero_matrix() {
        let x = DMatrix::from_column_slice(4, 1, &[0.1, 0.3, 0.6, 0.9]);
        let w = weights_piecewise(&x, 0.25, 0).unwrap();
        assert_eq!(w.frobenius_sq(), 0.0);
        assert_eq!(w.rank(), Some(4));
    }

    #[test]
    fn underfull_bins_are_rank_truncated() {
        // Two points in a bin cannot support a local quadratic.
        let x = DMatrix::from_column_slice(5, 1, &[0.05, 0.3, 0.6, 0.7, 0.8]);
        let w = weights_piecewise(&x, 0.5, 2).unwrap();
        assert_weight_invariants(&w);
        assert_eq!(w.rank(), Some(2 + 3));
        // The two-point bin is interpolated exactly, so no off-diagonal mass survives there.
        assert!(w.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn piecewise_rejects_non_integer_inverse() {
        let x = uniform_design(10, 1, 2);
        assert!(weights_piecewise(&x, 0.3, 0).is_err());
    }

    #[test]
    fn piecewise_two_dimensional_bins() {
        let x = DMatrix::from_row_slice(4, 2, &[0.1, 0.1, 0.2, 0.3, 0.1, 0.8, 0.9, 0.9]);
        let w = weights_piecewise(&x, 0.5, 0).unwrap();
        assert!((w.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(2, 3), 0.0);
    }

    #[test]
    fn kernel_coincident_pair() {
        let x = DMatrix::from_column_slice(2, 1, &[0.4, 0.4]);
        for kind in [KernelKind::Gaussian, KernelKind::Triangular, KernelKind::Cauchy] {
            let w = weights_kernel(&x, 0.3, &KernelSpec::new(kind)).unwrap();
            assert!((w.get(0, 1) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_degenerate_when_support_is_empty() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        let err = weights_kernel(&x, 0.1, &KernelSpec::new(KernelKind::Triangular)).unwrap_err();
        match err {
            Error::DegenerateBandwidth { points, .. } => assert_eq!(points, vec![0, 1, 2]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn gaussian_weights_positive() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 1.0]);
        let w = weights_kernel(&x, 1.0, &KernelSpec::default()).unwrap();
        assert_weight_invariants(&w);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(w.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn additive_matches_polynomial_in_one_dimension() {
        let x = uniform_design(30, 1, 5);
        let a = weights_additive(&x, 0.25).unwrap();
        let b = weights_polynomial(&x, 0.25).unwrap();
        assert!((a.entries() - b.entries()).abs().max() < 1e-12);
    }

    #[test]
    fn additive_rank_and_collinearity() {
        let x = uniform_design(40, 2, 8);
        let w = weights_additive(&x, 1.0).unwrap();
        let info = w.projection().unwrap();
        assert_eq!(info.rank, 3);
        assert!((info.leverage.iter().sum::<f64>() - 3.0).abs() < 1e-10);

        let mut dup = x.clone();
        for i in 0..40 {
            dup[(i, 1)] = dup[(i, 0)];
        }
        let w = weights_additive(&dup, 1.0).unwrap();
        assert_eq!(w.rank(), Some(2));
    }

    #[test]
    fn diagnostics_small_cases() {
        let zero = WeightMatrix::from_entries(1.0, SmootherFamily::Polynomial, DMatrix::zeros(3, 3))
            .unwrap();
        assert_eq!(zero.spectral_radius(), 0.0);
        assert_eq!(zero.frobenius_sq(), 0.0);
        let half = WeightMatrix::from_entries(
            1.0,
            SmootherFamily::Polynomial,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
        )
        .unwrap();
        assert!((half.spectral_radius() - 0.5).abs() < 1e-15);
        assert!((half.frobenius_sq() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn from_entries_checks_invariants() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.1, 0.5, 0.5, 0.0]);
        assert!(WeightMatrix::from_entries(1.0, SmootherFamily::Polynomial, bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.4, 0.0]);
        assert!(WeightMatrix::from_entries(1.0, SmootherFamily::Polynomial, asym).is_err());
    }

    #[test]
    fn family_parsing() {
        for s in ["poly", "piecewise:0", "piecewise:2", "kernel:laplace", "additive"] {
            assert_eq!(s.parse::<SmootherFamily>().unwrap().to_string(), s);
        }
        assert!("piecewise:x".parse::<SmootherFamily>().is_err());
        assert!("spline".parse::<SmootherFamily>().is_err());
    }

    #[test]
    fn csv_export_is_row_major() {
        let w = WeightMatrix::from_entries(
            1.0,
            SmootherFamily::Polynomial,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
        )
        .unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,0.5\n0.5,0\n");
    }
}
