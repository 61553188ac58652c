//! Sparse upper-triangle representation of symmetric zero-diagonal matrices,
//! used when the same matrix is evaluated against many residual vectors.

use crate::smoother::WeightMatrix;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairForm {
    pairs: Vec<(u32, u32, f64)>,
    sum_sq: f64,
}

impl PairForm {
    fn collect(n: usize, entry: impl Fn(usize, usize) -> f64) -> Self {
        let mut pairs = Vec::new();
        let mut sum_sq = 0.0;
        for j in 1..n {
            for i in 0..j {
                let w = entry(i, j);
                if w != 0.0 {
                    pairs.push((i as u32, j as u32, w));
                    sum_sq += w * w;
                }
            }
        }
        Self {
            pairs,
            sum_sq: 2.0 * sum_sq,
        }
    }

    pub fn from_matrix(w: &WeightMatrix) -> Self {
        let e = w.entries();
        Self::collect(w.n(), |i, j| e[(i, j)])
    }

    /// Entries of `a - b`.
    pub fn difference(a: &WeightMatrix, b: &WeightMatrix) -> Self {
        let (ea, eb) = (a.entries(), b.entries());
        Self::collect(a.n(), |i, j| ea[(i, j)] - eb[(i, j)])
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    /// `u' W u`.
    pub fn quad(&self, u: &[f64]) -> f64 {
        2.0 * self
            .pairs
            .iter()
            .map(|&(i, j, w)| w * u[i as usize] * u[j as usize])
            .sum::<f64>()
    }

    /// `sum_{i,j} w_ij^2 s_i s_j`; `constant` short-circuits a constant `s`.
    pub fn sq_weighted(&self, s: &[f64], constant: Option<f64>) -> f64 {
        match constant {
            Some(c) => self.sum_sq * c * c,
            None => {
                2.0 * self
                    .pairs
                    .iter()
                    .map(|&(i, j, w)| w * w * s[i as usize] * s[j as usize])
                    .sum::<f64>()
            }
        }
    }
}
