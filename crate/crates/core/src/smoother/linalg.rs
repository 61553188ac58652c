//! Rank-revealing orthogonal projectors and the polynomial bases fed to them.

use nalgebra::DMatrix;

/// Orthogonal projector onto the column span of a basis matrix.
pub(crate) struct Projection {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

/// `P = U_r U_r'` from a thin SVD of `basis`; singular values below
/// `s_max * max(rows, cols) * eps` are dropped.
pub(crate) fn orthogonal_projector(basis: &DMatrix<f64>) -> Projection {
    let (rows, cols) = basis.shape();
    if rows == 0 || cols == 0 {
        return Projection {
            matrix: DMatrix::zeros(rows, rows),
            rank: 0,
        };
    }
    let svd = basis.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s_max = svd.singular_values.max();
    let tol = s_max * rows.max(cols) as f64 * f64::EPSILON;
    let kept: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > tol && s_max > 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut matrix = DMatrix::zeros(rows, rows);
    for i in 0..rows {
        for j in i..rows {
            let v: f64 = kept.iter().map(|&k| u[(i, k)] * u[(j, k)]).sum();
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Projection {
        matrix,
        rank: kept.len(),
    }
}

/// Legendre polynomials `P_0..=P_degree` at `z`.
pub(crate) fn legendre(z: f64, degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree == 0 {
        return;
    }
    out.push(z);
    for k in 1..degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * z * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// All multi-indices in `{0..=degree}^p`, first coordinate fastest.
pub(crate) fn tensor_indices(p: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; p];
    loop {
        out.push(idx.clone());
        let mut l = 0;
        while l < p {
            idx[l] += 1;
            if idx[l] <= degree {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
        if l == p {
            break;
        }
    }
    out
}

/// Tensor-product polynomial basis of coordinate-wise degree `<= degree`,
/// evaluated at `rows` (points in `[0,1]^p`). Columns span the same space
/// as the monomials `prod x_l^{k_l}`; Legendre polynomials in `2x - 1`
/// are used for conditioning.
pub(crate) fn tensor_basis(rows: &[&[f64]], p: usize, degree: usize) -> DMatrix<f64> {
    let indices = tensor_indices(p, degree);
    let mut basis = DMatrix::zeros(rows.len(), indices.len());
    let mut tables: Vec<Vec<f64>> = vec![Vec::new(); p];
    for (i, x) in rows.iter().enumerate() {
        for l in 0..p {
            legendre(2.0 * x[l] - 1.0, degree, &mut tables[l]);
        }
        for (c, k) in indices.iter().enumerate() {
            basis[(i, c)] = (0..p).map(|l| tables[l][k[l]]).product();
        }
    }
    basis
}
