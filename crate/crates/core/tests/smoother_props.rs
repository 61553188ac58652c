use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smoothspec::smoother::{
    weights_additive, weights_kernel, weights_piecewise, weights_polynomial, KernelKind,
    KernelSpec, SmootherFamily, WeightMatrix,
};

fn design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.random::<f64>())
}

/// `P_h` recovered from `W_h` and the stored leverages.
fn projector(w: &WeightMatrix) -> DMatrix<f64> {
    let mut p = w.entries().clone();
    let lev = &w.projection().expect("projection family").leverage;
    for (i, l) in lev.iter().enumerate() {
        p[(i, i)] = *l;
    }
    p
}

fn assert_structure(w: &WeightMatrix) {
    let n = w.n();
    for i in 0..n {
        assert_eq!(w.get(i, i), 0.0);
        for j in 0..i {
            assert_eq!(w.get(i, j), w.get(j, i));
        }
    }
}

fn max_leverage(w: &WeightMatrix) -> f64 {
    w.projection()
        .unwrap()
        .leverage
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
}

fn dyadic(levels: usize) -> Vec<f64> {
    (0..levels).map(|j| 0.5f64.powi(j as i32)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_families_are_symmetric_zero_diagonal_and_bounded(
        seed in any::<u64>(),
        n in 20usize..80,
        p in 1usize..3,
    ) {
        let x = design(n, p, seed);
        let mut mats = Vec::new();
        for h in [1.0, 0.5, 1.0 / 3.0] {
            if let Ok(w) = weights_polynomial(&x, h) {
                mats.push(w);
            }
            mats.push(weights_additive(&x, h).unwrap());
        }
        for h in dyadic(4) {
            mats.push(weights_piecewise(&x, h, 0).unwrap());
            mats.push(weights_piecewise(&x, h, 1).unwrap());
        }
        for w in &mats {
            assert_structure(w);
            let bound = 1.0 + max_leverage(w);
            prop_assert!(w.spectral_radius() <= bound + 1e-10,
                "{:?} at h={}: {} > {}", w.family(), w.h(), w.spectral_radius(), bound);
        }
    }

    #[test]
    fn kernel_weights_are_nonnegative(seed in any::<u64>(), n in 5usize..60, h in 0.05f64..1.0) {
        let x = design(n, 1, seed);
        for kind in [KernelKind::Gaussian, KernelKind::Laplace, KernelKind::Cauchy] {
            // Isolated points may push the density under the floor; that is reported, not a weight.
            let w = match weights_kernel(&x, h, &KernelSpec::new(kind)) {
                Ok(w) => w,
                Err(smoothspec::Error::DegenerateBandwidth { .. }) => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            assert_structure(&w);
            prop_assert!(w.entries().iter().all(|v| *v >= 0.0));
        }
    }

    // sum_{i != j} p_ij^2 = sum_i p_ii (1 - p_ii), which grows with nested
    // projections as long as the leverages stay at or below 1/2.
    #[test]
    fn frobenius_grows_as_nested_bandwidths_shrink(seed in any::<u64>(), n in 200usize..400) {
        let x = design(n, 1, seed);
        let families: Vec<Vec<WeightMatrix>> = vec![
            dyadic(5).into_iter().map(|h| weights_piecewise(&x, h, 0).unwrap()).collect(),
            dyadic(4).into_iter().map(|h| weights_piecewise(&x, h, 1).unwrap()).collect(),
            [1.0, 0.5, 0.25, 0.125].iter().map(|&h| weights_polynomial(&x, h).unwrap()).collect(),
        ];
        for mats in families {
            prop_assume!(mats.iter().all(|w| max_leverage(w) <= 0.5));
            for pair in mats.windows(2) {
                prop_assert!(pair[1].frobenius_sq() >= pair[0].frobenius_sq() - 1e-10,
                    "h={} -> h={}: {} < {}", pair[0].h(), pair[1].h(),
                    pair[1].frobenius_sq(), pair[0].frobenius_sq());
            }
        }
    }

    #[test]
    fn nested_projector_difference_has_rank_norm(seed in any::<u64>(), n in 60usize..150) {
        let x = design(n, 1, seed);
        let chains: Vec<Vec<WeightMatrix>> = vec![
            [1.0, 0.5, 0.25].iter().map(|&h| weights_polynomial(&x, h).unwrap()).collect(),
            dyadic(4).into_iter().map(|h| weights_piecewise(&x, h, 0).unwrap()).collect(),
        ];
        for chain in chains {
            let p0 = projector(&chain[0]);
            for w in &chain[1..] {
                let d = projector(w) - &p0;
                let rank_gap = (w.rank().unwrap() - chain[0].rank().unwrap()) as f64;
                prop_assert!((d.norm_squared() - rank_gap).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn additive_matches_polynomial_in_one_dimension() {
    let x = design(40, 1, 5);
    for h in [1.0, 0.5, 0.25] {
        let a = weights_additive(&x, h).unwrap();
        let p = weights_polynomial(&x, h).unwrap();
        assert!((a.entries() - p.entries()).amax() < 1e-10);
    }
}

#[test]
fn additive_rank_reports_collinear_columns() {
    let x1 = design(30, 1, 9);
    let x = DMatrix::from_fn(30, 2, |i, _| x1[(i, 0)]);
    let w = weights_additive(&x, 1.0).unwrap();
    assert_eq!(w.rank(), Some(2));
    let w = weights_additive(&design(30, 2, 10), 1.0).unwrap();
    assert_eq!(w.rank(), Some(3));
}

#[test]
fn family_strings_round_trip() {
    for s in ["poly", "piecewise:0", "piecewise:2", "kernel:gaussian", "kernel:cauchy", "additive"] {
        let f: SmootherFamily = s.parse().unwrap();
        assert_eq!(f.to_string(), s);
    }
    assert!("spline".parse::<SmootherFamily>().is_err());
}
