use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use smoothspec::bootstrap::{
    bootstrap_sample, bootstrap_statistics, critical_rank, critical_value, draw_multipliers,
    BootstrapConfig, MultiplierLaw,
};
use smoothspec::engine::{Pipeline, TestVariant};
use smoothspec::smoother::{SmootherFamily, SmootherGrid};
use smoothspec::{Dataset, FitOptions, ParametricModel, SigmaEstimate, VarianceMethod};

fn white_noise(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Dataset::from_column(&xs, y, -1.0, 1.0).unwrap()
}

fn kolmogorov_to_normal(stats: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut s = stats.to_vec();
    s.sort_by(f64::total_cmp);
    let b = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, v)| {
            let f = normal.cdf(*v);
            (f - k as f64 / b).abs().max(((k + 1) as f64 / b - f).abs())
        })
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn critical_value_is_monotone_and_permutation_invariant(
        stats in prop::collection::vec(-5.0f64..5.0, 1..300),
        a1 in 0.001f64..0.999,
        a2 in 0.001f64..0.999,
        shift in 0usize..300,
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(critical_value(&stats, lo) >= critical_value(&stats, hi));
        let mut rotated = stats.clone();
        rotated.rotate_left(shift % stats.len());
        prop_assert_eq!(critical_value(&rotated, lo), critical_value(&stats, lo));
    }

    #[test]
    fn resample_matches_direct_formula(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = DMatrix::from_column_slice(n, 1, &xs);
        let theta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let s = SigmaEstimate::from_values((0..n).map(|_| rng.random_range(0.1..4.0)).collect()).unwrap();
        let omega = draw_multipliers(n, &BootstrapConfig::new(1, seed), 3);
        let y = bootstrap_sample(&theta, &s, &ParametricModel::linear(), &x, &omega);
        for i in 0..n {
            let direct = theta[0] + theta[1] * xs[i] + s.per_point[i].sqrt() * omega[i];
            prop_assert!((y[i] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
        let zero = bootstrap_sample(&theta, &s, &ParametricModel::linear(), &x, &vec![0.0; n]);
        for i in 0..n {
            prop_assert_eq!(zero[i], theta[0] + theta[1] * xs[i]);
        }
    }
}

#[test]
fn quantile_rank_examples() {
    assert_eq!(critical_rank(199, 0.05), 190);
    assert_eq!(critical_rank(1, 0.05), 2);
    assert_eq!(critical_value(&[0.7], 0.05), 0.7);
    assert_eq!(critical_rank(99, 1.0), 0);
    assert_eq!(critical_value(&[1.0, 2.0], 1.0), f64::NEG_INFINITY);
}

#[test]
fn multiplier_streams_are_reproducible_and_distinct() {
    for law in [MultiplierLaw::TwoPointGolden, MultiplierLaw::Rademacher, MultiplierLaw::Gaussian] {
        let cfg = BootstrapConfig { draws: 10, multiplier: law, seed: 42 };
        assert_eq!(draw_multipliers(50, &cfg, 7), draw_multipliers(50, &cfg, 7));
        assert_ne!(draw_multipliers(50, &cfg, 7), draw_multipliers(50, &cfg, 8));
    }
    let unit = BootstrapConfig { draws: 1, multiplier: MultiplierLaw::TwoPointGolden, seed: 1 };
    let model = ParametricModel::zero();
    let x = DMatrix::from_column_slice(5, 1, &[0.1, 0.2, 0.3, 0.4, 0.5]);
    let omega = draw_multipliers(5, &unit, 0);
    let ones = SigmaEstimate::from_values(vec![1.0; 5]).unwrap();
    assert_eq!(bootstrap_sample(&[], &ones, &model, &x, &omega), omega);
}

#[test]
fn bootstrap_statistics_do_not_depend_on_thread_count() {
    let data = white_noise(150, 3);
    let model = ParametricModel::zero();
    let grid = SmootherGrid::for_bins(0.25, 2.0, 5).unwrap();
    let pipe = Pipeline::new(&data, &model, SmootherFamily::regressogram(), &grid, VarianceMethod::Rice, FitOptions::default()).unwrap();
    let outer = pipe.analyse(data.y()).unwrap();
    let variants = [TestVariant::Adaptive { c: 1.0 }, TestVariant::Max];
    let cfg = BootstrapConfig::new(99, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_statistics(&pipe, &outer, &variants, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

// Bootstrap consistency at moderate n. The coarsest bandwidth has to be small
// enough for the baseline form to be close to Gaussian: with four bins the
// form behaves like a centered chi-square with four degrees of freedom, whose
// Kolmogorov distance to the normal is already about 0.09. The penalty must
// exceed sqrt(2 ln J) by a margin, so c = 2; at c = 1 the selection step
// still shifts the law visibly at n = 1000.
#[test]
fn bootstrap_law_is_close_to_standard_normal() {
    let outer_reps = 20;
    let draws = 1000;
    let model = ParametricModel::zero();
    let grid = SmootherGrid::for_bins(1.0 / 64.0, 2.0, 3).unwrap();
    let variant = TestVariant::Adaptive { c: 2.0 };
    let mut close = 0;
    let mut distances = Vec::new();
    for rep in 0..outer_reps {
        let data = white_noise(1000, 1000 + rep);
        let pipe = Pipeline::new(&data, &model, SmootherFamily::regressogram(), &grid, VarianceMethod::Rice, FitOptions::default()).unwrap();
        let outer = pipe.analyse(data.y()).unwrap();
        let stats = bootstrap_statistics(&pipe, &outer, &[variant], &BootstrapConfig::new(draws, rep)).unwrap();
        let d = kolmogorov_to_normal(&stats[0]);
        distances.push(d);
        if d <= 0.08 {
            close += 1;
        }
    }
    eprintln!("Kolmogorov distances: {distances:.3?}");
    assert!(close * 10 >= outer_reps * 9, "{close}/{outer_reps} replications within 0.08");
}
