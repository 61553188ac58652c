//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export returns a JSON document; the pure functions behind them are
//! public so they can be exercised natively.

use nalgebra::DMatrix;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use smoothspec::bootstrap::{bootstrap_statistics, critical_value, BootstrapConfig};
use smoothspec::engine::{penalty, Pipeline, TestVariant};
use smoothspec::harness::{generate_dgp, reference_grid, DgpSpec, ErrorFamily};
use smoothspec::{Dataset, FitOptions, ParametricModel, Result, SmootherFamily, VarianceMethod};

/// Draws one sample from the cosine design and runs the adaptive test on it.
pub fn simulate_and_test_json(
    n: usize,
    frequency: u32,
    amplitude: f64,
    errors: &str,
    c: f64,
    draws: usize,
    seed: u64,
) -> Result<Value> {
    let errors: ErrorFamily = errors.parse()?;
    let spec = DgpSpec {
        amplitude,
        frequency,
        ..DgpSpec::null(n, errors)
    };
    let (x, y) = generate_dgp(&spec, seed, 0);
    let data = Dataset::from_column(&x, y.clone(), -1.0, 1.0)?;
    let model = ParametricModel::zero();
    let grid = reference_grid();
    let variance = if errors == ErrorFamily::Heteroscedastic {
        VarianceMethod::Local { bandwidth: 1.0 / 16.0 }
    } else {
        VarianceMethod::Rice
    };
    let pipe = Pipeline::new(&data, &model, SmootherFamily::regressogram(), &grid, variance, FitOptions::default())?;
    let outer = pipe.analyse(data.y())?;
    let variant = TestVariant::Adaptive { c };
    let eval = variant.evaluate(&outer.panel, grid.refinements())?;
    let gamma = penalty(c, grid.refinements())?;
    let mut boot = bootstrap_statistics(&pipe, &outer, &[variant], &BootstrapConfig::new(draws.max(1), seed))?
        .swap_remove(0);
    boot.sort_by(f64::total_cmp);
    let threshold = critical_value(&boot, 0.05);
    let p = &outer.panel;
    let rows: Vec<Value> = grid
        .values()
        .iter()
        .enumerate()
        .map(|(k, h)| {
            json!({
                "h": h,
                "t": p.t[k],
                "v_diff": p.v_diff[k],
                "v_single": p.v_single[k],
                "objective": p.t[k] - gamma * p.v_diff[k],
            })
        })
        .collect();
    Ok(json!({
        "x": x,
        "y": y,
        "mean": x.iter().map(|&v| spec.mean(v)).collect::<Vec<_>>(),
        "grid": rows,
        "gamma": gamma,
        "selected": eval.selected,
        "statistic": eval.statistic,
        "threshold": threshold,
        "reject": eval.statistic >= threshold,
        "bootstrap": boot,
    }))
}

/// One weight matrix on `n` sorted uniform points of `[0,1]`.
pub fn weight_matrix_json(n: usize, family: &str, h: f64, seed: u64) -> Result<Value> {
    let family: SmootherFamily = family.parse()?;
    let mut x = generate_dgp(&DgpSpec::null(n, ErrorFamily::Gaussian), seed, 0).0;
    x.iter_mut().for_each(|v| *v = 0.5 * (*v + 1.0));
    x.sort_by(f64::total_cmp);
    let w = family.build(&DMatrix::from_column_slice(n, 1, &x), h)?;
    let entries: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| w.get(i, j)).collect();
    let (lo, hi) = entries.iter().fold((0.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(json!({
        "n": n,
        "x": x,
        "entries": entries,
        "min": lo,
        "max": hi,
        "rank": w.rank(),
        "spectral_radius": w.spectral_radius(),
        "frobenius_sq": w.frobenius_sq(),
    }))
}

/// Selected bandwidth and statistic as the penalty multiplier varies, for one sample.
pub fn penalty_path_json(
    n: usize,
    frequency: u32,
    amplitude: f64,
    seed: u64,
    multipliers: &[f64],
) -> Result<Value> {
    let spec = DgpSpec {
        amplitude,
        frequency,
        ..DgpSpec::null(n, ErrorFamily::Gaussian)
    };
    let (x, y) = generate_dgp(&spec, seed, 0);
    let data = Dataset::from_column(&x, y, -1.0, 1.0)?;
    let model = ParametricModel::zero();
    let grid = reference_grid();
    let pipe = Pipeline::new(&data, &model, SmootherFamily::regressogram(), &grid, VarianceMethod::Rice, FitOptions::default())?;
    let a = pipe.analyse(data.y())?;
    let path = multipliers
        .iter()
        .map(|&c| {
            let e = TestVariant::Adaptive { c }.evaluate(&a.panel, grid.refinements())?;
            Ok(json!({ "c": c, "selected": e.selected, "h": grid.values()[e.selected], "statistic": e.statistic }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "h": grid.values(),
        "t": a.panel.t,
        "v_diff": a.panel.v_diff,
        "v_baseline": a.panel.v_baseline(),
        "path": path,
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = simulateAndTest)]
pub fn simulate_and_test(
    n: usize,
    frequency: u32,
    amplitude: f64,
    errors: &str,
    c: f64,
    draws: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(simulate_and_test_json(n, frequency, amplitude, errors, c, draws, seed.into()))
}

#[wasm_bindgen(js_name = weightMatrix)]
pub fn weight_matrix(n: usize, family: &str, h: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_js(weight_matrix_json(n, family, h, seed.into()))
}

#[wasm_bindgen(js_name = penaltyPath)]
pub fn penalty_path(
    n: usize,
    frequency: u32,
    amplitude: f64,
    seed: u32,
    multipliers: Vec<f64>,
) -> std::result::Result<String, JsError> {
    to_js(penalty_path_json(n, frequency, amplitude, seed.into(), &multipliers))
}
