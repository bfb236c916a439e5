//! Browser bindings for three small interactive views. Each operation has a
//! plain Rust form returning a flat `Vec<f64>` and a `wasm_bindgen` wrapper.

use npe_core::data::{exp_profile, LongTailProfile};
use npe_core::harness::{
    build_datasets, class_mean_eta, evaluate, groups_for, parse_config_str, run_training, EvalMode, Preset,
};
use npe_core::theory::{asymptotic_eta, closed_form_eta, numeric_minimize, validate_trained_pem, CollapseObjective};
use npe_core::Result;
use wasm_bindgen::prelude::*;

/// `points` rows of `[n_c, eta_closed, eta_numeric, eta_asymptotic]` on a
/// log grid of `n_c` in `[1, n_max]`. The asymptotic entry is NaN where
/// `n_c/λ ≤ e`.
pub fn theory_curve_rows(lambda: f64, n_max: f64, points: usize) -> Result<Vec<f64>> {
    let points = points.max(2);
    let top = n_max.max(1.0).ln();
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let n = (top * i as f64 / (points - 1) as f64).exp();
        let obj = CollapseObjective::new(n, lambda)?;
        out.extend([
            n,
            closed_form_eta(&obj)?,
            numeric_minimize(&obj)?,
            asymptotic_eta(&obj).unwrap_or(f64::NAN),
        ]);
    }
    Ok(out)
}

/// Trains one module on collapsed features with the given imbalance.
/// Layout: `C` rows of `[count, eta, log count]`, then spearman (NaN when
/// degenerate) and slope.
pub fn etf_recovery_rows(rho: f64, pem_weight_decay: f64, epochs: usize) -> Result<Vec<f64>> {
    let mut cfg = parse_config_str(
        Preset::Desk,
        "dataset = etf\ninput_dim = 16\nfeature_dim = 16\nhidden =\nn_pem = 1\nbatch_size = 100000\nmilestones =\nlr = 0.5\n",
    )?;
    cfg.rho = rho;
    cfg.pem_weight_decay = pem_weight_decay;
    cfg.epochs = epochs;
    cfg.validate()?;
    let data = build_datasets(&cfg, cfg.seed)?;
    let model = run_training(&cfg, &data.train, cfg.seed)?.model;
    let eta = class_mean_eta(&model, &data.train)?;
    let counts = data.train.counts();
    let mut out = Vec::with_capacity(3 * counts.len() + 2);
    for (&n, e) in counts.iter().zip(&eta) {
        out.extend([n as f64, *e, (n as f64).ln()]);
    }
    let v = validate_trained_pem(&eta, counts, pem_weight_decay)?;
    out.push(v.spearman.unwrap_or(f64::NAN));
    out.push(v.slope);
    Ok(out)
}

/// Desk benchmark at reduced size. Layout: `C`, then `C` training counts,
/// `C` CE per-class accuracies, `C` NPE-LA per-class accuracies, then CE and
/// NPE-LA balanced accuracy.
pub fn compare_rows(rho: f64, n_pem: usize, alpha: f64, epochs: usize, seed: u64) -> Result<Vec<f64>> {
    let mut cfg = Preset::Desk.config();
    cfg.rho = rho;
    cfg.n_pem = n_pem;
    cfg.alpha = alpha;
    cfg.epochs = epochs;
    cfg.milestones = vec![epochs * 3 / 4, epochs * 11 / 12]
        .into_iter()
        .filter(|&m| m > 0 && m < epochs)
        .collect();
    cfg.milestones.dedup();
    cfg.test_per_class = 100;
    cfg.seed = seed;
    cfg.validate()?;
    let data = build_datasets(&cfg, seed)?;
    let model = run_training(&cfg, &data.train, seed)?.model;
    let groups = groups_for(&cfg, data.train.counts());
    let ce = evaluate(&model, &data.test, &EvalMode::Ce, &groups)?;
    let npe = evaluate(&model, &data.test, &EvalMode::NpeLa(alpha), &groups)?;
    let c = data.train.num_classes();
    let mut out = vec![c as f64];
    out.extend(data.train.counts().iter().map(|&n| n as f64));
    out.extend(ce.per_class_acc.iter().map(|a| a.unwrap_or(f64::NAN)));
    out.extend(npe.per_class_acc.iter().map(|a| a.unwrap_or(f64::NAN)));
    out.push(ce.balanced_acc);
    out.push(npe.balanced_acc);
    Ok(out)
}

/// Class counts of the long-tail profile used by the views.
pub fn profile_counts(n_max: usize, num_classes: usize, rho: f64) -> Result<Vec<f64>> {
    Ok(exp_profile(&LongTailProfile::new(n_max, num_classes, rho))?
        .into_iter()
        .map(|n| n as f64)
        .collect())
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn theory_curve(lambda: f64, n_max: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(theory_curve_rows(lambda, n_max, points))
}

#[wasm_bindgen]
pub fn etf_recovery(rho: f64, pem_weight_decay: f64, epochs: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(etf_recovery_rows(rho, pem_weight_decay, epochs))
}

#[wasm_bindgen]
pub fn compare_methods(
    rho: f64,
    n_pem: usize,
    alpha: f64,
    epochs: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    js(compare_rows(rho, n_pem, alpha, epochs, u64::from(seed)))
}
