use crate::data::{group_classes_with, ClassGroups};
use crate::error::{Error, Result};
use crate::model::{crt_retrain, NpeModel};
use crate::numerics::Rng;

use super::config::{ExperimentConfig, Method};
use super::metrics::{evaluate, EvalMode, MetricsReport};
use super::report::{aggregate, to_csv, MetricsRow};
use super::train::{build_datasets, run_training, stream, Datasets, TrainOutcome};

/// Per-method reports for one trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodReports {
    pub reports: Vec<(Method, MetricsReport)>,
}

impl MethodReports {
    pub fn get(&self, method: Method) -> Option<&MetricsReport> {
        self.reports.iter().find(|(m, _)| *m == method).map(|(_, r)| r)
    }
}

pub fn groups_for(cfg: &ExperimentConfig, train_counts: &[usize]) -> ClassGroups {
    group_classes_with(train_counts, cfg.head_threshold, cfg.tail_threshold)
}

/// Evaluates every method of `cfg` on the test set, using `alpha` for NPE-LA.
pub fn evaluate_methods(
    cfg: &ExperimentConfig,
    data: &Datasets,
    model: &NpeModel,
    seed: u64,
    alpha: f64,
) -> Result<MethodReports> {
    let counts = data.train.counts();
    let groups = groups_for(cfg, counts);
    let digest = cfg.digest();
    let mut reports = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut report = match method {
            Method::Ce => evaluate(model, &data.test, &EvalMode::Ce, &groups)?,
            Method::La => evaluate(model, &data.test, &EvalMode::La(counts), &groups)?,
            Method::NpeLa => evaluate(model, &data.test, &EvalMode::NpeLa(alpha), &groups)?,
            Method::Crt => {
                let mut rng = Rng::with_stream(seed, stream::CRT);
                let head = crt_retrain(model, &data.train, &cfg.crt_config(), &mut rng)?;
                evaluate(model, &data.test, &EvalMode::CrtHead(&head), &groups)?
            }
        };
        report.seed = seed;
        report.config_digest.clone_from(&digest);
        reports.push((method, report));
    }
    Ok(MethodReports { reports })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub data: Datasets,
    pub outcome: TrainOutcome,
    pub reports: MethodReports,
}

/// Data, training and evaluation of `cfg` at its own seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let data = build_datasets(cfg, cfg.seed)?;
    let outcome = run_training(cfg, &data.train, cfg.seed)?;
    let reports = evaluate_methods(cfg, &data, &outcome.model, cfg.seed, cfg.alpha)?;
    Ok(RunResult { data, outcome, reports })
}

pub fn run_rows(cfg: &ExperimentConfig, reports: &MethodReports) -> Vec<MetricsRow> {
    reports
        .reports
        .iter()
        .map(|(m, r)| MetricsRow::from_report("train".into(), *m, cfg.n_pem, cfg.rho, cfg.alpha, r))
        .collect()
}

/// Sweep grid, crossed in the order n_pem, rho, alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxes {
    pub n_pem: Vec<usize>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl SweepAxes {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            n_pem: cfg.sweep_n_pem.clone(),
            rho: cfg.sweep_rho.clone(),
            alpha: cfg.sweep_alpha.clone(),
        }
    }

    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_pem {
            for &r in &self.rho {
                for &a in &self.alpha {
                    out.push((n, r, a));
                }
            }
        }
        out
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(xs: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    xs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, U>(xs: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    xs.iter().map(f).collect()
}

/// Runs the cross product of `axes` for seeds `cfg.seed .. cfg.seed + repeats`.
///
/// Rows come per cell and method: one `c{k}_s{seed}` row per seed, then
/// `c{k}_mean` and `c{k}_std`. Each (n_pem, rho, seed) model is trained
/// once and shared by the alpha values of that cell. Jobs may run in
/// parallel; the row order is fixed.
pub fn sweep(cfg: &ExperimentConfig, axes: &SweepAxes, repeats: usize) -> Result<Vec<MetricsRow>> {
    if axes.n_pem.is_empty() || axes.rho.is_empty() || axes.alpha.is_empty() {
        return Err(Error::Config("sweep axes must not be empty".into()));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..repeats as u64).map(|i| cfg.seed + i).collect();
    let mut jobs = Vec::new();
    for &n in &axes.n_pem {
        for &r in &axes.rho {
            for &s in &seeds {
                jobs.push((n, r, s));
            }
        }
    }
    let results: Vec<Result<Vec<(f64, MethodReports)>>> = par_map(&jobs, |&(n_pem, rho, seed)| {
        let job_cfg = ExperimentConfig { n_pem, rho, seed, ..cfg.clone() };
        let data = build_datasets(&job_cfg, seed)?;
        let model = run_training(&job_cfg, &data.train, seed)?.model;
        axes.alpha
            .iter()
            .map(|&a| Ok((a, evaluate_methods(&job_cfg, &data, &model, seed, a)?)))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let lookup = |n: usize, r: f64, s: u64, a: f64| -> &MethodReports {
        let j = jobs.iter().position(|&job| job == (n, r, s)).expect("job exists");
        &results[j].iter().find(|(alpha, _)| *alpha == a).expect("alpha evaluated").1
    };

    let mut rows = Vec::new();
    for (k, (n, r, a)) in axes.cells().into_iter().enumerate() {
        for &method in &cfg.methods {
            let per_seed: Vec<MetricsRow> = seeds
                .iter()
                .map(|&s| {
                    let report = lookup(n, r, s, a).get(method).expect("method evaluated");
                    MetricsRow::from_report(format!("c{k}_s{s}"), method, n, r, a, report)
                })
                .collect();
            let agg = aggregate(&format!("c{k}"), &per_seed);
            rows.extend(per_seed);
            rows.extend(agg);
        }
    }
    Ok(rows)
}

pub fn sweep_csv(cfg: &ExperimentConfig, axes: &SweepAxes, repeats: usize) -> Result<String> {
    Ok(to_csv(&sweep(cfg, axes, repeats)?))
}
