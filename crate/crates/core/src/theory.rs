//! The per-class collapsed objective of a single prior estimation module.
//!
//! When every sample of class `c` maps to the same module score `η`, the
//! one-way loss with a quadratic penalty reduces to
//!
//! ```text
//! J_c(η) = −N_c · log σ(η) + (λ/2) · η²
//! ```
//!
//! which is strictly convex for `λ > 0`. Replacing `σ(−η)` by its tail
//! `e^{−η}` in the stationarity condition gives `η·e^η = N_c/λ`, i.e. the
//! closed form `η* ≈ W(N_c/λ)`, and for large `N_c/λ` the expansion
//! `log(N_c/λ) − log log(N_c/λ)`.
//!
//! [`numeric_minimize`] solves `J_c' = 0` for the logistic objective without
//! touching the Lambert W code, so the two can be compared. The closed form is
//! exact for the tail surrogate `N_c·e^{−η} + (λ/2)·η²`
//! ([`numeric_minimize_saturated`]) and approaches the logistic minimizer as
//! `N_c/λ` grows.

use crate::error::{Error, Result};
use crate::numerics::{lambert_w, sigmoid, softplus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseObjective {
    pub n_c: f64,
    pub lambda: f64,
}

impl CollapseObjective {
    pub fn new(n_c: f64, lambda: f64) -> Result<Self> {
        if !(n_c > 0.0) || !n_c.is_finite() {
            return Err(Error::domain("CollapseObjective", format!("N_c = {n_c} must be > 0")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain("CollapseObjective", format!("lambda = {lambda} must be > 0")));
        }
        Ok(Self { n_c, lambda })
    }

    /// `N_c / λ`
    pub fn ratio(&self) -> f64 {
        self.n_c / self.lambda
    }

    /// `J_c(η)`
    pub fn value(&self, eta: f64) -> f64 {
        self.n_c * softplus(-eta) + 0.5 * self.lambda * eta * eta
    }

    /// `J_c'(η) = −N_c·σ(−η) + λ·η`
    pub fn gradient(&self, eta: f64) -> f64 {
        -self.n_c * sigmoid(-eta) + self.lambda * eta
    }

    /// `J_c''(η) = N_c·σ(η)·σ(−η) + λ`
    pub fn curvature(&self, eta: f64) -> f64 {
        self.n_c * sigmoid(eta) * sigmoid(-eta) + self.lambda
    }

    /// Derivative of the tail surrogate `N_c·e^{−η} + (λ/2)·η²`.
    pub fn saturated_gradient(&self, eta: f64) -> f64 {
        -self.n_c * (-eta).exp() + self.lambda * eta
    }

    pub fn saturated_curvature(&self, eta: f64) -> f64 {
        self.n_c * (-eta).exp() + self.lambda
    }
}

pub fn objective_value(obj: &CollapseObjective, eta: f64) -> f64 {
    obj.value(eta)
}

/// `W(N_c / λ)`
pub fn closed_form_eta(obj: &CollapseObjective) -> Result<f64> {
    lambert_w(obj.ratio())
}

const NEWTON_MAX_ITERS: usize = 200;
const GRADIENT_TOL: f64 = 1e-12;

/// Root of an increasing function on a bracket, Newton steps with bisection
/// whenever a step leaves the bracket.
fn safeguarded_newton(
    op: &'static str,
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITERS {
        let gx = g(x);
        if gx.abs() < GRADIENT_TOL {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            // bracket collapsed to adjacent floats
            return Ok(x);
        }
        let step = x - gx / dg(x);
        x = if step > lo && step < hi && step.is_finite() {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence {
        op,
        iters: NEWTON_MAX_ITERS,
    })
}

/// Upper end of the search bracket: `log(N_c/λ) + 2` when that is usable,
/// grown until the gradient is positive.
fn upper_bracket(obj: &CollapseObjective, g: impl Fn(f64) -> f64) -> f64 {
    let z = obj.ratio();
    let mut hi = (z.ln() + 2.0).max(0.5 * z).max(1e-300);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    hi
}

/// Minimizes `J_c` directly by safeguarded Newton on `J_c'`. The minimizer is
/// positive because `J_c'(0) = −N_c/2 < 0`.
pub fn numeric_minimize(obj: &CollapseObjective) -> Result<f64> {
    let hi = upper_bracket(obj, |e| obj.gradient(e));
    safeguarded_newton(
        "numeric_minimize",
        |e| obj.gradient(e),
        |e| obj.curvature(e),
        0.0,
        hi,
    )
}

/// Minimizer of the tail surrogate `N_c·e^{−η} + (λ/2)·η²`, whose
/// stationarity condition is exactly `η·e^η = N_c/λ`.
pub fn numeric_minimize_saturated(obj: &CollapseObjective) -> Result<f64> {
    let hi = upper_bracket(obj, |e| obj.saturated_gradient(e));
    safeguarded_newton(
        "numeric_minimize_saturated",
        |e| obj.saturated_gradient(e),
        |e| obj.saturated_curvature(e),
        0.0,
        hi,
    )
}

/// `log z − log log z` with `z = N_c/λ`; defined for `z > e`.
pub fn asymptotic_eta(obj: &CollapseObjective) -> Result<f64> {
    let z = obj.ratio();
    if !(z > std::f64::consts::E) {
        return Err(Error::domain(
            "asymptotic_eta",
            format!("N_c/lambda = {z} must exceed e"),
        ));
    }
    let l = z.ln();
    Ok(l - l.ln())
}

/// `log(N_c/λ) − log log(N_c/λ) = log p_c + C₀ + ε_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorDecomposition {
    /// `log(N_c / N)`
    pub log_prior: f64,
    /// `log N − log λ`, shared by every class
    pub c0: f64,
    /// `−log log(N_c / λ)`
    pub eps_c: f64,
}

impl PriorDecomposition {
    pub fn sum(&self) -> f64 {
        self.log_prior + self.c0 + self.eps_c
    }
}

pub fn decompose(n_c: f64, n_total: f64, lambda: f64) -> Result<PriorDecomposition> {
    if !(n_total >= n_c) {
        return Err(Error::domain(
            "decompose",
            format!("total {n_total} smaller than class count {n_c}"),
        ));
    }
    let obj = CollapseObjective::new(n_c, lambda)?;
    let z = obj.ratio();
    if !(z > std::f64::consts::E) {
        return Err(Error::domain("decompose", format!("N_c/lambda = {z} must exceed e")));
    }
    Ok(PriorDecomposition {
        log_prior: (n_c / n_total).ln(),
        c0: -lambda.ln() + n_total.ln(),
        eps_c: -z.ln().ln(),
    })
}

/// Agreement between learned per-class estimates and the collapse analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct PemValidation {
    /// Rank correlation between `η_c` and `log N_c`; `None` when the
    /// estimates are constant.
    pub spearman: Option<f64>,
    /// `max_c |η_c − W(N_c/λ)|`
    pub max_deviation: f64,
    /// Least-squares slope of `η_c` against `log N_c`.
    pub slope: f64,
    pub intercept: f64,
    pub closed_form: Vec<f64>,
}

impl PemValidation {
    pub fn is_degenerate(&self) -> bool {
        self.spearman.is_none()
    }
}

pub fn validate_trained_pem(trained_eta: &[f64], counts: &[usize], lambda: f64) -> Result<PemValidation> {
    if trained_eta.len() != counts.len() {
        return Err(Error::shape("validate_trained_pem", counts.len(), trained_eta.len()));
    }
    let mut distinct = counts.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::domain(
            "validate_trained_pem",
            "need at least two distinct class counts",
        ));
    }
    let log_counts: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let closed_form = counts
        .iter()
        .map(|&n| closed_form_eta(&CollapseObjective::new(n as f64, lambda)?))
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = trained_eta
        .iter()
        .zip(&closed_form)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (slope, intercept) = linear_fit(&log_counts, trained_eta);
    Ok(PemValidation {
        spearman: spearman(trained_eta, &log_counts),
        max_deviation,
        slope,
        intercept,
        closed_form,
    })
}

/// Ranks starting at 1, ties share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, LN_2};

    fn obj(n: f64, l: f64) -> CollapseObjective {
        CollapseObjective::new(n, l).unwrap()
    }

    #[test]
    fn objective_values() {
        assert_relative_eq!(obj(7.0, 0.3).value(0.0), 7.0 * LN_2, max_relative = 1e-15);
        // 10·log(1 + e^{-1}) + 1/2, 40-digit oracle
        assert_relative_eq!(obj(10.0, 1.0).value(1.0), 3.632_616_875_182_228, max_relative = 1e-14);
        // large λ: the quadratic term dominates away from 0
        let o = obj(1.0, 1e8);
        assert!(o.value(1.0) > 0.99 * 0.5e8);
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(
            closed_form_eta(&obj(3.0, 3.0)).unwrap(),
            0.567_143_290_409_783_9,
            max_relative = 1e-14
        );
        assert_relative_eq!(closed_form_eta(&obj(E * 2.0, 2.0)).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn closed_form_is_stationary_for_the_tail_surrogate() {
        for z in [0.1, 1.0, 10.0, 1e3, 1e6] {
            let o = obj(z, 1.0);
            let w = closed_form_eta(&o).unwrap();
            assert!(o.saturated_gradient(w).abs() <= 1e-10 * z.max(1.0), "z={z}");
            let s = numeric_minimize_saturated(&o).unwrap();
            assert!((s - w).abs() <= 1e-9, "z={z}: {s} vs {w}");
        }
    }

    #[test]
    fn logistic_minimizer_is_stationary_and_below_closed_form() {
        // logistic minimizer solves η(1 + e^η) = z; 40-digit oracle values
        let cases = [
            (0.1, 0.048_780_723_676_820_54),
            (1.0, 0.401_058_137_541_547_04),
            (10.0, 1.633_506_170_155_846_4),
            (1e3, 5.245_185_651_860_719),
            (1e6, 11.383_347_621_978_876),
        ];
        for (z, want) in cases {
            let o = obj(z, 1.0);
            let eta = numeric_minimize(&o).unwrap();
            assert!(o.gradient(eta).abs() < 1e-12 * z.max(1.0));
            assert_relative_eq!(eta, want, max_relative = 1e-12);
            assert!(eta < closed_form_eta(&o).unwrap());
        }
    }

    #[test]
    fn minimizer_tends_to_zero_for_tiny_ratio() {
        let eta = numeric_minimize(&obj(1.0, 1e9)).unwrap();
        assert!(eta > 0.0 && eta < 1e-9);
    }

    #[test]
    fn strict_convexity_around_minimizer() {
        for z in [0.1, 1.0, 1e3] {
            let o = obj(z, 1.0);
            let eta = numeric_minimize(&o).unwrap();
            assert!(o.value(eta + 0.1) > o.value(eta));
            assert!(o.value(eta - 0.1) > o.value(eta));
        }
    }

    #[test]
    fn asymptotic_values() {
        // log 100 − log log 100, 40-digit oracle
        assert_relative_eq!(asymptotic_eta(&obj(100.0, 1.0)).unwrap(), 3.077_990_560_180_19, max_relative = 1e-14);
        assert!(asymptotic_eta(&obj(E, 1.0)).is_err());
        let gap = |z: f64| {
            let o = obj(z, 1.0);
            (closed_form_eta(&o).unwrap() - asymptotic_eta(&o).unwrap()).abs()
        };
        assert!(gap(1e6) < gap(1e2));
    }

    #[test]
    fn decomposition() {
        let d = decompose(500.0, 1000.0, 1.0).unwrap();
        assert_relative_eq!(d.c0, 1000f64.ln(), max_relative = 1e-15);
        let asym = asymptotic_eta(&obj(500.0, 1.0)).unwrap();
        assert!((d.sum() - asym).abs() < 1e-12);
        assert!(decompose(2.0, 10.0, 1.0).is_err());
        assert!(decompose(20.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_gap_between_head_and_tail() {
        // W(500) − W(5) vs log(100): the difference is log(100) minus the
        // change in log W, i.e. the residual shrinks it
        let w500 = closed_form_eta(&obj(500.0, 1.0)).unwrap();
        let w5 = closed_form_eta(&obj(5.0, 1.0)).unwrap();
        let diff = w500 - w5;
        assert_relative_eq!(diff, 100f64.ln() - (w500 / w5).ln(), max_relative = 1e-12);
        assert!(diff < 100f64.ln());
    }

    #[test]
    fn validation_self_test() {
        let counts = [500, 120, 30, 5];
        let eta: Vec<f64> = counts
            .iter()
            .map(|&n| closed_form_eta(&obj(n as f64, 0.5)).unwrap())
            .collect();
        let v = validate_trained_pem(&eta, &counts, 0.5).unwrap();
        assert_eq!(v.spearman, Some(1.0));
        assert_eq!(v.max_deviation, 0.0);
        assert!(v.slope > 0.0);

        let flat = validate_trained_pem(&[1.0; 4], &counts, 0.5).unwrap();
        assert!(flat.is_degenerate());
        assert!(validate_trained_pem(&[1.0, 2.0], &[5, 5], 0.5).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    }
}
