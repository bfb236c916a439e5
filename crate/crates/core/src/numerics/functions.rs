//! Scalar activations, the softmax cross-entropy, and the principal branch of
//! the Lambert W function.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Logistic function `1 / (1 + e^{-u})`.
///
/// Evaluates `e^{-|u|}` only, which never overflows.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)`, stable for large `|u|`.
#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `log σ(u) = -softplus(-u)`.
#[inline]
pub fn log_sigmoid(u: f64) -> f64 {
    -softplus(-u)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Softmax of one row, computed after subtracting the row maximum.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Cross-entropy of one logit row against `label`.
///
/// Returns `(-log softmax(logits)[label], softmax(logits) - onehot(label))`.
pub fn softmax_ce(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Index {
            index: label,
            len: logits.len(),
        });
    }
    let top = super::argmax(logits);
    let max = logits[top];
    let shifted: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    // the max term is exactly 1; ln_1p keeps precision when the rest is tiny
    let rest: f64 = shifted
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .map(|(_, &e)| e)
        .sum();
    let total = 1.0 + rest;
    let loss = rest.ln_1p() - (logits[label] - max);
    let mut grad: Vec<f64> = shifted.iter().map(|&e| e / total).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

const LAMBERT_TOL: f64 = 1e-14;
const LAMBERT_MAX_ITERS: usize = 100;

/// Principal branch `W₀(z)` of the Lambert W function, `W(z)·e^{W(z)} = z`.
///
/// Halley iteration on `f(w) = w·eʷ − z`. Starting points: the branch-point
/// series `−1 + p − p²/3` with `p = √(2(ez + 1))` near `−1/e`, `z` itself for
/// small `|z|`, `log(1 + z)` in the middle, and `log z` past `e`.
/// Stops once the relative residual `|w·eʷ − z| / max(|z|, 1)` drops below
/// `1e-14` or a step changes `w` by no more than its rounding error.
pub fn lambert_w(z: f64) -> Result<f64> {
    const BRANCH: f64 = -1.0 / E;
    if z.is_nan() || z < BRANCH {
        return Err(Error::domain("lambert_w", format!("z = {z} < -1/e")));
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == BRANCH {
        return Ok(-1.0);
    }

    let mut w = if z < -0.25 {
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    } else if z.abs() < 0.25 {
        z
    } else if z < E {
        z.ln_1p()
    } else {
        z.ln()
    };

    let scale = z.abs().max(1.0);
    for _ in 0..LAMBERT_MAX_ITERS {
        let ew = w.exp();
        let f = w * ew - z;
        if (f / scale).abs() <= LAMBERT_TOL {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            // derivative vanishes exactly at the branch point
            return Ok(w);
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        if !next.is_finite() {
            break;
        }
        // stay on the principal branch
        let next = next.max(-1.0);
        // for large w the residual cannot drop below about w·ε relative
        if (next - w).abs() <= 2.0 * f64::EPSILON * w.abs() {
            return Ok(next);
        }
        w = next;
    }
    let f = w * w.exp() - z;
    if (f / scale).abs() <= LAMBERT_TOL {
        Ok(w)
    } else {
        Err(Error::Convergence {
            op: "lambert_w",
            iters: LAMBERT_MAX_ITERS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 − 1e-17 rounds to 1.0 in f64: saturation means reaching it
        assert!(sigmoid(40.0) >= 1.0 - 1e-17);
        // 1/(1+e^3), 40-digit oracle
        assert_relative_eq!(sigmoid(-3.0), 0.047_425_873_177_566_78, max_relative = 1e-15);
        assert!(sigmoid(-700.0) > 0.0 && sigmoid(700.0) == 1.0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert_relative_eq!(log_sigmoid(0.0), -std::f64::consts::LN_2);
        assert_relative_eq!(log_sigmoid(-800.0), -800.0);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
    }

    #[test]
    fn lambert_w_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert_relative_eq!(lambert_w(E).unwrap(), 1.0, max_relative = 1e-14);
        // Newton oracle on w·eʷ = 1 (omega constant)
        assert_relative_eq!(
            lambert_w(1.0).unwrap(),
            0.567_143_290_409_783_9,
            max_relative = 1e-14
        );
        assert_relative_eq!(lambert_w(100.0).unwrap(), 3.385_630_140_290_05, max_relative = 1e-13);
    }

    #[test]
    fn lambert_w_domain() {
        assert!(lambert_w(-0.5).is_err());
        assert!(lambert_w(f64::NAN).is_err());
        assert_eq!(lambert_w(-1.0 / E).unwrap(), -1.0);
    }

    #[test]
    fn lambert_w_residuals_on_grid() {
        let grid = [-1.0 / E + 1e-6, 0.0, 0.1, 1.0, E, 10.0, 1e3, 1e6, 1e12, 1e300];
        for &z in &grid {
            let w = lambert_w(z).unwrap();
            let residual = (w * w.exp() - z).abs() / z.abs().max(1.0);
            assert!(residual <= 1e-12, "z={z} w={w} residual={residual}");
            assert!(w >= -1.0);
        }
    }

    #[test]
    fn softmax_ce_values() {
        let (loss, grad) = softmax_ce(&[0.3, 0.3, 0.3, 0.3], 2).unwrap();
        assert_relative_eq!(loss, 4f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(grad.iter().sum::<f64>(), 0.0, epsilon = 1e-15);

        // log(1 + e^-20) and -e^-20/(1+e^-20), 40-digit oracle
        let (loss, grad) = softmax_ce(&[10.0, -10.0], 0).unwrap();
        assert_relative_eq!(loss, 2.061_153_620_314_380_7e-9, max_relative = 1e-9);
        assert_relative_eq!(grad[0], -2.061_153_618_190_203_6e-9, max_relative = 1e-9);

        assert!(matches!(
            softmax_ce(&[1.0, 2.0], 2),
            Err(Error::Index { index: 2, len: 2 })
        ));
    }
}
