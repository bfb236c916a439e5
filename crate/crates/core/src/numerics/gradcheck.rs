use super::Matrix;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Entries whose magnitude falls below this are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Central-difference gradient of a scalar function, one entry at a time.
pub fn finite_diff_grad(mut f: impl FnMut(&Matrix) -> f64, x: &Matrix, eps: f64) -> Matrix {
    assert!(eps > 0.0, "finite difference step must be positive");
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + eps;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - eps;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (up - down) / (2.0 * eps);
    }
    grad
}

/// `|a − b| / max(|a|, |b|, REL_ERROR_FLOOR)`
#[inline]
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Largest entrywise [`relative_error`]. Panics on mismatched shapes.
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_sum_is_ones() {
        let x = Matrix::from_fn(3, 2, |i, j| i as f64 - j as f64);
        let g = finite_diff_grad(|m| m.sum(), &x, DEFAULT_EPS);
        assert!(g.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn gradient_of_half_squared_norm_is_identity_map() {
        let x = Matrix::from_fn(2, 3, |i, j| 0.3 * i as f64 - 0.7 * j as f64 + 0.1);
        let g = finite_diff_grad(|m| 0.5 * m.squared_norm(), &x, DEFAULT_EPS);
        assert!(g.max_abs_diff(&x).unwrap() < 1e-8);
    }
}
