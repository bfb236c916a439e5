use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{ClassifierHead, Linear, PemBank};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain("adjust_logits", format!("alpha = {alpha} must be finite and >= 0")));
    }
    Ok(())
}

/// NPE-LA: `z̃ = z − α·η`.
pub fn adjust_logits(z: &Matrix, eta: &Matrix, alpha: f64) -> Result<Matrix> {
    check_alpha(alpha)?;
    if z.shape() != eta.shape() {
        return Err(Error::shape(
            "adjust_logits",
            format!("{:?}", z.shape()),
            format!("{:?}", eta.shape()),
        ));
    }
    let mut out = z.clone();
    out.axpy(-alpha, eta)?;
    Ok(out)
}

/// Folds the bank into the head: `W′ = W − α·((−1)ᵗ/N_PEM)·Σ A_k`, and the
/// same for the bias, so one linear layer reproduces the adjusted logits.
pub fn fold_linear(head: &ClassifierHead, pems: &PemBank, alpha: f64) -> Result<ClassifierHead> {
    check_alpha(alpha)?;
    if pems.is_empty() {
        return Err(Error::EmptyBank);
    }
    let mut weight_sum = Matrix::zeros(head.weight.rows(), head.weight.cols());
    let mut bias_sum = Matrix::zeros(head.bias.rows(), 1);
    for m in pems.maps() {
        weight_sum.axpy(1.0, &m.weight)?;
        bias_sum.axpy(1.0, &m.bias)?;
    }
    let scale = -alpha * pems.sign().factor() / pems.len() as f64;
    let mut folded = Linear {
        weight: head.weight.clone(),
        bias: head.bias.clone(),
    };
    folded.weight.axpy(scale, &weight_sum)?;
    folded.bias.axpy(scale, &bias_sum)?;
    Ok(folded)
}

/// Post-hoc logit adjustment with empirical priors: `z̃ = z − log p`,
/// `p_c = N_c / Σ_j N_j`.
pub fn classical_la(z: &Matrix, counts: &[usize]) -> Result<Matrix> {
    if counts.len() != z.cols() {
        return Err(Error::shape("classical_la", z.cols(), counts.len()));
    }
    if counts.contains(&0) {
        return Err(Error::domain("classical_la", "zero class count"));
    }
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let log_prior: Vec<f64> = counts.iter().map(|&n| (n as f64 / total).ln()).collect();
    let mut out = z.clone();
    for i in 0..out.rows() {
        for (v, lp) in out.row_mut(i).iter_mut().zip(&log_prior) {
            *v -= lp;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classifier_logits, npe_estimate, Sign};
    use crate::numerics::{softmax, Rng};

    #[test]
    fn zero_estimate_is_identity() {
        let z = Matrix::from_fn(3, 4, |i, j| (i as f64) * 0.3 - j as f64);
        assert_eq!(adjust_logits(&z, &Matrix::zeros(3, 4), 1.0).unwrap(), z);
    }

    #[test]
    fn constant_estimate_keeps_softmax() {
        let z = Matrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 * 0.7);
        let adj = adjust_logits(&z, &Matrix::filled(2, 3, 4.2), 1.0).unwrap();
        for i in 0..2 {
            for (a, b) in softmax(z.row(i)).iter().zip(softmax(adj.row(i))) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_alpha_and_shapes() {
        let z = Matrix::zeros(2, 2);
        assert!(adjust_logits(&z, &z, -1.0).is_err());
        assert!(adjust_logits(&z, &Matrix::zeros(2, 3), 1.0).is_err());
    }

    #[test]
    fn classical_la_values() {
        let z = Matrix::zeros(1, 2);
        let adj = classical_la(&z, &[90, 10]).unwrap();
        assert!((adj[(0, 0)] - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!((adj[(0, 1)] - 2.302_585_092_994_046).abs() < 1e-12);
        assert!(classical_la(&z, &[1, 0]).is_err());
    }

    #[test]
    fn uniform_counts_keep_argmax() {
        let z = Matrix::from_fn(4, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let adj = classical_la(&z, &[8, 8, 8]).unwrap();
        assert_eq!(adj.argmax_rows(), z.argmax_rows());
    }

    #[test]
    fn folding_matches_two_pass() {
        let mut rng = Rng::new(21);
        let head = Linear {
            weight: Matrix::from_fn(4, 3, |_, _| rng.normal()),
            bias: Matrix::from_fn(4, 1, |_, _| rng.normal()),
        };
        let bank = PemBank::new(3, 3, 4, Sign::Subtractive, 0.5, &mut rng);
        let h = Matrix::from_fn(6, 3, |_, _| rng.normal());
        let two_pass = adjust_logits(
            &classifier_logits(&head, &h).unwrap(),
            &npe_estimate(&bank, &h).unwrap(),
            0.7,
        )
        .unwrap();
        let folded = classifier_logits(&fold_linear(&head, &bank, 0.7).unwrap(), &h).unwrap();
        assert!(folded.max_abs_diff(&two_pass).unwrap() <= 1e-9);
    }

    #[test]
    fn folding_degenerate_cases() {
        let mut rng = Rng::new(3);
        let head = Linear::normal(3, 2, 1.0, &mut rng);
        let zero_bank = PemBank::from_maps(vec![Linear::zeros(3, 2)], Sign::Subtractive).unwrap();
        assert_eq!(fold_linear(&head, &zero_bank, 1.0).unwrap(), head);
        let bank = PemBank::new(2, 3, 2, Sign::Additive, 0.1, &mut rng);
        assert_eq!(fold_linear(&head, &bank, 0.0).unwrap(), head);
        assert!(fold_linear(&head, &PemBank::empty(Sign::Additive), 1.0).is_err());
    }
}
