use npe_core::data::{
    exp_profile, group_classes_with, read_dataset, write_dataset, LabeledDataset, LongTailProfile,
};
use npe_core::harness::score;
use npe_core::model::{
    adjust_logits, classifier_logits, fold_linear, npe_estimate, one_way_logistic_loss, pem_outputs, Linear, PemBank,
    Sign,
};
use npe_core::numerics::{
    finite_diff_grad, lambert_w, max_relative_error, sigmoid, softmax, softmax_ce, Matrix, Rng, SgdState,
};
use npe_core::theory::{closed_form_eta, numeric_minimize, CollapseObjective};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_fn(rows, cols, |_, _| scale * rng.normal())
}

fn sign(t: bool) -> Sign {
    if t {
        Sign::Subtractive
    } else {
        Sign::Additive
    }
}

proptest! {
    #[test]
    fn sigmoid_symmetry(u in -800.0f64..800.0) {
        prop_assert!((sigmoid(u) + sigmoid(-u) - 1.0).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&sigmoid(u)));
    }

    #[test]
    fn lambert_residual(log_z in -20.0f64..690.0) {
        let z = log_z.exp();
        let w = lambert_w(z).unwrap();
        prop_assert!((w * w.exp() - z).abs() / z.max(1.0) <= 1e-12);
    }

    #[test]
    fn lambert_near_branch_point(t in 1e-12f64..1.0) {
        let z = -1.0 / std::f64::consts::E * (1.0 - t);
        let w = lambert_w(z).unwrap();
        prop_assert!(w >= -1.0 && w <= 0.0);
        prop_assert!((w * w.exp() - z).abs() <= 1e-12);
    }

    #[test]
    fn softmax_ce_matches_finite_differences(
        c in 2usize..8, seed in any::<u64>(), label_pick in any::<usize>()
    ) {
        let z = matrix(1, c, seed, 3.0);
        let label = label_pick % c;
        let (_, grad) = softmax_ce(z.row(0), label).unwrap();
        let numeric = finite_diff_grad(|m| softmax_ce(m.row(0), label).unwrap().0, &z, 1e-5);
        let analytic = Matrix::from_vec(1, c, grad).unwrap();
        prop_assert!(max_relative_error(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn softmax_is_a_distribution(c in 1usize..12, seed in any::<u64>(), scale in 0.0f64..300.0) {
        let p = softmax(matrix(1, c, seed, scale).row(0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn sgd_first_step_is_linear_in_lr_and_grad(lr in 1e-4f64..1.0, k in 0.1f64..10.0, seed in any::<u64>()) {
        let p0 = matrix(3, 2, seed, 1.0);
        let g = matrix(3, 2, seed ^ 1, 1.0);
        let step = |lr: f64, g: &Matrix| {
            let mut p = p0.clone();
            SgdState::new(lr, 0.9, 0.0).unwrap().step(&mut [&mut p], &[g]).unwrap();
            p.sub(&p0).unwrap()
        };
        let base = step(lr, &g);
        let by_lr = step(k * lr, &g);
        let by_grad = step(lr, &g.map(|v| k * v));
        prop_assert!(by_lr.max_abs_diff(&base.map(|v| k * v)).unwrap() <= 1e-12 * k.max(1.0));
        prop_assert!(by_grad.max_abs_diff(&base.map(|v| k * v)).unwrap() <= 1e-12 * k.max(1.0));
    }

    #[test]
    fn exp_profile_shape(n_max in 100usize..5000, c in 2usize..30, rho in 1.0f64..100.0) {
        let counts = exp_profile(&LongTailProfile::new(n_max, c, rho)).unwrap();
        prop_assert_eq!(counts.len(), c);
        prop_assert_eq!(counts[0], n_max);
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((counts[c - 1] as f64 - n_max as f64 / rho).abs() <= 0.5 + 1e-9);
    }

    #[test]
    fn grouping_is_a_partition(counts in prop::collection::vec(1usize..1000, 1..40), lo in 1usize..60, extra in 0usize..200) {
        let hi = lo + extra;
        let g = group_classes_with(&counts, hi, lo);
        let mut all: Vec<usize> = g.head.iter().chain(&g.medium).chain(&g.tail).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..counts.len()).collect::<Vec<_>>());
        prop_assert!(g.head.iter().all(|&c| counts[c] > hi));
        prop_assert!(g.tail.iter().all(|&c| counts[c] < lo));
        prop_assert!(g.medium.iter().all(|&c| counts[c] >= lo && counts[c] <= hi));
    }

    #[test]
    fn dataset_round_trip(n_per in 1usize..6, c in 2usize..5, d in 1usize..6, seed in any::<u64>()) {
        let labels: Vec<usize> = (0..n_per * c).map(|i| i % c).collect();
        let mut rng = Rng::new(seed);
        let x = Matrix::from_fn(labels.len(), d, |_, _| rng.normal() * 10f64.powi(rng.index(20) as i32 - 10));
        let ds = LabeledDataset::new(x, labels, c).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn folding_equals_two_pass(
        d in 1usize..10, c in 2usize..8, n_pem in 1usize..6, t in any::<bool>(),
        alpha in 0.0f64..3.0, seed in any::<u64>()
    ) {
        let mut rng = Rng::new(seed);
        let head = Linear { weight: matrix(c, d, seed, 1.0), bias: matrix(c, 1, seed ^ 2, 1.0) };
        let bank = PemBank::new(n_pem, d, c, sign(t), 1.0, &mut rng);
        let h = matrix(7, d, seed ^ 3, 2.0);
        let two = adjust_logits(&classifier_logits(&head, &h).unwrap(), &npe_estimate(&bank, &h).unwrap(), alpha).unwrap();
        let folded = classifier_logits(&fold_linear(&head, &bank, alpha).unwrap(), &h).unwrap();
        prop_assert!(folded.max_abs_diff(&two).unwrap() <= 1e-9);
    }

    #[test]
    fn shift_invariance(c in 2usize..10, seed in any::<u64>(), shift in -100.0f64..100.0) {
        let z = matrix(4, c, seed, 5.0);
        let eta = matrix(4, c, seed ^ 5, 1.0);
        let a = adjust_logits(&z, &eta, 1.0).unwrap();
        let b = adjust_logits(&z, &eta.map(|v| v + shift), 1.0).unwrap();
        for i in 0..4 {
            for (p, q) in softmax(a.row(i)).iter().zip(softmax(b.row(i))) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn resigning_keeps_the_estimate(d in 1usize..8, c in 2usize..6, n_pem in 1usize..5, t in any::<bool>(), seed in any::<u64>()) {
        let bank = PemBank::new(n_pem, d, c, sign(t), 0.7, &mut Rng::new(seed));
        let h = matrix(5, d, seed ^ 7, 1.0);
        prop_assert_eq!(npe_estimate(&bank, &h).unwrap(), npe_estimate(&bank.resigned(), &h).unwrap());
    }

    #[test]
    fn one_way_pressure_has_a_fixed_direction(
        d in 1usize..8, c in 2usize..6, t in any::<bool>(), seed in any::<u64>(),
        label_pick in any::<usize>(), lr in 1e-3f64..0.5
    ) {
        let mut bank = PemBank::new(2, d, c, sign(t), 0.5, &mut Rng::new(seed));
        let h = matrix(1, d, seed ^ 11, 1.0);
        let y = label_pick % c;
        let before = pem_outputs(&bank, &h).unwrap();
        let (_, grads) = one_way_logistic_loss(&bank, &h, &[y]).unwrap();
        for (m, g) in bank.maps_mut().iter_mut().zip(&grads.maps) {
            m.weight.axpy(-lr, &g.weight).unwrap();
            m.bias.axpy(-lr, &g.bias).unwrap();
        }
        let after = pem_outputs(&bank, &h).unwrap();
        for (b, a) in before.iter().zip(&after) {
            let moved = a[(0, y)] - b[(0, y)];
            if t { prop_assert!(moved < 0.0) } else { prop_assert!(moved > 0.0) }
            for j in (0..c).filter(|&j| j != y) {
                prop_assert_eq!(a[(0, j)], b[(0, j)]);
            }
        }
    }

    #[test]
    fn metric_sanity(
        labels in prop::collection::vec(0usize..6, 1..80), seed in any::<u64>(),
        counts in prop::collection::vec(1usize..300, 6)
    ) {
        let mut rng = Rng::new(seed);
        let pred: Vec<usize> = labels.iter().map(|&y| if rng.uniform() < 0.6 { y } else { rng.index(6) }).collect();
        let groups = group_classes_with(&counts, 100, 20);
        let r = score(&pred, &labels, 6, &groups).unwrap();
        let present: Vec<f64> = r.per_class_acc.iter().flatten().copied().collect();
        prop_assert!((r.balanced_acc - present.iter().sum::<f64>() / present.len() as f64).abs() <= 1e-12);
        for a in present.iter().chain([r.top1, r.balanced_acc].iter()) {
            prop_assert!((0.0..=1.0).contains(a));
        }
        for (members, acc) in [(&groups.head, r.head_acc), (&groups.medium, r.medium_acc), (&groups.tail, r.tail_acc)] {
            let n = |c: usize| labels.iter().filter(|&&y| y == c).count() as f64;
            let total: f64 = members.iter().map(|&c| n(c)).sum();
            if total == 0.0 {
                prop_assert_eq!(acc, None);
            } else {
                let weighted: f64 = members.iter().map(|&c| n(c) * r.per_class_acc[c].unwrap_or(0.0)).sum::<f64>() / total;
                prop_assert!((acc.unwrap() - weighted).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn collapsed_minimizer_is_monotone(n1 in 1.0f64..1e5, ratio in 1.0001f64..100.0, log_l in -6.0f64..2.0) {
        let lambda = 10f64.powf(log_l);
        let lo = CollapseObjective::new(n1, lambda).unwrap();
        let hi = CollapseObjective::new(n1 * ratio, lambda).unwrap();
        prop_assert!(closed_form_eta(&hi).unwrap() > closed_form_eta(&lo).unwrap());
        prop_assert!(numeric_minimize(&hi).unwrap() > numeric_minimize(&lo).unwrap());
        prop_assert!(lo.gradient(numeric_minimize(&lo).unwrap()).abs() < 1e-9 * n1.max(1.0));
    }
}
