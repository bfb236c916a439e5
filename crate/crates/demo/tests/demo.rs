use npe_demo::{compare_rows, etf_recovery_rows, profile_counts, theory_curve_rows};

#[test]
fn theory_curve_layout() {
    let rows = theory_curve_rows(1.0, 500.0, 30).unwrap();
    assert_eq!(rows.len(), 120);
    assert_eq!(rows[0], 1.0);
    assert!((rows[116] - 500.0).abs() < 1e-9);
    // N_c = 1, λ = 1 is below e: no asymptotic value
    assert!(rows[3].is_nan());
    assert!(rows[119].is_finite());
    let closed: Vec<f64> = rows.chunks(4).map(|r| r[1]).collect();
    assert!(closed.windows(2).all(|w| w[1] > w[0]));
    assert!(theory_curve_rows(-1.0, 500.0, 5).is_err());
}

#[test]
fn etf_recovery_orders_classes() {
    let rows = etf_recovery_rows(100.0, 1e-2, 300).unwrap();
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[30], 1.0);
    assert!(rows[31] > 0.0);
}

#[test]
fn comparison_layout() {
    let rows = compare_rows(100.0, 4, 1.0, 4, 0).unwrap();
    assert_eq!(rows[0], 10.0);
    assert_eq!(rows.len(), 1 + 30 + 2);
    assert_eq!(&rows[1..11], profile_counts(500, 10, 100.0).unwrap().as_slice());
    assert!(rows[11..].iter().all(|a| (0.0..=1.0).contains(a)));
    assert!(compare_rows(0.5, 4, 1.0, 4, 0).is_err());
}
