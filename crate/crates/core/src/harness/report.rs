//! Metrics CSV rows and their aggregation across seeds.

use std::fmt::Write as _;

use super::config::Method;
use super::metrics::MetricsReport;

pub const NA: &str = "NA";

/// One CSV line of metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub method: Method,
    pub n_pem: usize,
    pub rho: f64,
    pub alpha: f64,
    pub top1: f64,
    pub balanced_acc: f64,
    pub head_acc: Option<f64>,
    pub medium_acc: Option<f64>,
    pub tail_acc: Option<f64>,
    pub per_class_acc: Vec<Option<f64>>,
}

impl MetricsRow {
    pub fn from_report(run_id: String, method: Method, n_pem: usize, rho: f64, alpha: f64, r: &MetricsReport) -> Self {
        Self {
            run_id,
            seed: r.seed,
            method,
            n_pem,
            rho,
            alpha,
            top1: r.top1,
            balanced_acc: r.balanced_acc,
            head_acc: r.head_acc,
            medium_acc: r.medium_acc,
            tail_acc: r.tail_acc,
            per_class_acc: r.per_class_acc.clone(),
        }
    }
}

pub fn header(num_classes: usize) -> String {
    let mut h = String::from("run_id,seed,method,n_pem,rho,alpha,top1,balanced_acc,head_acc,medium_acc,tail_acc");
    for i in 0..num_classes {
        let _ = write!(h, ",class_{i}_acc");
    }
    h
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt)
}

pub fn format_row(row: &MetricsRow) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.run_id,
        row.seed,
        row.method.name(),
        row.n_pem,
        row.rho,
        row.alpha,
        fmt(row.top1),
        fmt(row.balanced_acc),
        fmt_opt(row.head_acc),
        fmt_opt(row.medium_acc),
        fmt_opt(row.tail_acc),
    );
    for a in &row.per_class_acc {
        s.push(',');
        s.push_str(&fmt_opt(*a));
    }
    s
}

/// Header plus rows, newline-terminated.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let c = rows.first().map_or(0, |r| r.per_class_acc.len());
    let mut out = header(c);
    out.push('\n');
    for r in rows {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}

/// Mean and sample standard deviation (`n − 1`; 0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn opt_mean_std(xs: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let vals: Option<Vec<f64>> = xs.iter().copied().collect();
    match vals {
        Some(v) if !v.is_empty() => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        _ => (None, None),
    }
}

/// `_mean` and `_std` rows over per-seed rows of one cell and method. The
/// seed column of both carries the first seed. A metric absent in any seed
/// is absent in the aggregate.
pub fn aggregate(prefix: &str, rows: &[MetricsRow]) -> [MetricsRow; 2] {
    let first = &rows[0];
    let col = |f: &dyn Fn(&MetricsRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    let ocol = |f: &dyn Fn(&MetricsRow) -> Option<f64>| opt_mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    let top1 = col(&|r| r.top1);
    let bal = col(&|r| r.balanced_acc);
    let head = ocol(&|r| r.head_acc);
    let medium = ocol(&|r| r.medium_acc);
    let tail = ocol(&|r| r.tail_acc);
    let classes: Vec<_> = (0..first.per_class_acc.len())
        .map(|c| ocol(&|r| r.per_class_acc[c]))
        .collect();
    let make = |suffix: &str, pick: fn((f64, f64)) -> f64, opick: fn((Option<f64>, Option<f64>)) -> Option<f64>| MetricsRow {
        run_id: format!("{prefix}_{suffix}"),
        seed: first.seed,
        method: first.method,
        n_pem: first.n_pem,
        rho: first.rho,
        alpha: first.alpha,
        top1: pick(top1),
        balanced_acc: pick(bal),
        head_acc: opick(head),
        medium_acc: opick(medium),
        tail_acc: opick(tail),
        per_class_acc: classes.iter().map(|&c| opick(c)).collect(),
    };
    [
        make("mean", |p| p.0, |p| p.0),
        make("std", |p| p.1, |p| p.1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, top1: f64, tail: Option<f64>) -> MetricsRow {
        MetricsRow {
            run_id: format!("c0_s{seed}"),
            seed,
            method: Method::NpeLa,
            n_pem: 4,
            rho: 100.0,
            alpha: 1.0,
            top1,
            balanced_acc: top1,
            head_acc: Some(1.0),
            medium_acc: None,
            tail_acc: tail,
            per_class_acc: vec![Some(top1), None],
        }
    }

    #[test]
    fn row_format() {
        let r = row(3, 0.5, Some(1.0 / 3.0));
        assert_eq!(
            format_row(&r),
            "c0_s3,3,npe-la,4,100,1,0.500000,0.500000,1.000000,NA,0.333333,0.500000,NA"
        );
        assert!(header(2).ends_with("tail_acc,class_0_acc,class_1_acc"));
    }

    #[test]
    fn aggregation_matches_recomputation() {
        let rows = [row(0, 0.5, Some(0.1)), row(1, 0.7, Some(0.3)), row(2, 0.9, None)];
        let [mean, std] = aggregate("c0", &rows);
        assert_eq!(mean.run_id, "c0_mean");
        assert!((mean.top1 - 0.7).abs() < 1e-12);
        assert!((std.top1 - 0.2).abs() < 1e-12);
        assert_eq!(mean.tail_acc, None);
        assert_eq!(mean.head_acc, Some(1.0));
        assert_eq!(std.head_acc, Some(0.0));
    }

    #[test]
    fn single_repeat_has_zero_std() {
        let [_, std] = aggregate("c1", &[row(5, 0.4, Some(0.2))]);
        assert_eq!((std.top1, std.tail_acc), (0.0, Some(0.0)));
    }
}
