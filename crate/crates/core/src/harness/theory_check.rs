use std::fmt::Write as _;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{npe_estimate, NpeModel};
use crate::theory::{
    asymptotic_eta, closed_form_eta, numeric_minimize, validate_trained_pem, CollapseObjective, PemValidation,
};

pub const THEORY_HEADER: &str = "n_c,lambda,eta_closed,eta_numeric,eta_asymptotic,log_prior,c0,eps_c";

/// One `(N_c, λ)` evaluation. Asymptotic terms are absent when `N_c/λ ≤ e`.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryRow {
    pub n_c: usize,
    pub lambda: f64,
    pub eta_closed: f64,
    pub eta_numeric: f64,
    pub eta_asymptotic: Option<f64>,
    pub log_prior: f64,
    pub c0: f64,
    pub eps_c: Option<f64>,
}

/// Rows for every count and λ, counts outermost. The prior uses the total
/// of `counts`.
pub fn theory_rows(counts: &[usize], lambdas: &[f64]) -> Result<Vec<TheoryRow>> {
    if counts.is_empty() || lambdas.is_empty() {
        return Err(Error::Config("theory-check needs counts and lambdas".into()));
    }
    if counts.contains(&0) {
        return Err(Error::domain("theory_check", "counts must be >= 1"));
    }
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let mut rows = Vec::with_capacity(counts.len() * lambdas.len());
    for &n in counts {
        for &lambda in lambdas {
            let obj = CollapseObjective::new(n as f64, lambda)?;
            let asym = asymptotic_eta(&obj).ok();
            rows.push(TheoryRow {
                n_c: n,
                lambda,
                eta_closed: closed_form_eta(&obj)?,
                eta_numeric: numeric_minimize(&obj)?,
                eta_asymptotic: asym,
                log_prior: (n as f64 / total).ln(),
                c0: total.ln() - lambda.ln(),
                eps_c: asym.map(|_| -obj.ratio().ln().ln()),
            });
        }
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v:.12}"))
}

pub fn theory_csv(rows: &[TheoryRow]) -> String {
    let mut out = format!("{THEORY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.12},{:.12},{},{:.12},{:.12},{}",
            r.n_c,
            r.lambda,
            r.eta_closed,
            r.eta_numeric,
            opt(r.eta_asymptotic),
            r.log_prior,
            r.c0,
            opt(r.eps_c)
        );
    }
    out
}

/// `#`-prefixed lines describing a validation, appended to the theory CSV.
pub fn validation_lines(v: &PemValidation, lambda: f64) -> String {
    let spearman = v.spearman.map_or_else(|| "NA".into(), |s| format!("{s:.6}"));
    format!(
        "# trained lambda={lambda} spearman={spearman} slope={:.6} intercept={:.6} max_deviation={:.6} degenerate={}\n",
        v.slope,
        v.intercept,
        v.max_deviation,
        v.is_degenerate()
    )
}

/// Per-class estimate `η_c`: coordinate `c` of the NPE estimate averaged over
/// the samples of class `c`.
pub fn class_mean_eta(model: &NpeModel, dataset: &LabeledDataset) -> Result<Vec<f64>> {
    let h = model.features(dataset.features())?;
    let eta = npe_estimate(&model.pems, &h)?;
    let mut sums = vec![0.0; dataset.num_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        sums[y] += eta[(i, y)];
    }
    Ok(sums
        .iter()
        .zip(dataset.counts())
        .map(|(s, &n)| s / n as f64)
        .collect())
}

pub const ETA_HEADER: &str = "count,eta";

pub fn format_trained_eta(counts: &[usize], eta: &[f64]) -> String {
    let mut out = format!("{ETA_HEADER}\n");
    for (n, e) in counts.iter().zip(eta) {
        let _ = writeln!(out, "{n},{e:.16e}");
    }
    out
}

/// Reads a `count,eta` file.
pub fn read_trained_eta(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let fmt_err = |line: usize, msg: &str| Error::Format {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ETA_HEADER => {}
        _ => return Err(fmt_err(1, "expected header 'count,eta'")),
    }
    let (mut counts, mut eta) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (n, e) = line.split_once(',').ok_or_else(|| fmt_err(i + 1, "expected 'count,eta'"))?;
        counts.push(n.trim().parse().map_err(|_| fmt_err(i + 1, "bad count"))?);
        eta.push(e.trim().parse().map_err(|_| fmt_err(i + 1, "bad eta"))?);
    }
    if counts.is_empty() {
        return Err(fmt_err(2, "no rows"));
    }
    Ok((counts, eta))
}

/// Theory table, plus the validation of `trained` against the first λ.
pub fn theory_check(counts: &[usize], lambdas: &[f64], trained: Option<(&[usize], &[f64])>) -> Result<String> {
    let mut out = theory_csv(&theory_rows(counts, lambdas)?);
    if let Some((tc, te)) = trained {
        let v = validate_trained_pem(te, tc, lambdas[0])?;
        out.push_str(&validation_lines(&v, lambdas[0]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{exp_profile, LongTailProfile};

    #[test]
    fn closed_form_column_is_monotone() {
        let counts = exp_profile(&LongTailProfile::new(500, 10, 100.0)).unwrap();
        let rows = theory_rows(&counts, &[1.0]).unwrap();
        assert!(rows.windows(2).all(|w| w[0].eta_closed > w[1].eta_closed));
    }

    #[test]
    fn eta_decreases_in_lambda() {
        let lambdas = [1e-3, 1e-2, 1e-1, 1.0];
        let rows = theory_rows(&[500, 5], &lambdas).unwrap();
        for chunk in rows.chunks(lambdas.len()) {
            assert!(chunk.windows(2).all(|w| w[0].eta_closed > w[1].eta_closed));
            assert!(chunk.windows(2).all(|w| w[0].eta_numeric > w[1].eta_numeric));
        }
    }

    #[test]
    fn small_ratio_renders_na() {
        let csv = theory_check(&[2, 500], &[1.0], None).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], THEORY_HEADER);
        assert!(lines[1].starts_with("2,1,") && lines[1].ends_with(",NA"));
        assert!(!lines[2].contains("NA"));
    }

    #[test]
    fn self_test_has_zero_deviation() {
        let counts = [500, 100, 20];
        let eta: Vec<f64> = theory_rows(&counts, &[0.5]).unwrap().iter().map(|r| r.eta_closed).collect();
        let csv = theory_check(&counts, &[0.5], Some((&counts, &eta))).unwrap();
        assert!(csv.contains("spearman=1.000000"));
        assert!(csv.contains("max_deviation=0.000000"));
    }

    #[test]
    fn eta_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eta.csv");
        std::fs::write(&path, format_trained_eta(&[10, 3], &[1.25, -0.5])).unwrap();
        assert_eq!(read_trained_eta(&path).unwrap(), (vec![10, 3], vec![1.25, -0.5]));
        std::fs::write(&path, "n,eta\n1,2\n").unwrap();
        assert!(read_trained_eta(&path).is_err());
    }
}
