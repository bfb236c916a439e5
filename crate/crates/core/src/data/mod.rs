//! Labeled datasets, long-tail count profiles, and head/medium/tail grouping.

mod io;
mod synthetic;

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use synthetic::{gaussian_clusters, simplex_etf_features, simplex_etf_vectors, GaussianMixture};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Feature rows with integer labels and the per-class counts `N_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    counts: Vec<usize>,
}

impl LabeledDataset {
    /// Validates labels and recomputes the class counts. Every class must
    /// occur at least once.
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Dataset("dataset has no samples".into()));
        }
        let counts = count_labels(&labels, num_classes)?;
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Dataset(format!("class {c} has no samples")));
        }
        if !features.all_finite() {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            counts,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Sample indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }
}

/// Number of occurrences of each label in `0..num_classes`.
pub fn count_labels(labels: &[usize], num_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; num_classes];
    for &y in labels {
        if y >= num_classes {
            return Err(Error::Index {
                index: y,
                len: num_classes,
            });
        }
        counts[y] += 1;
    }
    Ok(counts)
}

/// `max_c N_c / min_c N_c`
pub fn imbalance_ratio(counts: &[usize]) -> Result<f64> {
    let max = counts
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::domain("imbalance_ratio", "empty counts"))?;
    let min = counts.iter().copied().min().unwrap_or(0);
    if min == 0 {
        return Err(Error::domain("imbalance_ratio", "zero class count"));
    }
    Ok(max as f64 / min as f64)
}

/// Exponentially decaying class sizes from `n_max` down to `n_max / rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongTailProfile {
    pub n_max: usize,
    pub num_classes: usize,
    pub rho: f64,
}

impl LongTailProfile {
    pub fn new(n_max: usize, num_classes: usize, rho: f64) -> Self {
        Self {
            n_max,
            num_classes,
            rho,
        }
    }

    pub fn counts(&self) -> Result<Vec<usize>> {
        exp_profile(self)
    }
}

/// `N_c = round(n_max · rho^(−c/(C−1)))` for `c = 0..C`.
pub fn exp_profile(profile: &LongTailProfile) -> Result<Vec<usize>> {
    let LongTailProfile {
        n_max,
        num_classes,
        rho,
    } = *profile;
    if num_classes < 2 {
        return Err(Error::domain("exp_profile", "need at least 2 classes"));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::domain("exp_profile", format!("rho = {rho} must be >= 1")));
    }
    if (n_max as f64) < rho {
        return Err(Error::domain(
            "exp_profile",
            format!("n_max = {n_max} is smaller than rho = {rho}"),
        ));
    }
    let last = (num_classes - 1) as f64;
    Ok((0..num_classes)
        .map(|c| {
            let n = (n_max as f64 * rho.powf(-(c as f64) / last)).round();
            n.max(1.0) as usize
        })
        .collect())
}

pub const HEAD_THRESHOLD: usize = 100;
pub const TAIL_THRESHOLD: usize = 20;

/// Head / medium / tail split by training count.
///
/// Head is `N_c > hi`, tail is `N_c < lo`, and everything in between
/// (both boundaries included) is medium.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassGroups {
    pub head: Vec<usize>,
    pub medium: Vec<usize>,
    pub tail: Vec<usize>,
    pub hi: usize,
    pub lo: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Head,
    Medium,
    Tail,
}

impl ClassGroups {
    pub fn group_of(&self, class: usize) -> Option<Group> {
        if self.head.contains(&class) {
            Some(Group::Head)
        } else if self.medium.contains(&class) {
            Some(Group::Medium)
        } else if self.tail.contains(&class) {
            Some(Group::Tail)
        } else {
            None
        }
    }

    pub fn members(&self, group: Group) -> &[usize] {
        match group {
            Group::Head => &self.head,
            Group::Medium => &self.medium,
            Group::Tail => &self.tail,
        }
    }
}

pub fn group_classes(counts: &[usize]) -> ClassGroups {
    group_classes_with(counts, HEAD_THRESHOLD, TAIL_THRESHOLD)
}

pub fn group_classes_with(counts: &[usize], hi: usize, lo: usize) -> ClassGroups {
    let mut groups = ClassGroups {
        head: Vec::new(),
        medium: Vec::new(),
        tail: Vec::new(),
        hi,
        lo,
    };
    for (c, &n) in counts.iter().enumerate() {
        if n > hi {
            groups.head.push(c);
        } else if n < lo {
            groups.tail.push(c);
        } else {
            groups.medium.push(c);
        }
    }
    groups
}
