use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng};

use super::LabeledDataset;

/// Isotropic Gaussian clusters, one per class.
///
/// Means are `sep` times a set of random orthonormal directions (Gram-Schmidt
/// on Gaussian draws). When `dim < num_classes` there is no room for an
/// orthonormal set and the remaining directions are only normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    pub means: Matrix,
    pub noise: f64,
}

impl GaussianMixture {
    pub fn new(num_classes: usize, dim: usize, sep: f64, noise: f64, rng: &mut Rng) -> Result<Self> {
        if dim < 1 {
            return Err(Error::domain("gaussian_clusters", "feature dimension must be >= 1"));
        }
        if num_classes < 1 {
            return Err(Error::domain("gaussian_clusters", "need at least one class"));
        }
        if !(sep > 0.0) || !(noise >= 0.0) {
            return Err(Error::domain(
                "gaussian_clusters",
                format!("sep = {sep} must be > 0 and noise = {noise} >= 0"),
            ));
        }
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
        for c in 0..num_classes {
            loop {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                if c < dim {
                    for prev in &dirs {
                        let proj = dot(&v, prev);
                        for (x, p) in v.iter_mut().zip(prev) {
                            *x -= proj * p;
                        }
                    }
                }
                let norm = dot(&v, &v).sqrt();
                if norm > 1e-8 {
                    v.iter_mut().for_each(|x| *x /= norm);
                    dirs.push(v);
                    break;
                }
            }
        }
        let means = Matrix::from_fn(num_classes, dim, |c, j| sep * dirs[c][j]);
        Ok(Self { means, noise })
    }

    pub fn num_classes(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Draws exactly `counts[c]` points per class, then shuffles the rows.
    pub fn sample(&self, counts: &[usize], rng: &mut Rng) -> Result<LabeledDataset> {
        if counts.len() != self.num_classes() {
            return Err(Error::shape(
                "GaussianMixture::sample",
                format!("{} class counts", self.num_classes()),
                counts.len(),
            ));
        }
        let mut labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
            .collect();
        rng.shuffle(&mut labels);
        let dim = self.dim();
        let mut features = Matrix::zeros(labels.len(), dim);
        for (i, &y) in labels.iter().enumerate() {
            let mean = self.means.row(y);
            for (x, &m) in features.row_mut(i).iter_mut().zip(mean) {
                *x = m + self.noise * rng.normal();
            }
        }
        LabeledDataset::new(features, labels, self.num_classes())
    }
}

/// One Gaussian cluster per class, means at `sep` along random orthonormal
/// directions, `counts[c]` samples each, rows shuffled.
pub fn gaussian_clusters(
    counts: &[usize],
    dim: usize,
    sep: f64,
    noise: f64,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    let mixture = GaussianMixture::new(counts.len(), dim, sep, noise, rng)?;
    mixture.sample(counts, rng)
}

/// The `C` unit vertices of a simplex equiangular tight frame, as rows of a
/// `C × dim` matrix.
///
/// Vertex `c` is `√(C/(C−1))·(e_c − 1/C)` expressed in the Helmert basis of
/// the zero-sum subspace, so it occupies the first `C − 1` coordinates; the
/// rest are zero. No rotation is applied.
pub fn simplex_etf_vectors(num_classes: usize, dim: usize) -> Result<Matrix> {
    if num_classes < 2 {
        return Err(Error::domain("simplex_etf_features", "need at least 2 classes"));
    }
    let c = num_classes;
    if dim + 1 < c {
        return Err(Error::domain(
            "simplex_etf_features",
            format!("dimension {dim} < C - 1 = {}", c - 1),
        ));
    }
    let scale = (c as f64 / (c as f64 - 1.0)).sqrt();
    // Helmert vector k (1-based): k ones, then −k, then zeros, over √(k(k+1)).
    let helmert = |k: usize, i: usize| -> f64 {
        let norm = ((k * (k + 1)) as f64).sqrt();
        if i < k {
            1.0 / norm
        } else if i == k {
            -(k as f64) / norm
        } else {
            0.0
        }
    };
    Ok(Matrix::from_fn(c, dim, |class, j| {
        if j + 1 >= c {
            return 0.0;
        }
        // Helmert vectors are orthogonal to 1, so the −1/C shift drops out
        scale * helmert(j + 1, class)
    }))
}

/// Collapsed features: every sample of class `c` is the `c`-th simplex ETF
/// vertex. Rows are ordered by class.
pub fn simplex_etf_features(counts: &[usize], dim: usize) -> Result<LabeledDataset> {
    let vertices = simplex_etf_vectors(counts.len(), dim)?;
    let labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
        .collect();
    let features = vertices.select_rows(&labels);
    LabeledDataset::new(features, labels, counts.len())
}
