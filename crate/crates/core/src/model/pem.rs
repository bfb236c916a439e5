use crate::error::{Error, Result};
use crate::numerics::{log_sigmoid, sigmoid, Matrix, Rng};

use super::Linear;

/// Direction in which the one-way loss pushes the true-class score.
///
/// `Additive` (`t = 0`) drives it up, `Subtractive` (`t = 1`) drives it down.
/// The estimate multiplies by the same sign, so it always comes out with the
/// orientation of a log-prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sign {
    Additive,
    #[default]
    Subtractive,
}

impl Sign {
    pub fn from_t(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Sign::Additive),
            1 => Ok(Sign::Subtractive),
            _ => Err(Error::domain("Sign::from_t", format!("t = {t} not in {{0, 1}}"))),
        }
    }

    pub fn t(self) -> u8 {
        match self {
            Sign::Additive => 0,
            Sign::Subtractive => 1,
        }
    }

    /// `(−1)ᵗ`
    pub fn factor(self) -> f64 {
        match self {
            Sign::Additive => 1.0,
            Sign::Subtractive => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Additive => Sign::Subtractive,
            Sign::Subtractive => Sign::Additive,
        }
    }
}

pub const PEM_INIT_STD: f64 = 1e-3;

/// Bank of linear prior estimation modules `u_k(h) = A_k h + c_k`, each with
/// one output per class.
#[derive(Clone, Debug, PartialEq)]
pub struct PemBank {
    maps: Vec<Linear>,
    sign: Sign,
    init_std: f64,
}

impl PemBank {
    /// `count` maps with every weight and bias drawn from `N(0, init_std²)`.
    pub fn new(
        count: usize,
        feature_dim: usize,
        num_classes: usize,
        sign: Sign,
        init_std: f64,
        rng: &mut Rng,
    ) -> Self {
        let maps = (0..count)
            .map(|_| Linear {
                weight: Matrix::from_fn(num_classes, feature_dim, |_, _| init_std * rng.normal()),
                bias: Matrix::from_fn(num_classes, 1, |_, _| init_std * rng.normal()),
            })
            .collect();
        Self {
            maps,
            sign,
            init_std,
        }
    }

    pub fn empty(sign: Sign) -> Self {
        Self {
            maps: Vec::new(),
            sign,
            init_std: PEM_INIT_STD,
        }
    }

    pub fn from_maps(maps: Vec<Linear>, sign: Sign) -> Result<Self> {
        if let Some(first) = maps.first() {
            let shape = first.weight.shape();
            if maps.iter().any(|m| m.weight.shape() != shape || m.bias.len() != shape.0) {
                return Err(Error::shape("PemBank::from_maps", format!("{shape:?}"), "mixed shapes"));
            }
        }
        Ok(Self {
            maps,
            sign,
            init_std: PEM_INIT_STD,
        })
    }

    pub fn maps(&self) -> &[Linear] {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut [Linear] {
        &mut self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn init_std(&self) -> f64 {
        self.init_std
    }

    /// Records the initialization scale; parameters are left as they are.
    pub fn set_init_std(&mut self, std: f64) {
        self.init_std = std;
    }

    /// Same estimate, opposite training direction: flips `t` and negates
    /// every parameter.
    pub fn resigned(&self) -> Self {
        Self {
            maps: self
                .maps
                .iter()
                .map(|m| Linear {
                    weight: m.weight.scale(-1.0),
                    bias: m.bias.scale(-1.0),
                })
                .collect(),
            sign: self.sign.flipped(),
            init_std: self.init_std,
        }
    }

    fn check_features(&self, h: &Matrix) -> Result<()> {
        if let Some(m) = self.maps.first() {
            if h.cols() != m.input_dim() {
                return Err(Error::shape(
                    "pem_outputs",
                    format!("{} feature columns", m.input_dim()),
                    h.cols(),
                ));
            }
        }
        Ok(())
    }
}

/// Raw module outputs `u_k(h)`, one `N × C` matrix per module.
pub fn pem_outputs(pems: &PemBank, h: &Matrix) -> Result<Vec<Matrix>> {
    pems.check_features(h)?;
    pems.maps.iter().map(|m| m.forward(h)).collect()
}

/// NPE estimate `η(h) = ((−1)ᵗ / N_PEM) Σ_k u_k(h)`.
///
/// Fails with [`Error::EmptyBank`] when there are no modules; use
/// [`npe_estimate_or_zeros`] where an empty bank should mean "no adjustment".
pub fn npe_estimate(pems: &PemBank, h: &Matrix) -> Result<Matrix> {
    if pems.is_empty() {
        return Err(Error::EmptyBank);
    }
    pems.check_features(h)?;
    let scale = pems.sign.factor() / pems.len() as f64;
    let mut sum = Matrix::zeros(h.rows(), pems.maps[0].output_dim());
    for m in &pems.maps {
        sum.axpy(1.0, &m.forward(h)?)?;
    }
    Ok(sum.scale(scale))
}

/// [`npe_estimate`], with an all-zero `N × num_classes` estimate for an
/// empty bank, which turns the adjustment into a no-op.
pub fn npe_estimate_or_zeros(pems: &PemBank, h: &Matrix, num_classes: usize) -> Result<Matrix> {
    if pems.is_empty() {
        Ok(Matrix::zeros(h.rows(), num_classes))
    } else {
        npe_estimate(pems, h)
    }
}

/// Gradients of the one-way loss.
#[derive(Clone, Debug)]
pub struct PemGrads {
    pub maps: Vec<Linear>,
    pub features: Matrix,
}

/// `(1/N) Σ_k Σ_i −log σ((−1)ᵗ · u_k(h_i)_{y_i})`.
///
/// Only the true-class coordinate of each module output enters the loss, so
/// only row `y_i` of each `A_k` and entry `y_i` of each `c_k` receive
/// gradient from sample `i`. The gradient with respect to `h` is returned as
/// well so it can flow into the backbone.
pub fn one_way_logistic_loss(pems: &PemBank, h: &Matrix, labels: &[usize]) -> Result<(f64, PemGrads)> {
    if labels.len() != h.rows() {
        return Err(Error::shape("one_way_logistic_loss", h.rows(), labels.len()));
    }
    pems.check_features(h)?;
    let mut d_features = Matrix::zeros(h.rows(), h.cols());
    let mut grads: Vec<Linear> = pems
        .maps
        .iter()
        .map(|m| Linear::zeros(m.input_dim(), m.output_dim()))
        .collect();
    if pems.is_empty() || labels.is_empty() {
        return Ok((0.0, PemGrads { maps: grads, features: d_features }));
    }
    let num_classes = pems.maps[0].output_dim();
    let s = pems.sign.factor();
    let inv_n = 1.0 / labels.len() as f64;
    let mut loss = 0.0;
    for (k, map) in pems.maps.iter().enumerate() {
        let grad = &mut grads[k];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::Index {
                    index: y,
                    len: num_classes,
                });
            }
            let hi = h.row(i);
            let u = map.forward_coord(hi, y);
            loss -= log_sigmoid(s * u);
            // d/du −log σ(s·u) = −s·σ(−s·u)
            let g = -s * sigmoid(-s * u) * inv_n;
            for (w, &x) in grad.weight.row_mut(y).iter_mut().zip(hi) {
                *w += g * x;
            }
            grad.bias.as_mut_slice()[y] += g;
            for (d, &a) in d_features.row_mut(i).iter_mut().zip(map.weight.row(y)) {
                *d += g * a;
            }
        }
    }
    Ok((
        loss * inv_n,
        PemGrads {
            maps: grads,
            features: d_features,
        },
    ))
}
