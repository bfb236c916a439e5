//! Backbone, classifier head, and prior estimation bank trained jointly on
//! `L = L_CE + L_NPE`, plus the inference-time adjustments built on top.

mod adjust;
mod crt;
mod layers;
mod pem;

pub use adjust::{adjust_logits, classical_la, fold_linear};
pub use crt::{crt_retrain, CrtConfig};
pub use layers::{Backbone, BackboneTrace, Linear};
pub use pem::{
    npe_estimate, npe_estimate_or_zeros, one_way_logistic_loss, pem_outputs, PemBank, PemGrads,
    Sign, PEM_INIT_STD,
};

use crate::error::{Error, Result};
use crate::numerics::{softmax_ce, Matrix, Rng};

/// Final linear layer `z = W h + b`, `W` is `C × d`.
pub type ClassifierHead = Linear;

/// Shape of a model. An empty `hidden` list together with
/// `feature_dim == input_dim` selects the identity backbone.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub n_pem: usize,
    pub sign: Sign,
    pub init_std: f64,
}

impl ModelSpec {
    pub fn backbone_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.feature_dim);
        dims
    }

    pub fn has_identity_backbone(&self) -> bool {
        self.hidden.is_empty() && self.feature_dim == self.input_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpeModel {
    pub backbone: Backbone,
    pub head: ClassifierHead,
    pub pems: PemBank,
}

/// Gradients in the same layout as [`NpeModel`].
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub backbone: Vec<Linear>,
    pub head: Linear,
    pub pems: Vec<Linear>,
}

impl ModelGrads {
    /// Same order as [`NpeModel::params`].
    pub fn refs(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        for l in &self.backbone {
            out.extend(l.params());
        }
        out.extend(self.head.params());
        for l in &self.pems {
            out.extend(l.params());
        }
        out
    }

    /// Backbone and head gradients, then module gradients.
    pub fn groups(&self) -> (Vec<&Matrix>, Vec<&Matrix>) {
        let mut main: Vec<&Matrix> = Vec::new();
        for l in &self.backbone {
            main.extend(l.params());
        }
        main.extend(self.head.params());
        let pem = self.pems.iter().flat_map(|l| l.params()).collect();
        (main, pem)
    }
}

/// Mean cross-entropy and mean one-way loss of a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub ce: f64,
    pub npe: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.ce + self.npe
    }
}

impl NpeModel {
    pub fn new(spec: &ModelSpec, rng: &mut Rng) -> Result<Self> {
        if spec.num_classes < 2 {
            return Err(Error::domain("NpeModel::new", "need at least 2 classes"));
        }
        let backbone = if spec.has_identity_backbone() {
            Backbone::identity(spec.input_dim)
        } else {
            Backbone::new(&spec.backbone_dims(), rng)?
        };
        let d = spec.feature_dim;
        let head = Linear::normal(d, spec.num_classes, (1.0 / d as f64).sqrt(), rng);
        let pems = PemBank::new(spec.n_pem, d, spec.num_classes, spec.sign, spec.init_std, rng);
        Self::from_parts(backbone, head, pems)
    }

    pub fn from_parts(backbone: Backbone, head: ClassifierHead, pems: PemBank) -> Result<Self> {
        let d = backbone.output_dim();
        if head.input_dim() != d {
            return Err(Error::shape("NpeModel", format!("head input {d}"), head.input_dim()));
        }
        if let Some(m) = pems.maps().first() {
            if m.input_dim() != d || m.output_dim() != head.output_dim() {
                return Err(Error::shape(
                    "NpeModel",
                    format!("modules {}x{d}", head.output_dim()),
                    format!("{:?}", m.weight.shape()),
                ));
            }
        }
        Ok(Self {
            backbone,
            head,
            pems,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.backbone.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.input_dim()
    }

    /// Every parameter matrix: backbone layers, head, then modules; weight
    /// before bias within each layer.
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        for l in self.backbone.layers() {
            out.extend(l.params());
        }
        out.extend(self.head.params());
        for l in self.pems.maps() {
            out.extend(l.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let (mut main, pem) = self.param_groups_mut();
        main.extend(pem);
        main
    }

    /// Backbone and head parameters, then module parameters, so the two
    /// groups can take different weight decay.
    pub fn param_groups_mut(&mut self) -> (Vec<&mut Matrix>, Vec<&mut Matrix>) {
        let mut main: Vec<&mut Matrix> = Vec::new();
        for l in self.backbone.layers_mut() {
            main.extend(l.params_mut());
        }
        main.extend(self.head.params_mut());
        let pem = self.pems.maps_mut().iter_mut().flat_map(|l| l.params_mut()).collect();
        (main, pem)
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        forward_features(self, x)
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        classifier_logits(&self.head, &self.features(x)?)
    }
}

/// `h = f_θ(x)`
pub fn forward_features(model: &NpeModel, x: &Matrix) -> Result<Matrix> {
    model.backbone.forward(x)
}

/// `z = h·Wᵀ + b`
pub fn classifier_logits(head: &ClassifierHead, h: &Matrix) -> Result<Matrix> {
    head.forward(h)
}

/// Mean softmax cross-entropy of `z = head(h)`; returns the head gradients
/// and `∂L/∂h`.
pub fn cross_entropy_loss(head: &ClassifierHead, h: &Matrix, labels: &[usize]) -> Result<(f64, Linear, Matrix)> {
    if labels.len() != h.rows() {
        return Err(Error::shape("cross_entropy_loss", h.rows(), labels.len()));
    }
    let z = classifier_logits(head, h)?;
    let inv_n = 1.0 / labels.len().max(1) as f64;
    let mut dz = Matrix::zeros(z.rows(), z.cols());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let (l, g) = softmax_ce(z.row(i), y)?;
        loss += l;
        for (d, gv) in dz.row_mut(i).iter_mut().zip(g) {
            *d = gv * inv_n;
        }
    }
    let (grad, dh) = head.backward(h, &dz)?;
    Ok((loss * inv_n, grad, dh))
}

/// `L = L_CE + L_NPE` on a batch with gradients for every parameter from a
/// single backward pass. Both terms reach the backbone through `h`.
pub fn total_loss(model: &NpeModel, x: &Matrix, labels: &[usize]) -> Result<(LossParts, ModelGrads)> {
    let trace = model.backbone.forward_traced(x)?;
    let h = trace.output();
    let (ce, head, mut dh) = cross_entropy_loss(&model.head, h, labels)?;
    let (npe, pem) = one_way_logistic_loss(&model.pems, h, labels)?;
    dh.axpy(1.0, &pem.features)?;
    let (backbone, _) = model.backbone.backward(&trace, &dh)?;
    Ok((
        LossParts { ce, npe },
        ModelGrads {
            backbone,
            head,
            pems: pem.maps,
        },
    ))
}
