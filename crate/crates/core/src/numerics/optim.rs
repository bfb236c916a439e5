use crate::error::{Error, Result};

use super::Matrix;

/// SGD with heavy-ball momentum and coupled (L2) weight decay.
///
/// Per step: `v ← momentum·v + grad + weight_decay·param`, `param ← param − lr·v`.
#[derive(Clone, Debug)]
pub struct SgdState {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Matrix>,
}

impl SgdState {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::domain("SgdState", format!("momentum {momentum} not in [0, 1)")));
        }
        if !(weight_decay >= 0.0) {
            return Err(Error::domain(
                "SgdState",
                format!("weight_decay {weight_decay} must be >= 0"),
            ));
        }
        Ok(Self {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        })
    }

    pub fn velocity(&self) -> &[Matrix] {
        &self.velocity
    }

    /// One update of every parameter in place. Velocities are allocated on
    /// the first call and must keep matching shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "sgd_step",
                format!("{} gradients", params.len()),
                grads.len(),
            ));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::shape(
                "sgd_step",
                format!("{} velocity buffers", self.velocity.len()),
                params.len(),
            ));
        }
        for ((p, g), v) in params.iter().zip(grads).zip(&self.velocity) {
            if p.shape() != g.shape() || p.shape() != v.shape() {
                return Err(Error::shape(
                    "sgd_step",
                    format!("{:?}", p.shape()),
                    format!("grad {:?}, velocity {:?}", g.shape(), v.shape()),
                ));
            }
        }
        let (lr, mu, wd) = (self.lr, self.momentum, self.weight_decay);
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            let pv = p.as_mut_slice();
            for ((x, &dx), vx) in pv.iter_mut().zip(g.as_slice()).zip(v.as_mut_slice()) {
                *vx = mu * *vx + dx + wd * *x;
                *x -= lr * *vx;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`SgdState::step`].
pub fn sgd_step(params: &mut [&mut Matrix], grads: &[&Matrix], state: &mut SgdState) -> Result<()> {
    state.step(params, grads)
}
