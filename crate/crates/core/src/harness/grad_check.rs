use std::fmt;

use crate::error::{Error, Result};
use crate::model::{total_loss, ModelSpec, NpeModel, Sign};
use crate::numerics::{finite_diff_grad, max_relative_error, Matrix, Rng, DEFAULT_EPS};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const MAX_PARAMS: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub instances: usize,
    pub seed: u64,
    pub eps: f64,
    pub tolerance: f64,
    /// Test hook: added to the first analytic head-weight gradient entry.
    pub corrupt: Option<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            instances: 24,
            seed: 0,
            eps: DEFAULT_EPS,
            tolerance: GRAD_TOLERANCE,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceCheck {
    pub index: usize,
    pub n_pem: usize,
    pub t: u8,
    pub params: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.instances.is_empty() && self.max_rel_error < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance,n_pem,t,params,max_rel_error")?;
        for i in &self.instances {
            writeln!(f, "{},{},{},{},{:.3e}", i.index, i.n_pem, i.t, i.params, i.max_rel_error)?;
        }
        writeln!(
            f,
            "# max_rel_error={:.3e} tolerance={:.0e} result={}",
            self.max_rel_error,
            self.tolerance,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

fn random_instance(index: usize, rng: &mut Rng) -> Result<(NpeModel, Matrix, Vec<usize>)> {
    let input_dim = 2 + rng.index(5);
    let hidden = if rng.index(3) == 0 { vec![] } else { vec![3 + rng.index(6)] };
    let feature_dim = 2 + rng.index(7);
    let num_classes = 2 + rng.index(4);
    let spec = ModelSpec {
        input_dim,
        hidden,
        feature_dim,
        num_classes,
        n_pem: 1 + index % 3,
        sign: Sign::from_t(((index / 3) % 2) as u8)?,
        // away from the near-zero start so both loss terms have curvature
        init_std: 0.5,
    };
    let model = NpeModel::new(&spec, rng)?;
    let batch = 4;
    let x = Matrix::from_fn(batch, input_dim, |_, _| rng.normal());
    let labels = (0..batch).map(|_| rng.index(num_classes)).collect();
    Ok((model, x, labels))
}

/// Compares every analytic gradient of `L_CE + L_NPE` with central
/// differences on small random models. Instance `i` uses `1 + i mod 3`
/// modules and `t = ⌊i/3⌋ mod 2`.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = Rng::new(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.instances);
    for index in 0..cfg.instances {
        let (model, x, labels) = random_instance(index, &mut rng)?;
        let params = model.num_params();
        if params > MAX_PARAMS {
            return Err(Error::Config(format!("grad-check instance has {params} parameters")));
        }
        let (_, grads) = total_loss(&model, &x, &labels)?;
        let mut analytic: Vec<Matrix> = grads.refs().into_iter().cloned().collect();
        if let Some(delta) = cfg.corrupt {
            let head_w = 2 * model.backbone.layers().len();
            analytic[head_w].as_mut_slice()[0] += delta;
        }
        let mut worst: f64 = 0.0;
        for (p, g) in analytic.iter().enumerate() {
            let start = model.params()[p].clone();
            let numeric = finite_diff_grad(
                |m| {
                    let mut probe = model.clone();
                    *probe.params_mut()[p] = m.clone();
                    total_loss(&probe, &x, &labels).map(|(l, _)| l.total()).unwrap_or(f64::NAN)
                },
                &start,
                cfg.eps,
            );
            worst = worst.max(max_relative_error(g, &numeric));
        }
        instances.push(InstanceCheck {
            index,
            n_pem: model.pems.len(),
            t: model.pems.sign().t(),
            params,
            max_rel_error: worst,
        });
    }
    let max_rel_error = instances.iter().map(|i| i.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        instances,
        max_rel_error,
        tolerance: cfg.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_check_passes_and_spans_settings() {
        let report = grad_check(&GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.instances.len() >= 20);
        for n in 1..=3 {
            for t in 0..=1 {
                assert!(report.instances.iter().any(|i| i.n_pem == n && i.t == t));
            }
        }
        assert!(report.instances.iter().all(|i| i.params <= MAX_PARAMS));
    }

    #[test]
    fn corrupted_gradient_fails() {
        let cfg = GradCheckConfig { instances: 3, corrupt: Some(1e-2), ..Default::default() };
        let report = grad_check(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.to_string().contains("result=fail"));
    }
}
