use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Rng, SgdState};

use super::{cross_entropy_loss, ClassifierHead, Linear, NpeModel};

/// Optimizer settings for classifier re-training.
#[derive(Clone, Debug, PartialEq)]
pub struct CrtConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for CrtConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-3,
        }
    }
}

/// Classifier re-training (cRT).
///
/// The backbone is frozen: features are computed once. A freshly initialized
/// head is trained with plain cross-entropy on class-balanced batches, each
/// sample drawn by picking a class uniformly and then a member of that class
/// uniformly. An epoch is `ceil(N / batch_size)` batches; the learning rate
/// drops by 10x for the last fifth of the epochs.
pub fn crt_retrain(
    model: &NpeModel,
    dataset: &LabeledDataset,
    config: &CrtConfig,
    rng: &mut Rng,
) -> Result<ClassifierHead> {
    let c = model.num_classes();
    if dataset.num_classes() != c {
        return Err(Error::shape("crt_retrain", c, dataset.num_classes()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("cRT batch size must be positive".into()));
    }
    let by_class = dataset.class_indices();
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Dataset(format!("class {empty} has no samples for cRT")));
    }
    let features = model.features(dataset.features())?;
    let d = model.feature_dim();
    let mut head = Linear::normal(d, c, (1.0 / d as f64).sqrt(), rng);
    let mut opt = SgdState::new(config.lr, config.momentum, config.weight_decay)?;
    let steps = dataset.len().div_ceil(config.batch_size);
    let decay_at = config.epochs - config.epochs / 5;
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        opt.lr = if epoch >= decay_at && config.epochs >= 5 {
            config.lr * 0.1
        } else {
            config.lr
        };
        for step in 0..steps {
            batch.clear();
            for _ in 0..config.batch_size {
                let members = &by_class[rng.index(c)];
                batch.push(members[rng.index(members.len())]);
            }
            let h = features.select_rows(&batch);
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels()[i]).collect();
            let (loss, grad, _) = cross_entropy_loss(&head, &h, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric { epoch, step });
            }
            let [w, b] = head.params_mut();
            opt.step(&mut [w, b], &grad.params())?;
        }
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_clusters;
    use crate::model::{ModelSpec, Sign};

    #[test]
    fn backbone_is_untouched() {
        let mut rng = Rng::new(6);
        let ds = gaussian_clusters(&[30, 5, 2], 4, 3.0, 0.5, &mut rng).unwrap();
        let spec = ModelSpec {
            input_dim: 4,
            hidden: vec![8],
            feature_dim: 4,
            num_classes: 3,
            n_pem: 1,
            sign: Sign::Subtractive,
            init_std: 1e-3,
        };
        let model = NpeModel::new(&spec, &mut rng).unwrap();
        let before = model.clone();
        let head = crt_retrain(&model, &ds, &CrtConfig { epochs: 3, ..Default::default() }, &mut rng).unwrap();
        assert_eq!(model, before);
        assert_eq!(head.weight.shape(), (3, 4));
    }
}
