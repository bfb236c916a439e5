use crate::data::{
    exp_profile, load_dataset, simplex_etf_features, GaussianMixture, LabeledDataset, LongTailProfile,
};
use crate::error::{Error, Result};
use crate::model::{total_loss, NpeModel};
use crate::numerics::{Rng, SgdState};

use super::config::{DatasetKind, ExperimentConfig};

/// Independent random streams derived from one seed.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const CRT: u64 = 4;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Datasets {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Builds the train and test sets described by `cfg` for `seed`.
///
/// Without a `test_path`, file-based runs evaluate on the training file.
pub fn build_datasets(cfg: &ExperimentConfig, seed: u64) -> Result<Datasets> {
    match cfg.dataset {
        DatasetKind::Gaussian => {
            let mut rng = Rng::with_stream(seed, stream::DATA);
            let counts = exp_profile(&LongTailProfile::new(cfg.n_max, cfg.num_classes, cfg.rho))?;
            let mixture = GaussianMixture::new(cfg.num_classes, cfg.input_dim, cfg.sep, cfg.noise, &mut rng)?;
            let train = mixture.sample(&counts, &mut rng)?;
            let test = mixture.sample(&vec![cfg.test_per_class; cfg.num_classes], &mut rng)?;
            Ok(Datasets { train, test })
        }
        DatasetKind::Etf => {
            let counts = exp_profile(&LongTailProfile::new(cfg.n_max, cfg.num_classes, cfg.rho))?;
            let train = simplex_etf_features(&counts, cfg.input_dim)?;
            let test = simplex_etf_features(&vec![cfg.test_per_class; cfg.num_classes], cfg.input_dim)?;
            Ok(Datasets { train, test })
        }
        DatasetKind::File => {
            let path = cfg
                .train_path
                .as_ref()
                .ok_or_else(|| Error::Config("dataset = file needs train_path".into()))?;
            let train = load_dataset(path)?;
            let test = match &cfg.test_path {
                Some(p) => load_dataset(p)?,
                None => train.clone(),
            };
            if test.dim() != train.dim() || test.num_classes() != train.num_classes() {
                return Err(Error::Dataset(format!(
                    "test set is {}-dim with {} classes, train set {}-dim with {}",
                    test.dim(),
                    test.num_classes(),
                    train.dim(),
                    train.num_classes()
                )));
            }
            Ok(Datasets { train, test })
        }
    }
}

/// Mean losses of one epoch, weighted by batch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub lr: f64,
    pub ce: f64,
    pub npe: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: NpeModel,
    pub trace: Vec<EpochLoss>,
}

/// Minibatch SGD on `L_CE + L_NPE` with a step schedule.
///
/// The backbone and head share one optimizer with `weight_decay`; the
/// modules get their own with `pem_weight_decay`. Batches follow a fresh
/// permutation every epoch; the last batch may be short.
pub fn run_training(cfg: &ExperimentConfig, train: &LabeledDataset, seed: u64) -> Result<TrainOutcome> {
    let spec = cfg.model_spec(train.num_classes(), train.dim());
    let mut init_rng = Rng::with_stream(seed, stream::INIT);
    let model = NpeModel::new(&spec, &mut init_rng)?;
    train_model(cfg, model, train, seed)
}

/// [`run_training`] from a given starting model.
pub fn train_model(cfg: &ExperimentConfig, mut model: NpeModel, train: &LabeledDataset, seed: u64) -> Result<TrainOutcome> {
    if train.dim() != model.input_dim() || train.num_classes() != model.num_classes() {
        return Err(Error::Dataset(format!(
            "dataset is {}-dim with {} classes, model expects {}-dim with {}",
            train.dim(),
            train.num_classes(),
            model.input_dim(),
            model.num_classes()
        )));
    }
    let mut shuffle_rng = Rng::with_stream(seed, stream::SHUFFLE);
    let mut main_opt = SgdState::new(cfg.lr, cfg.momentum, cfg.weight_decay)?;
    let mut pem_opt = SgdState::new(cfg.lr, cfg.momentum, cfg.pem_weight_decay)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        main_opt.lr = lr;
        pem_opt.lr = lr;
        shuffle_rng.shuffle(&mut order);
        let (mut ce_sum, mut npe_sum) = (0.0, 0.0);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let x = train.features().select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let (parts, grads) = total_loss(&model, &x, &labels)?;
            if !parts.total().is_finite() {
                return Err(Error::Numeric { epoch, step });
            }
            let n = batch.len() as f64;
            ce_sum += parts.ce * n;
            npe_sum += parts.npe * n;
            let (main_g, pem_g) = grads.groups();
            let (mut main_p, mut pem_p) = model.param_groups_mut();
            main_opt.step(&mut main_p, &main_g)?;
            if !pem_p.is_empty() {
                pem_opt.step(&mut pem_p, &pem_g)?;
            }
        }
        let n = train.len() as f64;
        trace.push(EpochLoss {
            epoch,
            lr,
            ce: ce_sum / n,
            npe: npe_sum / n,
        });
    }
    Ok(TrainOutcome { model, trace })
}
