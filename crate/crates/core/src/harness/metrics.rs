use crate::data::{ClassGroups, Group, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::{adjust_logits, classical_la, classifier_logits, npe_estimate_or_zeros, ClassifierHead, NpeModel};
use crate::numerics::Matrix;

/// Prediction rule applied at evaluation time.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalMode<'a> {
    Ce,
    /// Post-hoc adjustment with these training counts.
    La(&'a [usize]),
    /// Logits from a re-trained head on the frozen backbone.
    CrtHead(&'a ClassifierHead),
    NpeLa(f64),
}

/// Logits the mode predicts from.
pub fn mode_logits(model: &NpeModel, x: &Matrix, mode: &EvalMode<'_>) -> Result<Matrix> {
    let h = model.features(x)?;
    match mode {
        EvalMode::Ce => classifier_logits(&model.head, &h),
        EvalMode::La(counts) => classical_la(&classifier_logits(&model.head, &h)?, counts),
        EvalMode::CrtHead(head) => classifier_logits(head, &h),
        EvalMode::NpeLa(alpha) => {
            let z = classifier_logits(&model.head, &h)?;
            let eta = npe_estimate_or_zeros(&model.pems, &h, model.num_classes())?;
            adjust_logits(&z, &eta, *alpha)
        }
    }
}

pub fn predict(model: &NpeModel, x: &Matrix, mode: &EvalMode<'_>) -> Result<Vec<usize>> {
    Ok(mode_logits(model, x, mode)?.argmax_rows())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub top1: f64,
    /// Mean of the per-class accuracies of classes present in the eval set.
    pub balanced_acc: f64,
    pub head_acc: Option<f64>,
    pub medium_acc: Option<f64>,
    pub tail_acc: Option<f64>,
    /// `None` for classes absent from the eval set.
    pub per_class_acc: Vec<Option<f64>>,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricsReport {
    pub fn group_acc(&self, group: Group) -> Option<f64> {
        match group {
            Group::Head => self.head_acc,
            Group::Medium => self.medium_acc,
            Group::Tail => self.tail_acc,
        }
    }
}

/// Scores predictions against labels. Group accuracies weight each member
/// class by its eval-set count, which equals pooled accuracy over the group.
pub fn score(predictions: &[usize], labels: &[usize], num_classes: usize, groups: &ClassGroups) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty dataset".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape("score", labels.len(), predictions.len()));
    }
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::Index { index: y, len: num_classes });
        }
        totals[y] += 1;
        hits[y] += usize::from(p == y);
    }
    let per_class_acc: Vec<Option<f64>> = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
        .collect();
    let present: Vec<f64> = per_class_acc.iter().flatten().copied().collect();
    let balanced_acc = present.iter().sum::<f64>() / present.len() as f64;
    let top1 = hits.iter().sum::<usize>() as f64 / labels.len() as f64;
    let group = |g: Group| {
        let members = groups.members(g);
        let n: usize = members.iter().map(|&c| totals[c]).sum();
        let h: usize = members.iter().map(|&c| hits[c]).sum();
        (n > 0).then(|| h as f64 / n as f64)
    };
    Ok(MetricsReport {
        top1,
        balanced_acc,
        head_acc: group(Group::Head),
        medium_acc: group(Group::Medium),
        tail_acc: group(Group::Tail),
        per_class_acc,
        seed: 0,
        config_digest: String::new(),
    })
}

/// Evaluates `mode` on `dataset`; `groups` comes from the training counts.
pub fn evaluate(model: &NpeModel, dataset: &LabeledDataset, mode: &EvalMode<'_>, groups: &ClassGroups) -> Result<MetricsReport> {
    if dataset.dim() != model.input_dim() || dataset.num_classes() != model.num_classes() {
        return Err(Error::Dataset(format!(
            "dataset is {}-dim with {} classes, model expects {}-dim with {}",
            dataset.dim(),
            dataset.num_classes(),
            model.input_dim(),
            model.num_classes()
        )));
    }
    let pred = predict(model, dataset.features(), mode)?;
    score(&pred, dataset.labels(), dataset.num_classes(), groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{group_classes, LabeledDataset};
    use crate::model::{Backbone, Linear, PemBank, Sign};

    fn toy() -> (NpeModel, LabeledDataset) {
        // identity backbone, head copies the features
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.5], vec![0.1, 3.0]]).unwrap();
        let ds = LabeledDataset::new(x, vec![0, 1, 0, 1], 2).unwrap();
        let head = Linear::from_parts(Matrix::identity(2), Matrix::zeros(2, 1)).unwrap();
        let model = NpeModel::from_parts(Backbone::identity(2), head, PemBank::empty(Sign::Subtractive)).unwrap();
        (model, ds)
    }

    #[test]
    fn perfect_separation() {
        let (model, ds) = toy();
        let groups = group_classes(&[500, 5]);
        let r = evaluate(&model, &ds, &EvalMode::Ce, &groups).unwrap();
        assert_eq!((r.top1, r.balanced_acc), (1.0, 1.0));
        assert_eq!((r.head_acc, r.medium_acc, r.tail_acc), (Some(1.0), None, Some(1.0)));
    }

    #[test]
    fn npe_la_without_modules_is_ce() {
        let (model, ds) = toy();
        let groups = group_classes(&[50, 50]);
        let ce = evaluate(&model, &ds, &EvalMode::Ce, &groups).unwrap();
        assert_eq!(evaluate(&model, &ds, &EvalMode::NpeLa(1.0), &groups).unwrap(), ce);
    }

    #[test]
    fn balanced_and_group_arithmetic() {
        let labels = [0, 0, 0, 0, 1, 1, 2];
        let pred = [0, 0, 0, 1, 0, 1, 2];
        let groups = group_classes(&[200, 50, 50]);
        let r = score(&pred, &labels, 4, &groups).unwrap();
        assert_eq!(r.per_class_acc, vec![Some(0.75), Some(0.5), Some(1.0), None]);
        assert!((r.balanced_acc - 0.75).abs() < 1e-12);
        assert!((r.top1 - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.head_acc, Some(0.75));
        assert!((r.medium_acc.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(score(&[], &[], 2, &groups).is_err());
    }
}
