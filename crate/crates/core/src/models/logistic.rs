//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! The weight matrix is `n_classes x (n_features + 1)` with the bias in the
//! last column, initialized to zero. Each epoch takes one step against the
//! gradient of the L2-regularized mean cross-entropy; training stops at the
//! epoch budget or when the loss delta drops below the tolerance.

use super::{argmax_lowest, LogisticParams, ModelError, ModelState, TrainedModel};
use crate::dataset::{ClassId, Dataset};
use ndarray::Array2;

pub fn train_logistic(
    train: &Dataset,
    params: &LogisticParams,
) -> Result<TrainedModel, ModelError> {
    params.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if train.class_counts().len() < 2 {
        return Err(ModelError::SingleClass);
    }
    let n_classes = train.label_mode().n_classes();
    let mut weights = Array2::zeros((n_classes, train.n_features() + 1));

    let mut prev_loss = f64::INFINITY;
    for _ in 0..params.epochs {
        let (loss, gradient) = loss_and_gradient(&weights, train, params.l2);
        if (prev_loss - loss).abs() < params.tolerance {
            break;
        }
        weights.scaled_add(-params.learning_rate, &gradient);
        prev_loss = loss;
    }

    Ok(TrainedModel::new(
        ModelState::Logistic { weights },
        train.n_features(),
        train.label_mode(),
        train.node_id(),
    ))
}

/// L2-regularized mean cross-entropy and its gradient at `weights`.
///
/// loss = -(1/n) sum_i ln softmax(W a_i)[y_i] + (l2/2) |W|^2, with a_i the
/// feature row extended by a constant 1. Public so numeric checks can
/// difference the loss independently of the analytic gradient.
pub fn loss_and_gradient(
    weights: &Array2<f64>,
    train: &Dataset,
    l2: f64,
) -> (f64, Array2<f64>) {
    let n = train.n_rows() as f64;
    let n_classes = weights.nrows();
    let n_aug = weights.ncols();
    let mut loss = 0.0;
    let mut gradient = Array2::zeros((n_classes, n_aug));

    for (i, &label) in train.labels().iter().enumerate() {
        let row = train.row(i);
        let logits = logits(weights, row);
        let probs = softmax(&logits);
        loss -= probs[label].max(f64::MIN_POSITIVE).ln();
        for c in 0..n_classes {
            let delta = probs[c] - if c == label { 1.0 } else { 0.0 };
            for (j, &x) in row.iter().enumerate() {
                gradient[(c, j)] += delta * x;
            }
            gradient[(c, n_aug - 1)] += delta;
        }
    }
    loss /= n;
    gradient.mapv_inplace(|g| g / n);

    if l2 > 0.0 {
        loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
        gradient.scaled_add(l2, weights);
    }
    (loss, gradient)
}

/// Max-shifted softmax; output sums to 1 for any finite input.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn logits(weights: &Array2<f64>, row: &[f64]) -> Vec<f64> {
    let n_aug = weights.ncols();
    weights
        .rows()
        .into_iter()
        .map(|w| {
            let w = w.as_slice().expect("weights are in standard layout");
            w[..n_aug - 1]
                .iter()
                .zip(row)
                .map(|(wj, xj)| wj * xj)
                .sum::<f64>()
                + w[n_aug - 1]
        })
        .collect()
}

/// Per-class probabilities for one (already standardized) row.
pub(super) fn probabilities(weights: &Array2<f64>, row: &[f64]) -> Vec<f64> {
    softmax(&logits(weights, row))
}

pub(super) fn predict(weights: &Array2<f64>, row: &[f64]) -> ClassId {
    argmax_lowest(&probabilities(weights, row))
}

impl TrainedModel {
    /// Softmax class probabilities; logistic models only. Applies the
    /// attached scaler, mirroring [`TrainedModel::predict`].
    pub fn class_probabilities(&self, row: &[f64]) -> Result<Vec<f64>, ModelError> {
        let ModelState::Logistic { weights } = self.state() else {
            return Err(ModelError::InvalidParam(
                "class probabilities are only defined for logistic models".into(),
            ));
        };
        if row.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        match self.scaler() {
            Some(s) => Ok(probabilities(weights, &s.transform_row(row)?)),
            None => Ok(probabilities(weights, row)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, LabelMode};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn blob() -> Dataset {
        // Two linearly separable clusters in 2-D.
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let class = i % 2;
            let center = if class == 0 { -2.0 } else { 2.0 };
            rows.push(center + 0.5 * (rng.random::<f64>() - 0.5));
            rows.push(center + 0.5 * (rng.random::<f64>() - 0.5));
            labels.push(class);
        }
        Dataset::new(
            Array2::from_shape_vec((40, 2), rows).unwrap(),
            labels,
            vec!["x".into(), "y".into()],
            1,
            LabelMode::Binary,
        )
        .unwrap()
    }

    #[test]
    fn separable_blob_reaches_full_training_accuracy() {
        let ds = blob();
        let model = train_logistic(&ds, &LogisticParams::default()).unwrap();
        let hits = (0..ds.n_rows())
            .filter(|&i| model.predict(ds.row(i)).unwrap() == ds.labels()[i])
            .count();
        assert_eq!(hits, ds.n_rows());
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let weights = Array2::zeros((11, 4));
        let probs = probabilities(&weights, &[1.0, -2.0, 0.5]);
        for p in &probs {
            assert!((p - 1.0 / 11.0).abs() < 1e-15);
        }
        assert_eq!(predict(&weights, &[1.0, -2.0, 0.5]), 0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 40.0 - 20.0).collect();
            let sum: f64 = softmax(&logits).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
        }
    }

    #[test]
    fn single_class_data_is_rejected() {
        let ds = Dataset::new(
            array![[1.0], [2.0]],
            vec![0, 0],
            vec!["a".into()],
            1,
            LabelMode::Binary,
        )
        .unwrap();
        assert!(matches!(
            train_logistic(&ds, &LogisticParams::default()),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn loss_is_non_increasing_at_default_rate_on_scaled_data() {
        let ds = blob();
        let scaler = crate::preprocess::fit_scaler(&ds).unwrap();
        let scaled = crate::preprocess::apply_scaler(&scaler, &ds).unwrap();
        let params = LogisticParams::default();
        let mut weights = Array2::zeros((2, 3));
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let (loss, grad) = loss_and_gradient(&weights, &scaled, params.l2);
            assert!(loss <= prev + 1e-12, "loss rose: {prev} -> {loss}");
            weights.scaled_add(-params.learning_rate, &grad);
            prev = loss;
        }
    }
}
