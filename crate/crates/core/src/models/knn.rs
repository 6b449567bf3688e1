//! K-nearest neighbors over Euclidean distance.
//!
//! A lazy learner: training stores the (already standardized) feature
//! matrix and labels after validating `k`. Neighbor order is total and
//! deterministic: ties in distance prefer the lower stored-row index, and
//! vote ties prefer the lowest class id.

use super::{argmax_lowest, KnnParams, ModelError, ModelState, TrainedModel};
use crate::dataset::{ClassId, Dataset};
use ndarray::Array2;

pub fn train_knn(train: &Dataset, params: &KnnParams) -> Result<TrainedModel, ModelError> {
    params.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if params.k > train.n_rows() {
        return Err(ModelError::KExceedsRows {
            k: params.k,
            rows: train.n_rows(),
        });
    }
    Ok(TrainedModel::new(
        ModelState::Knn {
            features: train.features().clone(),
            labels: train.labels().to_vec(),
            k: params.k,
        },
        train.n_features(),
        train.label_mode(),
        train.node_id(),
    ))
}

pub(super) fn predict(
    stored: &Array2<f64>,
    labels: &[ClassId],
    k: usize,
    n_classes: usize,
    row: &[f64],
) -> ClassId {
    let flat = stored
        .as_slice()
        .expect("stored features are in standard layout");
    let width = stored.ncols();
    let mut distances: Vec<(f64, usize)> = (0..stored.nrows())
        .map(|i| {
            let base = i * width;
            let d2: f64 = row
                .iter()
                .zip(&flat[base..base + width])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    // Squared distance preserves Euclidean order; ties go to the lower index.
    distances.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut votes = vec![0u32; n_classes];
    for &(_, idx) in distances.iter().take(k) {
        votes[labels[idx]] += 1;
    }
    argmax_lowest(&votes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, LabelMode};
    use ndarray::array;

    fn dataset() -> Dataset {
        Dataset::new(
            array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [5.2, 5.0]],
            vec![0, 0, 1, 1, 1],
            vec!["a".into(), "b".into()],
            3,
            LabelMode::Binary,
        )
        .unwrap()
    }

    #[test]
    fn k1_returns_the_stored_rows_label() {
        let model = train_knn(&dataset(), &KnnParams { k: 1, ..KnnParams::default() }).unwrap();
        let ds = dataset();
        for i in 0..ds.n_rows() {
            assert_eq!(model.predict(ds.row(i)).unwrap(), ds.labels()[i]);
        }
    }

    #[test]
    fn k3_majority_vote() {
        // Nearest three to (5.05, 5.0) are the three class-1 rows.
        let model = train_knn(&dataset(), &KnnParams { k: 3, ..KnnParams::default() }).unwrap();
        assert_eq!(model.predict(&[5.05, 5.0]).unwrap(), 1);
        // Nearest three to the origin are [0,0], [0.1,0] (class 0) and one
        // class-1 row: majority 0.
        assert_eq!(model.predict(&[0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn vote_tie_breaks_to_lowest_class() {
        let ds = Dataset::new(
            array![[0.0], [2.0], [4.0]],
            vec![1, 0, 1],
            vec!["a".into()],
            1,
            LabelMode::Binary,
        )
        .unwrap();
        let model = train_knn(&ds, &KnnParams { k: 3, ..KnnParams::default() }).unwrap();
        // All three rows vote: classes [1, 0, 1] -> class 1 by majority.
        assert_eq!(model.predict(&[2.0]).unwrap(), 1);
        // k=1 at the exact midpoint of rows 0 and 1: equal distance, the
        // lower row index (0) wins, so class 1.
        let model = train_knn(&ds, &KnnParams { k: 1, ..KnnParams::default() }).unwrap();
        assert_eq!(model.predict(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn k_larger_than_rows_is_rejected() {
        let err = train_knn(&dataset(), &KnnParams { k: 7, ..KnnParams::default() }).unwrap_err();
        assert!(matches!(err, ModelError::KExceedsRows { k: 7, rows: 5 }));
    }
}
