//! Seeded train/test splitting.

use super::{ClassId, Dataset, DatasetError, SplitSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Partitions `ds` into disjoint train and test datasets.
///
/// The same `(dataset, spec)` pair always produces the same partition. Row
/// order inside each split follows the original dataset, so splits of equal
/// data are byte-identical. Rounding is half-away-from-zero on
/// `train_fraction * rows`, applied per class when stratified.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DatasetError> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut train_idx: Vec<usize> = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();

    if spec.stratified {
        let mut by_class: Vec<(ClassId, Vec<usize>)> = ds
            .class_counts()
            .into_iter()
            .map(|(c, _)| (c, Vec::new()))
            .collect();
        for (i, &label) in ds.labels().iter().enumerate() {
            let slot = by_class
                .iter_mut()
                .find(|(c, _)| *c == label)
                .expect("class_counts covers every label");
            slot.1.push(i);
        }
        for (class, mut indices) in by_class {
            if indices.len() < 2 {
                return Err(DatasetError::StratifiedSingleton { class });
            }
            indices.shuffle(&mut rng);
            let n_train = round_count(spec.train_fraction, indices.len());
            train_idx.extend_from_slice(&indices[..n_train]);
            test_idx.extend_from_slice(&indices[n_train..]);
        }
    } else {
        let mut indices: Vec<usize> = (0..ds.n_rows()).collect();
        indices.shuffle(&mut rng);
        let n_train = round_count(spec.train_fraction, indices.len());
        train_idx.extend_from_slice(&indices[..n_train]);
        test_idx.extend_from_slice(&indices[n_train..]);
    }

    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.select_rows(&train_idx), ds.select_rows(&test_idx)))
}

fn round_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabelMode;
    use ndarray::Array2;

    fn dataset(labels: Vec<ClassId>, mode: LabelMode) -> Dataset {
        let n = labels.len();
        let features =
            Array2::from_shape_vec((n, 2), (0..2 * n).map(|v| v as f64).collect()).unwrap();
        Dataset::new(features, labels, vec!["a".into(), "b".into()], 1, mode).unwrap()
    }

    #[test]
    fn ten_rows_at_eighty_percent() {
        let ds = dataset(vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1], LabelMode::Binary);
        let (train, test) = split(&ds, &SplitSpec::new(7)).unwrap();
        assert_eq!(train.n_rows(), 8);
        assert_eq!(test.n_rows(), 2);
        // Disjoint with union equal to the original: every original row
        // appears exactly once across the two splits.
        let mut seen: Vec<&[f64]> = train
            .labels()
            .iter()
            .enumerate()
            .map(|(i, _)| train.row(i))
            .chain(test.labels().iter().enumerate().map(|(i, _)| test.row(i)))
            .collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut original: Vec<&[f64]> = (0..ds.n_rows()).map(|i| ds.row(i)).collect();
        original.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, original);
    }

    #[test]
    fn same_seed_gives_identical_partition() {
        let ds = dataset(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1], LabelMode::Binary);
        let spec = SplitSpec::new(7);
        let (a_train, a_test) = split(&ds, &spec).unwrap();
        let (b_train, b_test) = split(&ds, &spec).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
    }

    #[test]
    fn stratified_split_balances_classes() {
        let mut labels = vec![0; 50];
        labels.extend(vec![1; 50]);
        let ds = dataset(labels, LabelMode::Binary);
        let (train, _) = split(&ds, &SplitSpec::new(3)).unwrap();
        let train_of = |c: ClassId| train.labels().iter().filter(|&&l| l == c).count();
        assert_eq!(train_of(0), 40);
        assert_eq!(train_of(1), 40);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = dataset(vec![0, 0], LabelMode::Binary).select_rows(&[]);
        assert!(matches!(
            split(&ds, &SplitSpec::new(1)),
            Err(DatasetError::EmptyDataset)
        ));
    }

    #[test]
    fn singleton_class_is_an_error_when_stratified() {
        let ds = dataset(vec![0, 0, 0, 1], LabelMode::Binary);
        assert!(matches!(
            split(&ds, &SplitSpec::new(1)),
            Err(DatasetError::StratifiedSingleton { class: 1 })
        ));
        let mut spec = SplitSpec::new(1);
        spec.stratified = false;
        assert!(split(&ds, &spec).is_ok());
    }

    #[test]
    fn invalid_fraction_is_rejected() {
        let ds = dataset(vec![0, 1], LabelMode::Binary);
        for bad in [0.0, 1.0, -0.5, 1.5] {
            let spec = SplitSpec {
                train_fraction: bad,
                seed: 1,
                stratified: false,
            };
            assert!(split(&ds, &spec).is_err(), "fraction {bad} accepted");
        }
    }
}
