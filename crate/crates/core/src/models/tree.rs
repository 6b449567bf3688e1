//! CART decision tree with Gini impurity and midpoint thresholds.

use super::{argmax_lowest, ModelError, ModelState, TrainedModel, TreeParams};
use crate::dataset::{ClassId, Dataset};
use ndarray::ArrayView2;
use serde::Serialize;

/// One tree node. Internal nodes route `x[feature_index] <= threshold` to
/// the left child; leaves carry the training class histogram and predict
/// its argmax.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<u32>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }
}

/// Gini impurity of a class histogram: `1 - sum(p_i^2)`.
pub fn gini_impurity(class_counts: &[u32]) -> Result<f64, ModelError> {
    let total: u64 = class_counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(ModelError::EmptyClassCounts);
    }
    Ok(gini_unchecked(class_counts, total as f64))
}

fn gini_unchecked(class_counts: &[u32], total: f64) -> f64 {
    let sum_sq: f64 = class_counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p
        })
        .sum();
    1.0 - sum_sq
}

/// A candidate axis-aligned split and the weighted Gini impurity decrease it
/// achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Best split over the given columns: thresholds are midpoints between
/// consecutive distinct sorted values, the winner maximizes the weighted
/// impurity decrease, and ties break to the lowest feature index, then the
/// lowest threshold. Returns `None` when no split decreases impurity.
pub fn find_best_split(
    features: &ArrayView2<'_, f64>,
    labels: &[ClassId],
    candidate_columns: &[usize],
) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..features.nrows()).collect();
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    best_split_indexed(features, labels, &rows, candidate_columns, n_classes)
}

/// Index-subset variant used by the recursive grower.
fn best_split_indexed(
    features: &ArrayView2<'_, f64>,
    labels: &[ClassId],
    rows: &[usize],
    candidate_columns: &[usize],
    n_classes: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let mut parent_counts = vec![0u32; n_classes];
    for &i in rows {
        parent_counts[labels[i]] += 1;
    }
    let parent_gini = gini_unchecked(&parent_counts, n as f64);

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, ClassId)> = Vec::with_capacity(n);
    for &col in candidate_columns {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (features[(i, col)], labels[i])));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_counts = vec![0u32; n_classes];
        for idx in 0..n - 1 {
            left_counts[sorted[idx].1] += 1;
            let (a, b) = (sorted[idx].0, sorted[idx + 1].0);
            if a >= b {
                continue;
            }
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                // Midpoint rounded up onto the right value; fall back to the
                // left value so `x <= threshold` still selects exactly the
                // first idx+1 sorted rows.
                threshold = a;
            }
            let n_left = idx + 1;
            let n_right = n - n_left;
            let right_counts: Vec<u32> = parent_counts
                .iter()
                .zip(&left_counts)
                .map(|(&p, &l)| p - l)
                .collect();
            let weighted = (n_left as f64 / n as f64) * gini_unchecked(&left_counts, n_left as f64)
                + (n_right as f64 / n as f64) * gini_unchecked(&right_counts, n_right as f64);
            let decrease = parent_gini - weighted;
            if decrease <= 0.0 {
                continue;
            }
            let candidate = SplitCandidate {
                feature_index: col,
                threshold,
                impurity_decrease: decrease,
            };
            best = Some(match best {
                None => candidate,
                Some(current) => pick_better(current, candidate),
            });
        }
    }
    best
}

fn pick_better(current: SplitCandidate, challenger: SplitCandidate) -> SplitCandidate {
    if challenger.impurity_decrease > current.impurity_decrease {
        return challenger;
    }
    if challenger.impurity_decrease == current.impurity_decrease
        && (challenger.feature_index, challenger.threshold)
            < (current.feature_index, current.threshold)
    {
        return challenger;
    }
    current
}

/// Recursive CART: splits until purity, the depth cap, `min_samples_split`,
/// or no impurity decrease remains. Deterministic given the input row order.
pub fn train_decision_tree(
    train: &Dataset,
    params: &TreeParams,
) -> Result<TrainedModel, ModelError> {
    params.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n_classes = train.label_mode().n_classes();
    let columns: Vec<usize> = (0..train.n_features()).collect();
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    let view = train.features().view();
    let root = grow(&view, train.labels(), rows, &columns, n_classes, params, 0);
    Ok(TrainedModel::new(
        ModelState::Tree { root, n_classes },
        train.n_features(),
        train.label_mode(),
        train.node_id(),
    ))
}

fn grow(
    features: &ArrayView2<'_, f64>,
    labels: &[ClassId],
    rows: Vec<usize>,
    columns: &[usize],
    n_classes: usize,
    params: &TreeParams,
    depth: usize,
) -> TreeNode {
    let mut class_counts = vec![0u32; n_classes];
    for &i in &rows {
        class_counts[labels[i]] += 1;
    }
    let pure = class_counts.iter().filter(|&&c| c > 0).count() <= 1;
    let depth_capped = params.max_depth.is_some_and(|cap| depth >= cap);
    if pure || depth_capped || rows.len() < params.min_samples_split {
        return TreeNode::Leaf { class_counts };
    }
    let Some(split) = best_split_indexed(features, labels, &rows, columns, n_classes) else {
        return TreeNode::Leaf { class_counts };
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| features[(i, split.feature_index)] <= split.threshold);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
    TreeNode::Internal {
        feature_index: split.feature_index,
        threshold: split.threshold,
        left: Box::new(grow(
            features, labels, left_rows, columns, n_classes, params, depth + 1,
        )),
        right: Box::new(grow(
            features, labels, right_rows, columns, n_classes, params, depth + 1,
        )),
    }
}

/// Routes a row to its leaf and returns the majority class, lowest id first.
pub(super) fn predict(root: &TreeNode, row: &[f64]) -> ClassId {
    let mut node = root;
    loop {
        match node {
            TreeNode::Leaf { class_counts } => return argmax_lowest(class_counts),
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            } => {
                node = if row[*feature_index] <= *threshold {
                    left
                } else {
                    right
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, LabelMode};
    use ndarray::array;

    #[test]
    fn gini_of_pure_node_is_zero() {
        assert_eq!(gini_impurity(&[5, 0]).unwrap(), 0.0);
    }

    #[test]
    fn gini_of_uniform_two_class_node_is_half() {
        assert_eq!(gini_impurity(&[3, 3]).unwrap(), 0.5);
    }

    #[test]
    fn gini_hand_arithmetic() {
        // 1 - (1/36 + 4/36 + 9/36) = 11/18
        let g = gini_impurity(&[1, 2, 3]).unwrap();
        assert!((g - 11.0 / 18.0).abs() < 1e-15, "got {g}");
    }

    #[test]
    fn gini_rejects_all_zero_counts() {
        assert!(matches!(
            gini_impurity(&[0, 0, 0]),
            Err(ModelError::EmptyClassCounts)
        ));
    }

    #[test]
    fn best_split_on_separated_line() {
        let features = array![[1.0], [2.0], [9.0], [10.0]];
        let split = find_best_split(&features.view(), &[0, 0, 1, 1], &[0]).unwrap();
        assert_eq!(split.feature_index, 0);
        assert_eq!(split.threshold, 5.5);
        assert!((split.impurity_decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_labels_yield_no_split() {
        let features = array![[1.0], [2.0], [3.0]];
        assert_eq!(find_best_split(&features.view(), &[1, 1, 1], &[0]), None);
    }

    #[test]
    fn constant_features_yield_no_split() {
        let features = array![[4.0], [4.0], [4.0], [4.0]];
        assert_eq!(find_best_split(&features.view(), &[0, 1, 0, 1], &[0]), None);
    }

    fn consistent_dataset() -> Dataset {
        Dataset::new(
            array![
                [1.0, 5.0],
                [2.0, 4.0],
                [3.0, 3.0],
                [8.0, 2.0],
                [9.0, 1.0],
                [2.5, 9.0]
            ],
            vec![0, 0, 1, 1, 1, 0],
            vec!["a".into(), "b".into()],
            2,
            LabelMode::Binary,
        )
        .unwrap()
    }

    #[test]
    fn unlimited_depth_memorizes_consistent_data() {
        let ds = consistent_dataset();
        let model = train_decision_tree(&ds, &TreeParams::default()).unwrap();
        for i in 0..ds.n_rows() {
            assert_eq!(model.predict(ds.row(i)).unwrap(), ds.labels()[i]);
        }
        assert_eq!(model.training_node_id(), 2);
    }

    #[test]
    fn depth_zero_is_a_single_majority_leaf() {
        let ds = consistent_dataset();
        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let model = train_decision_tree(&ds, &params).unwrap();
        let ModelState::Tree { root, .. } = model.state() else {
            panic!("expected a tree");
        };
        assert!(matches!(root, TreeNode::Leaf { .. }));
        // Majority class of [0,0,1,1,1,0] is 0 (tie impossible here: 3 vs 3
        // -> lowest class id 0 wins anyway).
        for i in 0..ds.n_rows() {
            assert_eq!(model.predict(ds.row(i)).unwrap(), 0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = consistent_dataset();
        let a = train_decision_tree(&ds, &TreeParams::default()).unwrap();
        let b = train_decision_tree(&ds, &TreeParams::default()).unwrap();
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn leaf_tie_breaks_to_lowest_class() {
        let leaf = TreeNode::Leaf {
            class_counts: vec![2, 2],
        };
        assert_eq!(predict(&leaf, &[0.0]), 0);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let ds = consistent_dataset();
        let params = TreeParams {
            min_samples_split: 100,
            ..TreeParams::default()
        };
        let model = train_decision_tree(&ds, &params).unwrap();
        let ModelState::Tree { root, .. } = model.state() else {
            panic!("expected a tree");
        };
        assert_eq!(root.node_count(), 1);
    }
}
