//! Native lightweight classifiers behind one trainer contract.
//!
//! Three model families are retained for the federation experiments: a CART
//! decision tree, k-nearest neighbors, and multinomial logistic regression.
//! All three train deterministically, predict with deterministic tie-breaks
//! (the lowest class id always wins a tie), and serialize to a versioned
//! binary layout suitable for model-update exchange.
//!
//! [`TrainerSpec`] is the registry seam: every consumer that trains models
//! (timing, cross-node matrices, federation rounds) dispatches through it,
//! so adding a model family is a local change.

mod codec;
mod knn;
mod logistic;
mod tree;

pub use codec::{deserialize_model, serialize_model, FORMAT_VERSION, MAGIC};
pub use knn::train_knn;
pub use logistic::{loss_and_gradient, softmax, train_logistic};
pub use tree::{find_best_split, gini_impurity, train_decision_tree, SplitCandidate, TreeNode};

use crate::dataset::{ClassId, Dataset, LabelMode};
use crate::preprocess::{PreprocessError, Scaler};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("class counts are all zero")]
    EmptyClassCounts,
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("training data contains a single class; at least 2 are required")]
    SingleClass,
    #[error("k = {k} exceeds the {rows} training rows")]
    KExceedsRows { k: usize, rows: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("expected a row of {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model payload is truncated")]
    Truncated,
    #[error("bad magic bytes; not a serialized model")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u16),
    #[error("model payload is corrupted: {0}")]
    Corrupted(String),
    #[error("model payload checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Model family tag used by reports, matrices, and file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Knn,
    Logistic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Tree, ModelKind::Knn, ModelKind::Logistic];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Knn => "knn",
            ModelKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(ModelKind::Tree),
            "knn" => Ok(ModelKind::Knn),
            "logistic" => Ok(ModelKind::Logistic),
            other => Err(format!("unknown model kind {other:?} (expected tree, knn, or logistic)")),
        }
    }
}

/// CART split quality criterion. Only Gini impurity is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    #[default]
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Depth cap; `None` grows until purity or the other stops. Depth 0
    /// yields a single leaf.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub criterion: SplitCriterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            criterion: SplitCriterion::Gini,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_samples_split < 2 {
            return Err(ModelError::InvalidParam(format!(
                "min_samples_split must be at least 2, got {}",
                self.min_samples_split
            )));
        }
        Ok(())
    }
}

/// Distance used by KNN. Only Euclidean is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    /// Neighbor count; odd, at least 1, and at most the training row count.
    pub k: usize,
    pub metric: DistanceMetric,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 5,
            metric: DistanceMetric::Euclidean,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::InvalidParam("k must be at least 1".into()));
        }
        if self.k.is_multiple_of(2) {
            return Err(ModelError::InvalidParam(format!(
                "k must be odd to limit vote ties, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty weight on the full coefficient matrix.
    pub l2: f64,
    /// Early-stop threshold on the absolute loss delta between epochs.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            tolerance: 1e-6,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidParam("epochs must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "l2 must be non-negative and finite, got {}",
                self.l2
            )));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "tolerance must be non-negative and finite, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// One trainable model configuration; the unit the evaluation and
/// federation layers are parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrainerSpec {
    Tree {
        params: TreeParams,
        /// Standardize features before fitting. Off by default: tree splits
        /// are invariant to monotone per-column rescaling.
        scale: bool,
    },
    Knn(KnnParams),
    Logistic(LogisticParams),
}

impl TrainerSpec {
    pub fn tree(params: TreeParams) -> Self {
        TrainerSpec::Tree { params, scale: false }
    }

    pub fn knn(params: KnnParams) -> Self {
        TrainerSpec::Knn(params)
    }

    pub fn logistic(params: LogisticParams) -> Self {
        TrainerSpec::Logistic(params)
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Tree => Self::tree(TreeParams::default()),
            ModelKind::Knn => Self::knn(KnnParams::default()),
            ModelKind::Logistic => Self::logistic(LogisticParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainerSpec::Tree { .. } => ModelKind::Tree,
            TrainerSpec::Knn(_) => ModelKind::Knn,
            TrainerSpec::Logistic(_) => ModelKind::Logistic,
        }
    }

    /// Whether features must be standardized before fitting. Mandatory for
    /// the distance-based and gradient-based models, opt-in for trees.
    pub fn requires_scaling(&self) -> bool {
        match self {
            TrainerSpec::Tree { scale, .. } => *scale,
            TrainerSpec::Knn(_) | TrainerSpec::Logistic(_) => true,
        }
    }

    /// Fits on the given data as-is. Scaling, when required, is the
    /// caller's job (see `evaluation::timed_train`), so that timing can
    /// exclude it and the fitted scaler can be attached to the model.
    pub fn fit(&self, train: &Dataset) -> Result<TrainedModel, ModelError> {
        match self {
            TrainerSpec::Tree { params, .. } => train_decision_tree(train, params),
            TrainerSpec::Knn(params) => train_knn(train, params),
            TrainerSpec::Logistic(params) => train_logistic(train, params),
        }
    }
}

/// Fitted state of one model family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModelState {
    Tree {
        root: TreeNode,
        n_classes: usize,
    },
    Knn {
        features: Array2<f64>,
        labels: Vec<ClassId>,
        k: usize,
    },
    Logistic {
        /// `n_classes x (n_features + 1)`; the last column is the bias.
        weights: Array2<f64>,
    },
}

/// A fitted classifier plus everything needed to apply it elsewhere:
/// feature arity, label mode, the node that trained it, and the
/// standardization statistics when the trainer required scaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    state: ModelState,
    n_features: usize,
    label_mode: LabelMode,
    training_node_id: u32,
    scaler: Option<Scaler>,
}

impl TrainedModel {
    pub(crate) fn new(
        state: ModelState,
        n_features: usize,
        label_mode: LabelMode,
        training_node_id: u32,
    ) -> Self {
        Self {
            state,
            n_features,
            label_mode,
            training_node_id,
            scaler: None,
        }
    }

    /// Attaches train-fitted standardization; `predict` then transforms
    /// every input row before classifying it.
    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.state {
            ModelState::Tree { .. } => ModelKind::Tree,
            ModelState::Knn { .. } => ModelKind::Knn,
            ModelState::Logistic { .. } => ModelKind::Logistic,
        }
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.label_mode.n_classes()
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn training_node_id(&self) -> u32 {
        self.training_node_id
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    /// Classifies one row. Ties always resolve to the lowest class id.
    pub fn predict(&self, row: &[f64]) -> Result<ClassId, ModelError> {
        if row.len() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let scaled;
        let row = match &self.scaler {
            Some(s) => {
                scaled = s.transform_row(row)?;
                &scaled[..]
            }
            None => row,
        };
        Ok(match &self.state {
            ModelState::Tree { root, .. } => tree::predict(root, row),
            ModelState::Knn { features, labels, k } => {
                knn::predict(features, labels, *k, self.n_classes(), row)
            }
            ModelState::Logistic { weights } => logistic::predict(weights, row),
        })
    }

    /// Row-wise [`TrainedModel::predict`] over a matrix.
    pub fn predict_batch(&self, rows: &Array2<f64>) -> Result<Vec<ClassId>, ModelError> {
        let flat = rows.as_slice().ok_or_else(|| {
            ModelError::Corrupted("prediction input must be in standard layout".into())
        })?;
        let w = rows.ncols();
        (0..rows.nrows())
            .map(|i| self.predict(&flat[i * w..(i + 1) * w]))
            .collect()
    }

    /// One-way JSON dump for inspection; the binary codec is the transport.
    pub fn debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes infallibly")
    }
}

/// Index of the largest value; the first (lowest) index wins ties.
pub(crate) fn argmax_lowest<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}
