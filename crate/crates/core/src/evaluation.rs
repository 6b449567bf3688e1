//! Accuracy and timing measurement, cross-node matrices, and model scoring.
//!
//! The scoring pipeline follows the experiment design: per-node accuracy
//! and training time are averaged across nodes weighted by training rows,
//! both averages are min-max normalized across the compared models (time
//! inverted, lower is better), and the final score is the weighted sum of
//! the two normalized values.

use crate::dataset::Dataset;
use crate::models::{ModelError, ModelKind, TrainedModel, TrainerSpec};
use crate::preprocess::{apply_scaler, fit_scaler, PreprocessError};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot measure accuracy on an empty test set")]
    EmptyTestSet,
    #[error("a cross-node matrix needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("values and weights differ in length: {values} vs {weights}")]
    LengthMismatch { values: usize, weights: usize },
    #[error("weights must be non-negative with a positive sum")]
    BadWeights,
    #[error("normalization needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("{what} must lie in [0, 1], got {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("score weights must sum to 1, got {0}")]
    BadScoreWeights(f64),
    #[error("models report different node sets")]
    MismatchedNodeSets,
    #[error("training time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("malformed matrix CSV at line {line}: {reason}")]
    BadMatrixCsv { line: usize, reason: String },
    #[error("malformed metrics CSV at line {line}: {reason}")]
    BadMetricsCsv { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Square grid of accuracies: entry `(i, j)` is the model trained on node
/// `i + 1` evaluated on node `j + 1`'s held-out test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    n_nodes: usize,
    /// Row-major `n_nodes * n_nodes` values, each in `[0, 1]`.
    values: Vec<f64>,
    model_kind: ModelKind,
}

impl AccuracyMatrix {
    pub fn new(n_nodes: usize, values: Vec<f64>, model_kind: ModelKind) -> Result<Self, EvalError> {
        if n_nodes < 2 {
            return Err(EvalError::TooFewNodes(n_nodes));
        }
        if values.len() != n_nodes * n_nodes {
            return Err(EvalError::LengthMismatch {
                values: values.len(),
                weights: n_nodes * n_nodes,
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EvalError::OutOfRange {
                what: "matrix entry",
                value: bad,
            });
        }
        Ok(Self {
            n_nodes,
            values,
            model_kind,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model_kind
    }

    pub fn get(&self, train_node: usize, eval_node: usize) -> f64 {
        self.values[train_node * self.n_nodes + eval_node]
    }

    pub fn row(&self, train_node: usize) -> &[f64] {
        &self.values[train_node * self.n_nodes..(train_node + 1) * self.n_nodes]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.get(i, i)).collect()
    }

    /// One header row, then one row per training node labeled `node_<i>`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("node");
        for j in 1..=self.n_nodes {
            out.push_str(&format!(",node_{j}"));
        }
        out.push('\n');
        for i in 0..self.n_nodes {
            out.push_str(&format!("node_{}", i + 1));
            for v in self.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the layout written by [`AccuracyMatrix::to_csv_string`].
    pub fn from_csv_str(text: &str, model_kind: ModelKind) -> Result<Self, EvalError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(EvalError::BadMatrixCsv {
            line: 1,
            reason: "empty file".into(),
        })?;
        let n_nodes = header.split(',').count() - 1;
        let mut values = Vec::with_capacity(n_nodes * n_nodes);
        let mut rows = 0usize;
        for (idx, line) in lines {
            let mut cells = line.trim_end().split(',');
            let label = cells.next().unwrap_or_default();
            let expected = format!("node_{}", rows + 1);
            if label != expected {
                return Err(EvalError::BadMatrixCsv {
                    line: idx + 1,
                    reason: format!("expected row label {expected:?}, got {label:?}"),
                });
            }
            for cell in cells {
                let v: f64 = cell.trim().parse().map_err(|_| EvalError::BadMatrixCsv {
                    line: idx + 1,
                    reason: format!("bad cell {cell:?}"),
                })?;
                values.push(v);
            }
            rows += 1;
            if values.len() != rows * n_nodes {
                return Err(EvalError::BadMatrixCsv {
                    line: idx + 1,
                    reason: format!("expected {n_nodes} values per row"),
                });
            }
        }
        if rows != n_nodes {
            return Err(EvalError::BadMatrixCsv {
                line: rows + 1,
                reason: format!("expected {n_nodes} rows, found {rows}"),
            });
        }
        Self::new(n_nodes, values, model_kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes infallibly")
    }
}

/// Per-node training outcome: own-test accuracy, wall-clock fit time, and
/// the training-set size used as the node's weight in averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node_id: u32,
    pub accuracy: f64,
    pub training_time_s: f64,
    pub train_rows: usize,
}

impl NodeMetrics {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(EvalError::OutOfRange {
                what: "accuracy",
                value: self.accuracy,
            });
        }
        if !self.training_time_s.is_finite() || self.training_time_s <= 0.0 {
            return Err(EvalError::NonPositiveTime(self.training_time_s));
        }
        Ok(())
    }
}

/// CSV emission for per-node metrics: `node,accuracy,training_time_s,train_rows`.
pub fn node_metrics_to_csv(metrics: &[NodeMetrics]) -> String {
    let mut out = String::from("node,accuracy,training_time_s,train_rows\n");
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{}\n",
            m.node_id, m.accuracy, m.training_time_s, m.train_rows
        ));
    }
    out
}

pub fn node_metrics_from_csv(text: &str) -> Result<Vec<NodeMetrics>, EvalError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    lines.next(); // header
    let mut metrics = Vec::new();
    for (idx, line) in lines {
        let bad = |reason: String| EvalError::BadMetricsCsv {
            line: idx + 1,
            reason,
        };
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != 4 {
            return Err(bad(format!("expected 4 cells, got {}", cells.len())));
        }
        let metric = NodeMetrics {
            node_id: cells[0].parse().map_err(|_| bad(format!("bad node id {:?}", cells[0])))?,
            accuracy: cells[1].parse().map_err(|_| bad(format!("bad accuracy {:?}", cells[1])))?,
            training_time_s: cells[2]
                .parse()
                .map_err(|_| bad(format!("bad time {:?}", cells[2])))?,
            train_rows: cells[3]
                .parse()
                .map_err(|_| bad(format!("bad row count {:?}", cells[3])))?,
        };
        metric.validate()?;
        metrics.push(metric);
    }
    Ok(metrics)
}

/// Relative importance of accuracy versus training time in the final score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub accuracy_weight: f64,
    pub training_time_weight: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            accuracy_weight: 0.5,
            training_time_weight: 0.5,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (what, w) in [
            ("accuracy_weight", self.accuracy_weight),
            ("training_time_weight", self.training_time_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(EvalError::OutOfRange { what, value: w });
            }
        }
        let sum = self.accuracy_weight + self.training_time_weight;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(EvalError::BadScoreWeights(sum));
        }
        Ok(())
    }
}

/// One model's aggregate line in the scorecard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub model: ModelKind,
    pub weighted_avg_accuracy: f64,
    pub weighted_avg_time_s: f64,
    pub normalized_accuracy: f64,
    pub normalized_training_time: f64,
    pub score: f64,
}

/// Model ranking, sorted by descending score. Ties keep the caller's model
/// order, so rankings are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub weights: ScoreWeights,
    pub entries: Vec<ScoreEntry>,
}

impl ScoreCard {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "model,weighted_avg_accuracy,weighted_avg_time_s,normalized_accuracy,normalized_training_time,score\n",
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.model,
                e.weighted_avg_accuracy,
                e.weighted_avg_time_s,
                e.normalized_accuracy,
                e.normalized_training_time,
                e.score
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scorecard serializes infallibly")
    }
}

/// Fraction of test rows the model classifies correctly.
pub fn accuracy(model: &TrainedModel, test: &Dataset) -> Result<f64, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    if test.n_features() != model.n_features() {
        return Err(EvalError::DimensionMismatch {
            expected: model.n_features(),
            found: test.n_features(),
        });
    }
    let predictions = model.predict_batch(test.features())?;
    let hits = predictions
        .iter()
        .zip(test.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / test.n_rows() as f64)
}

/// Fits a model and reports the wall-clock seconds the fit took.
///
/// When the trainer requires standardization the scaler is fitted and
/// applied *outside* the timed region and attached to the returned model,
/// so the measurement covers the fit call only. Run one fit at a time per
/// worker when the numbers feed a scorecard; concurrent training skews the
/// clock.
pub fn timed_train(
    trainer: &TrainerSpec,
    train: &Dataset,
) -> Result<(TrainedModel, f64), EvalError> {
    if trainer.requires_scaling() {
        let scaler = fit_scaler(train)?;
        let scaled = apply_scaler(&scaler, train)?;
        let started = Instant::now();
        let model = trainer.fit(&scaled)?;
        let seconds = started.elapsed().as_secs_f64();
        Ok((model.with_scaler(scaler), seconds))
    } else {
        let started = Instant::now();
        let model = trainer.fit(train)?;
        let seconds = started.elapsed().as_secs_f64();
        Ok((model, seconds))
    }
}

/// Trains one model per node and fills the full accuracy grid.
pub fn cross_node_matrix(
    trainer: &TrainerSpec,
    federation: &[(Dataset, Dataset)],
) -> Result<AccuracyMatrix, EvalError> {
    let models = train_node_models(trainer, federation)?;
    let tests: Vec<&Dataset> = federation.iter().map(|(_, test)| test).collect();
    matrix_from_models(&models, &tests)
}

/// [`cross_node_matrix`] with per-node training fanned out over up to
/// `jobs` worker threads. Cell values are independent of the schedule, so
/// the result is identical to the sequential path.
pub fn cross_node_matrix_parallel(
    trainer: &TrainerSpec,
    federation: &[(Dataset, Dataset)],
    jobs: usize,
) -> Result<AccuracyMatrix, EvalError> {
    if jobs <= 1 || federation.len() < 2 {
        return cross_node_matrix(trainer, federation);
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let next = &next;
    let trained: Vec<(usize, Result<TrainedModel, EvalError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs.min(federation.len()))
            .map(|_| {
                scope.spawn(move || {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= federation.len() {
                            break;
                        }
                        done.push((i, timed_train(trainer, &federation[i].0).map(|(m, _)| m)));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    let mut models: Vec<Option<TrainedModel>> = (0..federation.len()).map(|_| None).collect();
    for (i, result) in trained {
        models[i] = Some(result?);
    }
    let models: Vec<TrainedModel> = models
        .into_iter()
        .map(|m| m.expect("every node index was claimed by a worker"))
        .collect();
    let tests: Vec<&Dataset> = federation.iter().map(|(_, test)| test).collect();
    matrix_from_models(&models, &tests)
}

/// Trains one model per node (scaling per trainer policy), in node order.
pub fn train_node_models(
    trainer: &TrainerSpec,
    federation: &[(Dataset, Dataset)],
) -> Result<Vec<TrainedModel>, EvalError> {
    if federation.len() < 2 {
        return Err(EvalError::TooFewNodes(federation.len()));
    }
    federation
        .iter()
        .map(|(train, _)| timed_train(trainer, train).map(|(m, _)| m))
        .collect()
}

/// Accuracy grid of already-fitted models over per-node test splits.
pub fn matrix_from_models(
    models: &[TrainedModel],
    tests: &[&Dataset],
) -> Result<AccuracyMatrix, EvalError> {
    if models.len() < 2 {
        return Err(EvalError::TooFewNodes(models.len()));
    }
    if models.len() != tests.len() {
        return Err(EvalError::LengthMismatch {
            values: models.len(),
            weights: tests.len(),
        });
    }
    let mut values = Vec::with_capacity(models.len() * models.len());
    for model in models {
        for test in tests {
            values.push(accuracy(model, test)?);
        }
    }
    AccuracyMatrix::new(models.len(), values, models[0].kind())
}

/// [`matrix_from_models`] with rows evaluated on up to `jobs` worker
/// threads. Cells are independent, so the result matches the sequential
/// path exactly.
pub fn matrix_from_models_parallel(
    models: &[TrainedModel],
    tests: &[&Dataset],
    jobs: usize,
) -> Result<AccuracyMatrix, EvalError> {
    if jobs <= 1 {
        return matrix_from_models(models, tests);
    }
    if models.len() < 2 {
        return Err(EvalError::TooFewNodes(models.len()));
    }
    if models.len() != tests.len() {
        return Err(EvalError::LengthMismatch {
            values: models.len(),
            weights: tests.len(),
        });
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let next = &next;
    let rows: Vec<(usize, Result<Vec<f64>, EvalError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs.min(models.len()))
            .map(|_| {
                scope.spawn(move || {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= models.len() {
                            break;
                        }
                        let row: Result<Vec<f64>, EvalError> = tests
                            .iter()
                            .map(|test| accuracy(&models[i], test))
                            .collect();
                        done.push((i, row));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut values = vec![0.0; models.len() * models.len()];
    for (i, row) in rows {
        let row = row?;
        values[i * models.len()..(i + 1) * models.len()].copy_from_slice(&row);
    }
    AccuracyMatrix::new(models.len(), values, models[0].kind())
}

/// Arithmetic mean of each row: how a node's model fares across the whole
/// federation.
pub fn row_average(matrix: &AccuracyMatrix) -> Vec<f64> {
    (0..matrix.n_nodes())
        .map(|i| matrix.row(i).iter().sum::<f64>() / matrix.n_nodes() as f64)
        .collect()
}

/// `sum(w_i v_i) / sum(w_i)` with non-negative weights.
pub fn weighted_average(values: &[f64], weights: &[f64]) -> Result<f64, EvalError> {
    if values.len() != weights.len() {
        return Err(EvalError::LengthMismatch {
            values: values.len(),
            weights: weights.len(),
        });
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(EvalError::BadWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(EvalError::BadWeights);
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total)
}

/// `(v - min) / (max - min)` per value; `invert` flips the result so lower
/// raw values score higher (used for training time). All-equal inputs map
/// to the 0.5 sentinel.
pub fn min_max_normalize(values: &[f64], invert: bool) -> Result<Vec<f64>, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFewValues(values.len()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values
        .iter()
        .map(|v| {
            let n = (v - min) / (max - min);
            if invert {
                1.0 - n
            } else {
                n
            }
        })
        .collect())
}

/// Weighted sum of the two normalized metrics.
pub fn score(
    normalized_accuracy: f64,
    normalized_training_time: f64,
    weights: &ScoreWeights,
) -> Result<f64, EvalError> {
    weights.validate()?;
    for (what, v) in [
        ("normalized_accuracy", normalized_accuracy),
        ("normalized_training_time", normalized_training_time),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(EvalError::OutOfRange { what, value: v });
        }
    }
    Ok(weights.accuracy_weight * normalized_accuracy
        + weights.training_time_weight * normalized_training_time)
}

/// Full scoring pipeline over per-model, per-node metrics.
///
/// Every model must report the same node set. Node weights are the per-node
/// training row counts. The returned entries are sorted by descending
/// score.
pub fn score_models(
    per_model: &[(ModelKind, Vec<NodeMetrics>)],
    weights: &ScoreWeights,
) -> Result<ScoreCard, EvalError> {
    weights.validate()?;
    if per_model.len() < 2 {
        return Err(EvalError::TooFewValues(per_model.len()));
    }
    let node_set = |metrics: &[NodeMetrics]| {
        let mut ids: Vec<u32> = metrics.iter().map(|m| m.node_id).collect();
        ids.sort_unstable();
        ids
    };
    let reference = node_set(&per_model[0].1);
    if reference.is_empty() {
        return Err(EvalError::TooFewValues(0));
    }
    for (_, metrics) in per_model {
        for m in metrics {
            m.validate()?;
        }
        if node_set(metrics) != reference {
            return Err(EvalError::MismatchedNodeSets);
        }
    }

    let mut avg_accuracies = Vec::with_capacity(per_model.len());
    let mut avg_times = Vec::with_capacity(per_model.len());
    for (_, metrics) in per_model {
        let rows: Vec<f64> = metrics.iter().map(|m| m.train_rows as f64).collect();
        let accs: Vec<f64> = metrics.iter().map(|m| m.accuracy).collect();
        let times: Vec<f64> = metrics.iter().map(|m| m.training_time_s).collect();
        avg_accuracies.push(weighted_average(&accs, &rows)?);
        avg_times.push(weighted_average(&times, &rows)?);
    }
    let normalized_accuracies = min_max_normalize(&avg_accuracies, false)?;
    let normalized_times = min_max_normalize(&avg_times, true)?;

    let mut entries = Vec::with_capacity(per_model.len());
    for (i, (kind, _)) in per_model.iter().enumerate() {
        entries.push(ScoreEntry {
            model: *kind,
            weighted_avg_accuracy: avg_accuracies[i],
            weighted_avg_time_s: avg_times[i],
            normalized_accuracy: normalized_accuracies[i],
            normalized_training_time: normalized_times[i],
            score: score(normalized_accuracies[i], normalized_times[i], weights)?,
        });
    }
    entries.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));
    Ok(ScoreCard {
        weights: *weights,
        entries,
    })
}

/// One row of the plot-ready long format: `model,node,metric,value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub model: String,
    pub node: String,
    pub metric: String,
    pub value: f64,
}

pub fn long_rows_to_csv(rows: &[LongRow]) -> String {
    let mut out = String::from("model,node,metric,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.model, r.node, r.metric, r.value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabelMode, SplitSpec, SyntheticFederationSpec};
    use crate::models::{KnnParams, TreeParams};

    fn labeled_dataset(labels: Vec<usize>) -> Dataset {
        let n = labels.len();
        let features = ndarray::Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::new(
            features,
            labels,
            vec!["a".into(), "b".into()],
            1,
            LabelMode::Binary,
        )
        .unwrap()
    }

    #[test]
    fn constant_predictor_scores_half_on_balanced_labels() {
        // A depth-0 tree on [0,0,1,1] predicts the tie-broken class 0.
        let ds = labeled_dataset(vec![0, 0, 1, 1]);
        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let model = crate::models::train_decision_tree(&ds, &params).unwrap();
        assert_eq!(accuracy(&model, &ds).unwrap(), 0.5);
    }

    #[test]
    fn perfect_model_scores_one() {
        let ds = labeled_dataset(vec![0, 0, 1, 1]);
        let model = crate::models::train_decision_tree(&ds, &TreeParams::default()).unwrap();
        assert_eq!(accuracy(&model, &ds).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_matches_a_row_by_row_count() {
        let spec = SyntheticFederationSpec {
            n_nodes: 2,
            rows_per_node: 50,
            n_features: 4,
            n_classes: 3,
            ..SyntheticFederationSpec::new(50, 21)
        };
        let nodes = crate::dataset::generate_synthetic_federation(&spec).unwrap();
        let model =
            crate::models::train_decision_tree(&nodes[0], &TreeParams::default()).unwrap();
        let test = &nodes[1];
        let computed = accuracy(&model, test).unwrap();
        let mut hits = 0usize;
        for i in 0..test.n_rows() {
            if model.predict(test.row(i)).unwrap() == test.labels()[i] {
                hits += 1;
            }
        }
        assert_eq!(computed, hits as f64 / test.n_rows() as f64);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let ds = labeled_dataset(vec![0, 1, 0, 1]);
        let model = crate::models::train_decision_tree(&ds, &TreeParams::default()).unwrap();
        let empty = ds.select_rows(&[]);
        assert!(matches!(accuracy(&model, &empty), Err(EvalError::EmptyTestSet)));
    }

    #[test]
    fn timed_train_reports_positive_time_and_attaches_scaler() {
        let ds = labeled_dataset(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let (tree, t) = timed_train(&TrainerSpec::tree(TreeParams::default()), &ds).unwrap();
        assert!(t > 0.0);
        assert!(t < 1.0, "tiny tree fit took {t} s");
        assert!(tree.scaler().is_none());
        let (knn, t) =
            timed_train(&TrainerSpec::knn(KnnParams { k: 1, ..KnnParams::default() }), &ds)
                .unwrap();
        assert!(t > 0.0);
        assert!(knn.scaler().is_some());
    }

    #[test]
    fn knn_fit_time_stays_roughly_flat_when_rows_double() {
        // KNN is a lazy learner: fitting stores the matrix, so doubling the
        // rows must not blow up the fit time. The bound is generous to stay
        // robust against scheduler noise.
        let build = |rows: usize| {
            let features = ndarray::Array2::from_shape_fn((rows, 20), |(i, j)| {
                ((i * 31 + j * 7) % 97) as f64
            });
            let labels = (0..rows).map(|i| i % 2).collect();
            let names = (0..20).map(|j| format!("f{j}")).collect();
            Dataset::new(features, labels, names, 1, LabelMode::Binary).unwrap()
        };
        let trainer = TrainerSpec::knn(KnnParams::default());
        // Warm up allocator paths, then take the minimum of several
        // measurements; single samples are dominated by scheduler noise
        // when the whole suite runs in parallel.
        let _ = timed_train(&trainer, &build(1000)).unwrap();
        let sample = |rows: usize| {
            let ds = build(rows);
            (0..5)
                .map(|_| timed_train(&trainer, &ds).unwrap().1)
                .fold(f64::INFINITY, f64::min)
        };
        let small = sample(30_000);
        let large = sample(60_000);
        assert!(
            large / small < 5.0,
            "doubling rows scaled fit time {small} s -> {large} s"
        );
    }

    #[test]
    fn identical_nodes_give_a_flat_matrix() {
        let ds = labeled_dataset(vec![0, 0, 1, 1, 0, 1]);
        let (train, test) = crate::dataset::split(&ds, &SplitSpec::new(3)).unwrap();
        let federation = vec![
            (train.clone(), test.clone()),
            (train.clone(), test.clone()),
            (train, test),
        ];
        let matrix =
            cross_node_matrix(&TrainerSpec::tree(TreeParams::default()), &federation).unwrap();
        let first = matrix.get(0, 0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((matrix.get(i, j) - first).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_node_matrix_equals_manual_calls() {
        let spec = SyntheticFederationSpec {
            n_nodes: 2,
            rows_per_node: 60,
            n_features: 3,
            n_classes: 3,
            class_separation: 4.0,
            ..SyntheticFederationSpec::new(60, 8)
        };
        let nodes = crate::dataset::generate_synthetic_federation(&spec).unwrap();
        let federation: Vec<(Dataset, Dataset)> = nodes
            .iter()
            .map(|ds| crate::dataset::split(ds, &SplitSpec::new(5)).unwrap())
            .collect();
        let trainer = TrainerSpec::tree(TreeParams::default());
        let matrix = cross_node_matrix(&trainer, &federation).unwrap();

        for i in 0..2 {
            let (model, _) = timed_train(&trainer, &federation[i].0).unwrap();
            for (j, (_, test)) in federation.iter().enumerate() {
                let manual = accuracy(&model, test).unwrap();
                assert_eq!(matrix.get(i, j), manual);
            }
        }
    }

    #[test]
    fn parallel_matrix_equals_sequential() {
        let spec = SyntheticFederationSpec {
            n_nodes: 4,
            rows_per_node: 40,
            n_features: 3,
            n_classes: 3,
            ..SyntheticFederationSpec::new(40, 13)
        };
        let nodes = crate::dataset::generate_synthetic_federation(&spec).unwrap();
        let federation: Vec<(Dataset, Dataset)> = nodes
            .iter()
            .map(|ds| crate::dataset::split(ds, &SplitSpec::new(5)).unwrap())
            .collect();
        let trainer = TrainerSpec::tree(TreeParams::default());
        let sequential = cross_node_matrix(&trainer, &federation).unwrap();
        let parallel = cross_node_matrix_parallel(&trainer, &federation, 3).unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn row_average_uniform_matrix() {
        let matrix = AccuracyMatrix::new(3, vec![0.5; 9], ModelKind::Tree).unwrap();
        assert_eq!(row_average(&matrix), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn weighted_average_cases() {
        assert_eq!(weighted_average(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5);
        let uniform = weighted_average(&[0.2, 0.4, 0.9], &[1.0, 1.0, 1.0]).unwrap();
        assert!((uniform - 0.5).abs() < 1e-15);
        let skewed = weighted_average(&[0.9, 0.99], &[100.0, 900.0]).unwrap();
        assert!((skewed - 0.981).abs() < 1e-12, "got {skewed}");
        assert!(matches!(
            weighted_average(&[1.0], &[0.0]),
            Err(EvalError::BadWeights)
        ));
        assert!(matches!(
            weighted_average(&[1.0], &[1.0, 2.0]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn min_max_normalize_cases() {
        let inverted = min_max_normalize(&[11.0, 50.0, 400.0], true).unwrap();
        assert_eq!(inverted[0], 1.0);
        assert!((inverted[1] - (1.0 - 39.0 / 389.0)).abs() < 1e-12);
        assert_eq!(inverted[2], 0.0);
        assert_eq!(min_max_normalize(&[0.2, 0.8], false).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            min_max_normalize(&[3.0, 3.0, 3.0], false).unwrap(),
            vec![0.5, 0.5, 0.5]
        );
        assert!(matches!(
            min_max_normalize(&[1.0], false),
            Err(EvalError::TooFewValues(1))
        ));
    }

    #[test]
    fn score_cases() {
        let w = ScoreWeights::default();
        assert_eq!(score(1.0, 1.0, &w).unwrap(), 1.0);
        assert_eq!(score(1.0, 0.0, &w).unwrap(), 0.5);
        let s = score(0.974, 0.900, &w).unwrap();
        assert!((s - 0.937).abs() < 1e-12, "got {s}");
        assert!(score(1.2, 0.0, &w).is_err());
        let bad = ScoreWeights {
            accuracy_weight: 0.7,
            training_time_weight: 0.5,
        };
        assert!(score(1.0, 1.0, &bad).is_err());
    }

    #[test]
    fn identical_models_score_equally() {
        let metrics = vec![
            NodeMetrics {
                node_id: 1,
                accuracy: 0.9,
                training_time_s: 10.0,
                train_rows: 100,
            },
            NodeMetrics {
                node_id: 2,
                accuracy: 0.8,
                training_time_s: 12.0,
                train_rows: 200,
            },
        ];
        let card = score_models(
            &[
                (ModelKind::Tree, metrics.clone()),
                (ModelKind::Knn, metrics),
            ],
            &ScoreWeights::default(),
        )
        .unwrap();
        assert_eq!(card.entries[0].score, card.entries[1].score);
        assert_eq!(card.entries[0].score, 0.5);
    }

    #[test]
    fn three_model_fixture_matches_hand_computation() {
        // Two nodes weighted 100/300 rows.
        let metrics = |a1: f64, a2: f64, t1: f64, t2: f64| {
            vec![
                NodeMetrics {
                    node_id: 1,
                    accuracy: a1,
                    training_time_s: t1,
                    train_rows: 100,
                },
                NodeMetrics {
                    node_id: 2,
                    accuracy: a2,
                    training_time_s: t2,
                    train_rows: 300,
                },
            ]
        };
        let card = score_models(
            &[
                (ModelKind::Tree, metrics(0.9, 0.8, 10.0, 30.0)),
                (ModelKind::Knn, metrics(0.7, 0.9, 20.0, 20.0)),
                (ModelKind::Logistic, metrics(0.5, 0.6, 5.0, 9.0)),
            ],
            &ScoreWeights::default(),
        )
        .unwrap();
        // Weighted averages: tree (0.825, 25 s), knn (0.85, 20 s),
        // logistic (0.575, 8 s). Normalized accuracy: (0.90909.., 1, 0);
        // inverted time: (0, 5/17, 1). Scores: 5/11, 11/17, 1/2.
        let by_kind = |kind: ModelKind| {
            *card
                .entries
                .iter()
                .find(|e| e.model == kind)
                .expect("present")
        };
        let tree = by_kind(ModelKind::Tree);
        let knn = by_kind(ModelKind::Knn);
        let logistic = by_kind(ModelKind::Logistic);
        assert!((tree.weighted_avg_accuracy - 0.825).abs() < 1e-12);
        assert!((tree.weighted_avg_time_s - 25.0).abs() < 1e-12);
        assert!((tree.score - 5.0 / 11.0).abs() < 1e-12);
        assert!((knn.score - 11.0 / 17.0).abs() < 1e-12);
        assert!((logistic.score - 0.5).abs() < 1e-12);
        // Sorted descending: knn, logistic, tree.
        assert_eq!(card.entries[0].model, ModelKind::Knn);
        assert_eq!(card.entries[1].model, ModelKind::Logistic);
        assert_eq!(card.entries[2].model, ModelKind::Tree);
    }

    #[test]
    fn mismatched_node_sets_are_rejected() {
        let a = vec![NodeMetrics { node_id: 1, accuracy: 0.9, training_time_s: 1.0, train_rows: 10 },
                     NodeMetrics { node_id: 2, accuracy: 0.9, training_time_s: 1.0, train_rows: 10 }];
        let b = vec![NodeMetrics { node_id: 1, accuracy: 0.9, training_time_s: 1.0, train_rows: 10 },
                     NodeMetrics { node_id: 3, accuracy: 0.9, training_time_s: 1.0, train_rows: 10 }];
        assert!(matches!(
            score_models(
                &[(ModelKind::Tree, a), (ModelKind::Knn, b)],
                &ScoreWeights::default()
            ),
            Err(EvalError::MismatchedNodeSets)
        ));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let matrix = AccuracyMatrix::new(
            2,
            vec![1.0, 0.25, 0.125, 0.9990234375],
            ModelKind::Knn,
        )
        .unwrap();
        let csv = matrix.to_csv_string();
        assert!(csv.starts_with("node,node_1,node_2\nnode_1,"));
        let back = AccuracyMatrix::from_csv_str(&csv, ModelKind::Knn).unwrap();
        assert_eq!(matrix, back);
    }

    #[test]
    fn metrics_csv_round_trip() {
        let metrics = vec![
            NodeMetrics { node_id: 1, accuracy: 0.75, training_time_s: 0.125, train_rows: 80 },
            NodeMetrics { node_id: 2, accuracy: 1.0, training_time_s: 2.5, train_rows: 160 },
        ];
        let csv = node_metrics_to_csv(&metrics);
        assert_eq!(node_metrics_from_csv(&csv).unwrap(), metrics);
    }

    #[test]
    fn matrix_rejects_out_of_range_entries() {
        assert!(matches!(
            AccuracyMatrix::new(2, vec![0.0, 0.5, 1.0, 1.5], ModelKind::Tree),
            Err(EvalError::OutOfRange { .. })
        ));
    }

    #[test]
    fn matrix_determinism_over_repeated_evaluation() {
        let ds = labeled_dataset(vec![0, 0, 1, 1, 0, 1, 0, 1]);
        let (train, test) = crate::dataset::split(&ds, &SplitSpec::new(2)).unwrap();
        let federation = vec![(train.clone(), test.clone()), (train, test)];
        let trainer = TrainerSpec::tree(TreeParams::default());
        let a = cross_node_matrix(&trainer, &federation).unwrap();
        let b = cross_node_matrix(&trainer, &federation).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_rows_render_as_csv() {
        let rows = vec![LongRow {
            model: "tree".into(),
            node: "node_1".into(),
            metric: "accuracy".into(),
            value: 0.75,
        }];
        assert_eq!(
            long_rows_to_csv(&rows),
            "model,node,metric,value\ntree,node_1,accuracy,0.75\n"
        );
    }
}
