//! The simulated federation: local training rounds, model-update exchange,
//! majority-vote aggregation at the edge, and communication accounting.
//!
//! The node boundary is structural: the only artifact that travels from a
//! node to the edge is a [`ModelUpdate`], which carries serialized model
//! bytes plus scalar metadata and no feature rows. Aggregation is one-shot
//! ensembling of the local models; [`run_federation`] exposes a round count
//! as the seam for future iterative schemes but defaults to a single round.

use crate::dataset::Dataset;
use crate::evaluation::{
    matrix_from_models, row_average, timed_train, AccuracyMatrix, EvalError, NodeMetrics,
};
use crate::models::{deserialize_model, serialize_model, ModelError, TrainedModel, TrainerSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("node {node}: {source}")]
    NodeTraining {
        node: u32,
        #[source]
        source: EvalError,
    },
    #[error("cannot aggregate zero updates")]
    NoUpdates,
    #[error("duplicate update from node {0}")]
    DuplicateNode(u32),
    #[error("update from node {node} is invalid: {reason}")]
    BadUpdate { node: u32, reason: String },
    #[error("ensemble members are incompatible: {0}")]
    IncompatibleMembers(String),
    #[error("member weights are invalid: {0}")]
    BadMemberWeights(String),
    #[error("expected {expected} {what}, got {found}")]
    CardinalityMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("rounds must be at least 1")]
    ZeroRounds,
    #[error("raw training data reported as zero bytes")]
    ZeroRawBytes,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// What a node sends to the edge: serialized model bytes plus scalar
/// bookkeeping. Feature rows never appear here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelUpdate {
    pub node_id: u32,
    pub payload: Vec<u8>,
    pub payload_bytes: usize,
    pub training_time_s: f64,
    pub train_rows: usize,
}

impl ModelUpdate {
    pub fn metrics(&self, own_test_accuracy: f64) -> NodeMetrics {
        NodeMetrics {
            node_id: self.node_id,
            accuracy: own_test_accuracy,
            training_time_s: self.training_time_s,
            train_rows: self.train_rows,
        }
    }
}

/// One local training round: fit on the node's train split (scaling per the
/// trainer's policy), serialize, and measure. The update leaves the node;
/// the raw features do not.
pub fn local_train_round(
    train: &Dataset,
    trainer: &TrainerSpec,
) -> Result<ModelUpdate, FederationError> {
    let (model, training_time_s) =
        timed_train(trainer, train).map_err(|source| FederationError::NodeTraining {
            node: train.node_id(),
            source,
        })?;
    let payload = serialize_model(&model);
    Ok(ModelUpdate {
        node_id: train.node_id(),
        payload_bytes: payload.len(),
        payload,
        training_time_s,
        train_rows: train.n_rows(),
    })
}

/// How member votes are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingPolicy {
    /// Every member counts once. This is the reproduction default.
    #[default]
    Equal,
    /// Extension, not part of the reproduced setup: weight each member by
    /// its own-node diagonal accuracy.
    Diagonal,
}

/// Majority-vote ensemble of the local models, in node-id order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleModel {
    members: Vec<TrainedModel>,
    member_weights: Vec<f64>,
}

impl EnsembleModel {
    pub fn new(members: Vec<TrainedModel>) -> Result<Self, FederationError> {
        let weights = vec![1.0; members.len()];
        Self::with_weights(members, weights)
    }

    pub fn with_weights(
        members: Vec<TrainedModel>,
        member_weights: Vec<f64>,
    ) -> Result<Self, FederationError> {
        if members.is_empty() {
            return Err(FederationError::NoUpdates);
        }
        let n_features = members[0].n_features();
        let label_mode = members[0].label_mode();
        for m in &members[1..] {
            if m.n_features() != n_features {
                return Err(FederationError::IncompatibleMembers(format!(
                    "feature arity {} vs {}",
                    m.n_features(),
                    n_features
                )));
            }
            if m.label_mode() != label_mode {
                return Err(FederationError::IncompatibleMembers(format!(
                    "label mode {} vs {}",
                    m.label_mode(),
                    label_mode
                )));
            }
        }
        if member_weights.len() != members.len() {
            return Err(FederationError::BadMemberWeights(format!(
                "{} weights for {} members",
                member_weights.len(),
                members.len()
            )));
        }
        if member_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(FederationError::BadMemberWeights(
                "weights must be non-negative and finite".into(),
            ));
        }
        if member_weights.iter().sum::<f64>() <= 0.0 {
            return Err(FederationError::BadMemberWeights(
                "weights must have a positive sum".into(),
            ));
        }
        Ok(Self {
            members,
            member_weights,
        })
    }

    pub fn members(&self) -> &[TrainedModel] {
        &self.members
    }

    pub fn member_weights(&self) -> &[f64] {
        &self.member_weights
    }

    pub fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.members[0].n_classes()
    }

    /// Every member votes its predicted class with its weight; the class
    /// with the highest tally wins, ties to the lowest class id. Equal
    /// weights make this invariant under member permutation.
    pub fn predict(&self, row: &[f64]) -> Result<usize, FederationError> {
        let mut tally = vec![0.0f64; self.n_classes()];
        for (member, &weight) in self.members.iter().zip(&self.member_weights) {
            let vote = member.predict(row)?;
            tally[vote] += weight;
        }
        let mut best = 0;
        for c in 1..tally.len() {
            if tally[c] > tally[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Fraction of test rows the ensemble classifies correctly.
    pub fn accuracy(&self, test: &Dataset) -> Result<f64, FederationError> {
        if test.is_empty() {
            return Err(EvalError::EmptyTestSet.into());
        }
        let mut hits = 0usize;
        for (i, &label) in test.labels().iter().enumerate() {
            if self.predict(test.row(i))? == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / test.n_rows() as f64)
    }
}

/// Deserializes updates into an equal-weight ensemble, members sorted by
/// node id so update arrival order cannot matter.
pub fn aggregate(updates: &[ModelUpdate]) -> Result<EnsembleModel, FederationError> {
    if updates.is_empty() {
        return Err(FederationError::NoUpdates);
    }
    let mut ordered: Vec<&ModelUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.node_id);
    for pair in ordered.windows(2) {
        if pair[0].node_id == pair[1].node_id {
            return Err(FederationError::DuplicateNode(pair[0].node_id));
        }
    }
    let members = ordered
        .into_iter()
        .map(|update| {
            if update.payload_bytes != update.payload.len() {
                return Err(FederationError::BadUpdate {
                    node: update.node_id,
                    reason: format!(
                        "payload_bytes says {} but the payload is {} bytes",
                        update.payload_bytes,
                        update.payload.len()
                    ),
                });
            }
            deserialize_model(&update.payload).map_err(|e| FederationError::BadUpdate {
                node: update.node_id,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    EnsembleModel::new(members)
}

/// Weights for [`WeightingPolicy::Diagonal`]: each member's own-node accuracy.
pub fn diagonal_weights(matrix: &AccuracyMatrix) -> Vec<f64> {
    matrix.diagonal()
}

/// Byte accounting for one aggregation round: what the nodes actually sent
/// (model updates) against what shipping their training splits as CSV would
/// have cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunicationSummary {
    pub total_update_bytes: u64,
    pub total_raw_train_bytes: u64,
    pub ratio: f64,
}

pub fn communication_cost(
    updates: &[ModelUpdate],
    raw_train_bytes: &[usize],
) -> Result<CommunicationSummary, FederationError> {
    if updates.is_empty() {
        return Err(FederationError::NoUpdates);
    }
    if updates.len() != raw_train_bytes.len() {
        return Err(FederationError::CardinalityMismatch {
            what: "raw byte sizes",
            expected: updates.len(),
            found: raw_train_bytes.len(),
        });
    }
    let total_update_bytes: u64 = updates.iter().map(|u| u.payload_bytes as u64).sum();
    let total_raw_train_bytes: u64 = raw_train_bytes.iter().map(|&b| b as u64).sum();
    if total_raw_train_bytes == 0 {
        return Err(FederationError::ZeroRawBytes);
    }
    Ok(CommunicationSummary {
        total_update_bytes,
        total_raw_train_bytes,
        ratio: total_update_bytes as f64 / total_raw_train_bytes as f64,
    })
}

/// Per-node comparison of the locally trained models against the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub node_id: u32,
    /// Row average of the member-model matrix: how the model trained on
    /// this node fares across the whole federation.
    pub avg_accuracy_per_node: f64,
    /// Ensemble accuracy on this node's test split; absent when the report
    /// was built from a matrix alone.
    pub ensemble_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationReport {
    pub nodes: Vec<NodeOutcome>,
    pub communication: Option<CommunicationSummary>,
}

impl FederationReport {
    /// Report with only the local-model column, for runs driven by a stored
    /// accuracy matrix rather than live models.
    pub fn from_row_averages(matrix: &AccuracyMatrix) -> Self {
        let nodes = row_average(matrix)
            .into_iter()
            .enumerate()
            .map(|(i, avg)| NodeOutcome {
                node_id: (i + 1) as u32,
                avg_accuracy_per_node: avg,
                ensemble_accuracy: None,
            })
            .collect();
        Self {
            nodes,
            communication: None,
        }
    }

    pub fn with_communication(mut self, summary: CommunicationSummary) -> Self {
        self.communication = Some(summary);
        self
    }

    /// `node,avg_accuracy_per_node,ensemble_accuracy` rows; the ensemble
    /// cell is empty when unavailable.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("node,avg_accuracy_per_node,ensemble_accuracy\n");
        for n in &self.nodes {
            let ensemble = n
                .ensemble_accuracy
                .map(|v| format!("{v}"))
                .unwrap_or_default();
            out.push_str(&format!("{},{},{ensemble}\n", n.node_id, n.avg_accuracy_per_node));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes infallibly")
    }
}

/// Compares the ensemble against each node's locally trained model: per
/// node `j`, the row average of the member matrix next to the ensemble's
/// accuracy on node `j`'s test split.
pub fn evaluate_federation(
    ensemble: &EnsembleModel,
    matrix: &AccuracyMatrix,
    tests: &[&Dataset],
) -> Result<FederationReport, FederationError> {
    if ensemble.members().len() != matrix.n_nodes() {
        return Err(FederationError::CardinalityMismatch {
            what: "matrix rows",
            expected: ensemble.members().len(),
            found: matrix.n_nodes(),
        });
    }
    if ensemble.members().len() != tests.len() {
        return Err(FederationError::CardinalityMismatch {
            what: "test sets",
            expected: ensemble.members().len(),
            found: tests.len(),
        });
    }
    let averages = row_average(matrix);
    let mut nodes = Vec::with_capacity(tests.len());
    for (j, test) in tests.iter().enumerate() {
        nodes.push(NodeOutcome {
            node_id: test.node_id(),
            avg_accuracy_per_node: averages[j],
            ensemble_accuracy: Some(ensemble.accuracy(test)?),
        });
    }
    Ok(FederationReport {
        nodes,
        communication: None,
    })
}

/// Everything one simulated aggregation produces.
#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub updates: Vec<ModelUpdate>,
    pub ensemble: EnsembleModel,
    pub matrix: AccuracyMatrix,
    pub report: FederationReport,
}

/// Runs the whole loop over `(train, test)` pairs: local rounds, update
/// aggregation, the member accuracy matrix, the per-node report, and the
/// communication summary. `rounds` is the retrain/re-aggregate seam; the
/// one-shot scheme reproduced here uses 1.
pub fn run_federation(
    trainer: &TrainerSpec,
    federation: &[(Dataset, Dataset)],
    weighting: WeightingPolicy,
    rounds: usize,
) -> Result<FederationOutcome, FederationError> {
    if rounds == 0 {
        return Err(FederationError::ZeroRounds);
    }
    let mut updates = Vec::new();
    for _ in 0..rounds {
        updates = federation
            .iter()
            .map(|(train, _)| local_train_round(train, trainer))
            .collect::<Result<Vec<_>, _>>()?;
    }
    let equal = aggregate(&updates)?;

    let tests: Vec<&Dataset> = federation.iter().map(|(_, test)| test).collect();
    let matrix = matrix_from_models(equal.members(), &tests)?;
    let ensemble = match weighting {
        WeightingPolicy::Equal => equal,
        WeightingPolicy::Diagonal => {
            EnsembleModel::with_weights(equal.members().to_vec(), diagonal_weights(&matrix))?
        }
    };

    let raw_bytes: Vec<usize> = federation
        .iter()
        .map(|(train, _)| train.raw_csv_bytes())
        .collect();
    let summary = communication_cost(&updates, &raw_bytes)?;
    let report = evaluate_federation(&ensemble, &matrix, &tests)?.with_communication(summary);
    Ok(FederationOutcome {
        updates,
        ensemble,
        matrix,
        report,
    })
}
