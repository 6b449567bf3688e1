//! Federated botnet-detection simulator for IoT traffic.
//!
//! Seven (or `n`) simulated IoT nodes each hold a private traffic dataset,
//! train a lightweight classifier locally, and ship only the serialized
//! model to a simulated edge node. The edge aggregates the members into a
//! majority-vote ensemble and redistributes it. The library covers the full
//! experiment loop:
//!
//! - [`dataset`]: per-device CSV ingestion, train/test splitting, and
//!   synthetic non-IID federations for desk-scale runs.
//! - [`preprocess`]: feature standardization fitted on training data only.
//! - [`models`]: CART decision tree, k-nearest neighbors, and multinomial
//!   logistic regression behind one trainer contract, with a versioned
//!   binary model format.
//! - [`evaluation`]: accuracy/timing measurement, cross-node accuracy
//!   matrices, and the normalized accuracy/time score that ranks models.
//! - [`federation`]: local training rounds, update aggregation, ensemble
//!   prediction, and communication-cost accounting.

pub mod dataset;
pub mod evaluation;
pub mod federation;
pub mod models;
pub mod preprocess;

pub use dataset::{Dataset, LabelMode, SplitSpec, SyntheticFederationSpec};
pub use evaluation::{AccuracyMatrix, NodeMetrics, ScoreCard, ScoreWeights};
pub use federation::{CommunicationSummary, EnsembleModel, FederationReport, ModelUpdate};
pub use models::{
    KnnParams, LogisticParams, ModelKind, TrainedModel, TrainerSpec, TreeParams,
};
pub use preprocess::Scaler;
