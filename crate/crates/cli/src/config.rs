//! Run configuration: one JSON document, overridable by flags.
//!
//! Every run is a pure function of this config plus the input files, so the
//! config (minus its output location) is embedded into every JSON report
//! for provenance. The seed is a required field; nothing in the pipeline
//! ever seeds from the clock.

use crate::error::CliError;
use fediot_core::dataset::{LabelMode, SplitSpec, SyntheticFederationSpec, RETAINED_DEVICES};
use fediot_core::evaluation::ScoreWeights;
use fediot_core::federation::WeightingPolicy;
use fediot_core::models::{KnnParams, LogisticParams, ModelKind, TrainerSpec, TreeParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Nbaiot(NbaiotSource),
}

/// Synthetic-federation parameters; the run seed is injected from the top
/// level so one number controls the whole pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    pub rows_per_node: usize,
    #[serde(default = "default_n_features")]
    pub n_features: usize,
    #[serde(default = "default_n_classes")]
    pub n_classes: usize,
    #[serde(default = "default_class_separation")]
    pub class_separation: f64,
    #[serde(default = "default_node_shift")]
    pub node_shift: f64,
}

fn default_n_nodes() -> usize {
    7
}
fn default_n_features() -> usize {
    115
}
fn default_n_classes() -> usize {
    11
}
fn default_class_separation() -> f64 {
    3.0
}
fn default_node_shift() -> f64 {
    1.0
}

impl SyntheticSource {
    pub fn to_spec(self, seed: u64) -> SyntheticFederationSpec {
        SyntheticFederationSpec {
            n_nodes: self.n_nodes,
            rows_per_node: self.rows_per_node,
            n_features: self.n_features,
            n_classes: self.n_classes,
            class_separation: self.class_separation,
            node_shift: self.node_shift,
            seed,
        }
    }
}

/// Root directory of per-device capture CSVs, `<root>/device_<k>/...`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbaiotSource {
    pub root: PathBuf,
    #[serde(default = "default_devices")]
    pub devices: Vec<u32>,
}

fn default_devices() -> Vec<u32> {
    RETAINED_DEVICES.to_vec()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_stratified")]
    pub stratified: bool,
}

fn default_train_fraction() -> f64 {
    0.8
}
fn default_stratified() -> bool {
    true
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: default_train_fraction(),
            stratified: default_stratified(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeTrainerConfig {
    #[serde(flatten)]
    pub params: TreeParams,
    /// Standardize features before fitting; off by default for trees.
    #[serde(default)]
    pub scale: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfigs {
    #[serde(default)]
    pub tree: TreeTrainerConfig,
    #[serde(default = "KnnParams::default")]
    pub knn: KnnParams,
    #[serde(default = "LogisticParams::default")]
    pub logistic: LogisticParams,
}

impl TrainerConfigs {
    pub fn spec_for(&self, kind: ModelKind) -> TrainerSpec {
        match kind {
            ModelKind::Tree => TrainerSpec::Tree {
                params: self.tree.params,
                scale: self.tree.scale,
            },
            ModelKind::Knn => TrainerSpec::Knn(self.knn),
            ModelKind::Logistic => TrainerSpec::Logistic(self.logistic),
        }
    }
}

/// How training times are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingMode {
    /// Wall-clock measurement of the fit call. The honest default; output
    /// bytes then vary run to run.
    #[default]
    Measured,
    /// Deterministic stand-in proportional to the training rows, for runs
    /// that must be byte-reproducible. Constants mirror the measured
    /// per-row cost ordering of the three trainers.
    Fixed,
}

/// Seconds recorded in fixed timing mode.
pub fn fixed_time_proxy(kind: ModelKind, train_rows: usize) -> f64 {
    let per_row = match kind {
        ModelKind::Tree => 5.0e-5,
        ModelKind::Knn => 4.0e-4,
        ModelKind::Logistic => 1.1e-5,
    };
    per_row * train_rows.max(1) as f64
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Tree, ModelKind::Knn, ModelKind::Logistic]
}

fn default_rounds() -> usize {
    1
}

fn default_jobs() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run_out")
}

fn default_label_mode() -> LabelMode {
    LabelMode::Multiclass
}

/// The whole run, as read from `--config` and adjusted by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_label_mode")]
    pub label_mode: LabelMode,
    pub source: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub trainers: TrainerConfigs,
    #[serde(default)]
    pub score_weights: ScoreWeights,
    #[serde(default)]
    pub weighting: WeightingPolicy,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("at least one model must be selected".into()));
        }
        let mut seen = self.models.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(CliError::Usage("duplicate entries in `models`".into()));
        }
        self.score_weights
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.rounds == 0 {
            return Err(CliError::Usage("rounds must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "train_fraction must be strictly between 0 and 1, got {}",
                self.split.train_fraction
            )));
        }
        match &self.source {
            DataSource::Synthetic(synthetic) => {
                synthetic
                    .to_spec(self.seed)
                    .validate()
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let derived = synthetic.to_spec(self.seed).label_mode();
                if derived != self.label_mode {
                    return Err(CliError::Usage(format!(
                        "label_mode {} contradicts the synthetic source's {} classes",
                        self.label_mode, synthetic.n_classes
                    )));
                }
            }
            DataSource::Nbaiot(nbaiot) => {
                if nbaiot.devices.is_empty() {
                    return Err(CliError::Usage("devices list is empty".into()));
                }
            }
        }
        for kind in &self.models {
            let spec = self.trainers.spec_for(*kind);
            let check = match spec {
                TrainerSpec::Tree { params, .. } => params.validate(),
                TrainerSpec::Knn(params) => params.validate(),
                TrainerSpec::Logistic(params) => params.validate(),
            };
            check.map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed: self.seed,
            stratified: self.split.stratified,
        }
    }

    /// The provenance snapshot embedded in JSON reports: everything that
    /// determines the output bytes. The output directory and job count are
    /// excluded; neither affects any artifact's content.
    pub fn provenance(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes infallibly");
        let map = value.as_object_mut().expect("config is a JSON object");
        map.remove("out_dir");
        map.remove("jobs");
        value
    }
}
