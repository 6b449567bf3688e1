//! Datasets: per-device CSV ingestion, train/test splits, and synthetic
//! non-IID federations.
//!
//! A [`Dataset`] is the unit every trainer and evaluator consumes: a dense
//! feature matrix, one class id per row, the owning node's id, and the
//! labeling mode. All types here are immutable after construction, so
//! loading or splitting different nodes' data from concurrent workers needs
//! no synchronization.

mod loader;
mod split;
mod synthetic;

pub use loader::{load_device, node_for_device, RETAINED_DEVICES};
pub use split::split;
pub use synthetic::generate_synthetic_federation;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// Class id assigned to a traffic instance. Benign is always 0.
pub type ClassId = usize;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("benign file not found in {dir}: missing data (expected {expected})")]
    MissingBenign { dir: PathBuf, expected: String },
    #[error("device {device} is excluded from the federation: missing data in the source captures")]
    ExcludedDevice { device: u32 },
    #[error("unknown device id {device}: expected 1..=9")]
    UnknownDevice { device: u32 },
    #[error("{file}: header does not match the benign file's column set")]
    HeaderMismatch { file: PathBuf },
    #[error("{file}:{line}: cannot parse cell {column:?} as a finite number: {cell:?}")]
    BadCell {
        file: PathBuf,
        line: usize,
        column: String,
        cell: String,
    },
    #[error("{file}:{line}: expected {expected} columns, found {found}")]
    RaggedRow {
        file: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}: empty file (no data rows)")]
    EmptyFile { file: PathBuf },
    #[error("{file}:{line}: malformed manifest line (expected `name = file.csv`)")]
    BadManifestLine { file: PathBuf, line: usize },
    #[error("{dir}: {count} attack classes exceed the 10 supported by multiclass labels")]
    TooManyAttackClasses { dir: PathBuf, count: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {class} has a single row; stratified splitting needs at least 2 rows per class")]
    StratifiedSingleton { class: ClassId },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("label {label} out of range for {mode} labels")]
    LabelOutOfRange { label: ClassId, mode: LabelMode },
    #[error("row {row} contains a non-finite feature value")]
    NonFiniteFeature { row: usize },
    #[error("feature matrix has {rows} rows but {labels} labels")]
    RowLabelMismatch { rows: usize, labels: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// How class ids are assigned to traffic instances.
///
/// `Binary` collapses every attack to 1; `Multiclass` keeps benign plus the
/// ten attack classes, so its class count is always 11 even when a
/// particular dataset does not contain every class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Binary,
    Multiclass,
}

impl LabelMode {
    pub fn n_classes(self) -> usize {
        match self {
            LabelMode::Binary => 2,
            LabelMode::Multiclass => 11,
        }
    }

    pub fn contains(self, label: ClassId) -> bool {
        label < self.n_classes()
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelMode::Binary => write!(f, "binary"),
            LabelMode::Multiclass => write!(f, "multiclass"),
        }
    }
}

/// One node's labeled traffic: dense feature matrix plus one class id per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<ClassId>,
    feature_names: Vec<String>,
    node_id: u32,
    label_mode: LabelMode,
    /// Original capture-device id when loaded from a device directory.
    source_device: Option<u32>,
}

impl Dataset {
    /// Builds a dataset, checking the row/label agreement, label range, and
    /// feature finiteness invariants.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<ClassId>,
        feature_names: Vec<String>,
        node_id: u32,
        label_mode: LabelMode,
    ) -> Result<Self, DatasetError> {
        if features.nrows() != labels.len() {
            return Err(DatasetError::RowLabelMismatch {
                rows: features.nrows(),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| !label_mode.contains(l)) {
            return Err(DatasetError::LabelOutOfRange {
                label,
                mode: label_mode,
            });
        }
        for (row, values) in features.rows().into_iter().enumerate() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteFeature { row });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            node_id,
            label_mode,
            source_device: None,
        })
    }

    pub fn with_source_device(mut self, device: u32) -> Self {
        self.source_device = Some(device);
        self
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn node_id(&self) -> u32 {
        self.node_id
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn source_device(&self) -> Option<u32> {
        self.source_device
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    /// Contiguous view of row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        let flat = self
            .features
            .as_slice()
            .expect("dataset features are always stored in standard layout");
        &flat[i * w..(i + 1) * w]
    }

    /// New dataset containing the given rows, in the given order. Metadata
    /// is carried over unchanged.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let w = self.n_features();
        let mut data = Vec::with_capacity(indices.len() * w);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features: Array2::from_shape_vec((indices.len(), w), data)
                .expect("shape follows from construction"),
            labels,
            feature_names: self.feature_names.clone(),
            node_id: self.node_id,
            label_mode: self.label_mode,
            source_device: self.source_device,
        }
    }

    /// Rows of each class, as `(class, row_count)` pairs in ascending class order.
    pub fn class_counts(&self) -> Vec<(ClassId, usize)> {
        let mut counts = vec![0usize; self.label_mode.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, n)| n > 0)
            .collect()
    }

    /// Re-encodes the dataset in the per-device CSV layout: one benign file
    /// plus one file per attack class, each with a header row. Returns
    /// `(file name, file contents)` pairs; classes with no rows produce no
    /// file.
    ///
    /// This is both the synthetic-federation exporter and the baseline for
    /// communication accounting: it is the byte count a node would have had
    /// to upload had it shipped raw data instead of a model update.
    pub fn to_device_files(&self) -> Vec<(String, String)> {
        let header = self.feature_names.join(",");
        let mut files = Vec::new();
        for (class, _) in self.class_counts() {
            let name = match (self.label_mode, class) {
                (_, 0) => "benign.csv".to_string(),
                (LabelMode::Binary, _) => "attack.csv".to_string(),
                (LabelMode::Multiclass, c) => format!("attack_{c:02}.csv"),
            };
            let mut out = String::with_capacity(self.n_rows() / 4 * self.n_features());
            out.push_str(&header);
            out.push('\n');
            for (i, &label) in self.labels.iter().enumerate() {
                if label != class {
                    continue;
                }
                let mut first = true;
                for v in self.row(i) {
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    out.push_str(&format!("{v}"));
                }
                out.push('\n');
            }
            files.push((name, out));
        }
        files
    }

    /// Total byte size of [`Dataset::to_device_files`] without materializing
    /// long-lived copies.
    pub fn raw_csv_bytes(&self) -> usize {
        self.to_device_files()
            .iter()
            .map(|(_, contents)| contents.len())
            .sum()
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the training split, strictly in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
    /// Preserve per-class proportions. The per-device traffic is heavily
    /// imbalanced, so this defaults on; switch off to split the raw row pool.
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.8,
            seed,
            stratified: true,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DatasetError::InvalidSpec(format!(
                "train_fraction must be strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Parameters for a synthetic federation: Gaussian class clusters shared by
/// all nodes, displaced per node to create non-IID drift.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticFederationSpec {
    pub n_nodes: usize,
    pub rows_per_node: usize,
    pub n_features: usize,
    /// Number of distinct classes generated, in 2..=11. Values below 11
    /// still use multiclass labels unless exactly 2, which maps to binary.
    pub n_classes: usize,
    /// Radius of the sphere the class means are placed on, in units of the
    /// (unit) within-class noise.
    pub class_separation: f64,
    /// Magnitude of the per-node displacement applied to every class mean.
    /// Zero makes all nodes draw from identical distributions.
    pub node_shift: f64,
    pub seed: u64,
}

impl SyntheticFederationSpec {
    pub fn new(rows_per_node: usize, seed: u64) -> Self {
        Self {
            n_nodes: 7,
            rows_per_node,
            n_features: 115,
            n_classes: 11,
            class_separation: 3.0,
            node_shift: 1.0,
            seed,
        }
    }

    pub fn label_mode(&self) -> LabelMode {
        if self.n_classes == 2 {
            LabelMode::Binary
        } else {
            LabelMode::Multiclass
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_nodes < 2 {
            return Err(DatasetError::InvalidSpec(format!(
                "n_nodes must be at least 2, got {}",
                self.n_nodes
            )));
        }
        if self.rows_per_node == 0 {
            return Err(DatasetError::InvalidSpec("rows_per_node must be positive".into()));
        }
        if self.n_features == 0 {
            return Err(DatasetError::InvalidSpec("n_features must be positive".into()));
        }
        if self.n_classes < 2 || self.n_classes > 11 {
            return Err(DatasetError::InvalidSpec(format!(
                "n_classes must be in 2..=11, got {}",
                self.n_classes
            )));
        }
        if !self.class_separation.is_finite() || self.class_separation <= 0.0 {
            return Err(DatasetError::InvalidSpec(format!(
                "class_separation must be a positive finite number, got {}",
                self.class_separation
            )));
        }
        if self.node_shift < 0.0 || !self.node_shift.is_finite() {
            return Err(DatasetError::InvalidSpec(format!(
                "node_shift must be a non-negative finite number, got {}",
                self.node_shift
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i:03}")).collect()
    }

    #[test]
    fn new_rejects_row_label_mismatch() {
        let err = Dataset::new(
            array![[1.0, 2.0], [3.0, 4.0]],
            vec![0],
            names(2),
            1,
            LabelMode::Binary,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::RowLabelMismatch { rows: 2, labels: 1 }));
    }

    #[test]
    fn new_rejects_out_of_range_labels() {
        let err = Dataset::new(
            array![[1.0], [2.0]],
            vec![0, 2],
            names(1),
            1,
            LabelMode::Binary,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::LabelOutOfRange { label: 2, .. }));
    }

    #[test]
    fn new_rejects_non_finite_features() {
        let err = Dataset::new(
            array![[1.0], [f64::NAN]],
            vec![0, 1],
            names(1),
            1,
            LabelMode::Binary,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::NonFiniteFeature { row: 1 }));
    }

    #[test]
    fn multiclass_has_eleven_classes() {
        assert_eq!(LabelMode::Multiclass.n_classes(), 11);
        assert_eq!(LabelMode::Binary.n_classes(), 2);
        assert!(LabelMode::Multiclass.contains(10));
        assert!(!LabelMode::Multiclass.contains(11));
    }

    #[test]
    fn select_rows_keeps_order_and_metadata() {
        let ds = Dataset::new(
            array![[1.0], [2.0], [3.0]],
            vec![0, 1, 0],
            names(1),
            4,
            LabelMode::Binary,
        )
        .unwrap()
        .with_source_device(5);
        let picked = ds.select_rows(&[2, 0]);
        assert_eq!(picked.row(0), &[3.0]);
        assert_eq!(picked.row(1), &[1.0]);
        assert_eq!(picked.labels(), &[0, 0]);
        assert_eq!(picked.node_id(), 4);
        assert_eq!(picked.source_device(), Some(5));
    }

    #[test]
    fn device_files_partition_rows_by_class() {
        let ds = Dataset::new(
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            vec![0, 1, 1],
            vec!["a".into(), "b".into()],
            1,
            LabelMode::Binary,
        )
        .unwrap();
        let files = ds.to_device_files();
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].0, "benign.csv");
        assert_eq!(files[0].1, "a,b\n1,2\n");
        assert_eq!(files[1].0, "attack.csv");
        assert_eq!(files[1].1, "a,b\n3,4\n5,6\n");
        assert_eq!(ds.raw_csv_bytes(), files[0].1.len() + files[1].1.len());
    }

    #[test]
    fn multiclass_attack_files_are_zero_padded() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..11 {
            rows.push([c as f64]);
            labels.push(c);
        }
        let ds = Dataset::new(
            Array2::from_shape_vec((11, 1), rows.concat()).unwrap(),
            labels,
            names(1),
            1,
            LabelMode::Multiclass,
        )
        .unwrap();
        let files = ds.to_device_files();
        assert_eq!(files[0].0, "benign.csv");
        assert_eq!(files[1].0, "attack_01.csv");
        assert_eq!(files[10].0, "attack_10.csv");
        // Lexicographic order of the generated names matches class order.
        let mut sorted: Vec<_> = files.iter().map(|(n, _)| n.clone()).collect();
        sorted.sort();
        let skip_benign: Vec<_> = files[1..].iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(&sorted[..10], &skip_benign[..]);
    }
}
