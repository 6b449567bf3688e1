//! Feature standardization.
//!
//! Distance-based models are sensitive to feature ranges, so KNN and
//! logistic regression always train on standardized features. The scaler is
//! fitted on the training split only and applied to test and cross-node
//! data with the training statistics, which keeps evaluation leakage-free.

use crate::dataset::{Dataset, DatasetError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot fit a scaler on an empty dataset")]
    EmptyDataset,
    #[error("scaler was fitted on {expected} features but the data has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Per-column standardization parameters: sample mean and population
/// (divide-by-n) standard deviation. Constant columns store the sentinel
/// std 1 so their transform is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Scaler {
    /// Rebuilds a scaler from stored statistics (model codec path). Callers
    /// must have validated that every std is positive.
    pub(crate) fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Self {
        debug_assert_eq!(means.len(), stds.len());
        Self { means, stds }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Standardizes one row in place-free form.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if row.len() != self.n_features() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scaler serializes infallibly")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Fits per-column mean/std on the training split.
pub fn fit_scaler(train: &Dataset) -> Result<Scaler, PreprocessError> {
    if train.is_empty() {
        return Err(PreprocessError::EmptyDataset);
    }
    let n = train.n_rows() as f64;
    let mut means = Vec::with_capacity(train.n_features());
    let mut stds = Vec::with_capacity(train.n_features());
    for col in train.features().columns() {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        means.push(mean);
        stds.push(if std > 0.0 { std } else { 1.0 });
    }
    Ok(Scaler { means, stds })
}

/// Applies train-fitted statistics to any dataset with the same columns.
/// Labels and metadata pass through unchanged.
pub fn apply_scaler(scaler: &Scaler, ds: &Dataset) -> Result<Dataset, PreprocessError> {
    if ds.n_features() != scaler.n_features() {
        return Err(PreprocessError::DimensionMismatch {
            expected: scaler.n_features(),
            found: ds.n_features(),
        });
    }
    let mut transformed = Array2::zeros((ds.n_rows(), ds.n_features()));
    for (i, row) in ds.features().rows().into_iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            transformed[(i, j)] = (x - scaler.means[j]) / scaler.stds[j];
        }
    }
    let mut out = Dataset::new(
        transformed,
        ds.labels().to_vec(),
        ds.feature_names().to_vec(),
        ds.node_id(),
        ds.label_mode(),
    )?;
    if let Some(device) = ds.source_device() {
        out = out.with_source_device(device);
    }
    Ok(out)
}
