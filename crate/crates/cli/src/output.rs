//! Atomic artifact writing and the run directory layout.
//!
//! Every file lands via write-to-temp-then-rename, so a failed command
//! never leaves a partly written artifact behind.

use crate::config::RunConfig;
use crate::error::CliError;
use fediot_core::models::ModelKind;
use std::fs;
use std::path::{Path, PathBuf};

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = path.parent().ok_or_else(|| {
        CliError::Internal(format!("output path {} has no parent", path.display()))
    })?;
    fs::create_dir_all(parent)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", parent.display())))?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Internal(format!("bad output file name {}", path.display())))?;
    let tmp = parent.join(format!(".{file_name}.tmp"));
    let finish = fs::write(&tmp, bytes)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())));
    if finish.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    finish
}

/// Reads a required prior artifact; missing files are data errors that name
/// the producing command.
pub fn read_artifact(path: &Path, produced_by: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| {
        CliError::Data(format!(
            "cannot read {} (produced by `{produced_by}`): {e}",
            path.display()
        ))
    })
}

pub fn read_artifact_bytes(path: &Path, produced_by: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| {
        CliError::Data(format!(
            "cannot read {} (produced by `{produced_by}`): {e}",
            path.display()
        ))
    })
}

/// A JSON report with the resolved config embedded for provenance.
pub fn provenance_json<T: serde::Serialize>(config: &RunConfig, data: &T) -> String {
    let value = serde_json::json!({
        "config": config.provenance(),
        "data": data,
    });
    serde_json::to_string_pretty(&value).expect("reports serialize infallibly")
}

/// All artifact paths under one run directory.
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn node_data_dir(&self, node_id: u32) -> PathBuf {
        self.root.join("data").join(format!("node_{node_id}"))
    }

    pub fn synth_manifest(&self) -> PathBuf {
        self.root.join("synth.json")
    }

    pub fn model_file(&self, kind: ModelKind, node_id: u32) -> PathBuf {
        self.root
            .join("models")
            .join(kind.as_str())
            .join(format!("node_{node_id}.model"))
    }

    pub fn metrics_csv(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("metrics_{kind}.csv"))
    }

    pub fn metrics_json(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("metrics_{kind}.json"))
    }

    pub fn matrix_csv(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("matrix_{kind}.csv"))
    }

    pub fn matrix_json(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("matrix_{kind}.json"))
    }

    pub fn scorecard_csv(&self) -> PathBuf {
        self.root.join("scorecard.csv")
    }

    pub fn scorecard_json(&self) -> PathBuf {
        self.root.join("scorecard.json")
    }

    pub fn federation_csv(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("federation_{kind}.csv"))
    }

    pub fn federation_json(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("federation_{kind}.json"))
    }

    pub fn long_report_csv(&self) -> PathBuf {
        self.root.join("report_long.csv")
    }
}
