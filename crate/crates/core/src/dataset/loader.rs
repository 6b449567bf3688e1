//! Per-device CSV directory loader.
//!
//! Expected layout: `<dir>/benign.csv` plus one CSV per attack class. Every
//! file carries a header row of feature names; attack files may order their
//! columns differently but must cover the same column set as the benign
//! file, whose order is canonical. An optional `manifest.txt` of
//! `name = file.csv` lines overrides file discovery; the reserved key
//! `benign` names the benign file, every other key declares one attack
//! class.

use super::{ClassId, Dataset, DatasetError, LabelMode};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Capture devices retained in the seven-node federation, ascending.
/// Devices 3 and 7 are excluded because their captures are incomplete.
pub const RETAINED_DEVICES: [u32; 7] = [1, 2, 4, 5, 6, 8, 9];

const MANIFEST_NAME: &str = "manifest.txt";
const BENIGN_NAME: &str = "benign.csv";

/// Maps an original capture-device id to its 1-based node id.
pub fn node_for_device(device: u32) -> Result<u32, DatasetError> {
    if device == 3 || device == 7 {
        return Err(DatasetError::ExcludedDevice { device });
    }
    RETAINED_DEVICES
        .iter()
        .position(|&d| d == device)
        .map(|i| (i + 1) as u32)
        .ok_or(DatasetError::UnknownDevice { device })
}

/// Loads one device directory into a [`Dataset`].
///
/// Rows are the concatenation of the benign file followed by the attack
/// files in ascending class order. In binary mode every attack row is
/// labeled 1; in multiclass mode attack classes are numbered 1.. in
/// lexicographic order of their file (or manifest) names.
pub fn load_device(
    dir: impl AsRef<Path>,
    device: u32,
    label_mode: LabelMode,
) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    let node_id = node_for_device(device)?;
    let (benign_path, attack_paths) = discover_files(dir)?;

    let (feature_names, mut rows) = parse_csv(&benign_path, None)?;
    let mut labels: Vec<ClassId> = vec![0; rows.len() / feature_names.len()];

    if label_mode == LabelMode::Multiclass && attack_paths.len() > 10 {
        return Err(DatasetError::TooManyAttackClasses {
            dir: dir.to_path_buf(),
            count: attack_paths.len(),
        });
    }

    for (i, path) in attack_paths.iter().enumerate() {
        let class: ClassId = match label_mode {
            LabelMode::Binary => 1,
            LabelMode::Multiclass => i + 1,
        };
        let (_, cells) = parse_csv(path, Some(&feature_names))?;
        let n_rows = cells.len() / feature_names.len();
        rows.extend_from_slice(&cells);
        labels.extend(std::iter::repeat_n(class, n_rows));
    }

    let n_features = feature_names.len();
    let n_rows = rows.len() / n_features;
    let features = Array2::from_shape_vec((n_rows, n_features), rows)
        .expect("parser yields rectangular data");
    Ok(
        Dataset::new(features, labels, feature_names, node_id, label_mode)?
            .with_source_device(device),
    )
}

/// Resolves the benign file and the ordered attack files for a directory,
/// from the manifest when present, otherwise by listing `*.csv`.
fn discover_files(dir: &Path) -> Result<(PathBuf, Vec<PathBuf>), DatasetError> {
    let manifest = dir.join(MANIFEST_NAME);
    if manifest.is_file() {
        return discover_from_manifest(dir, &manifest);
    }

    let entries = fs::read_dir(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut benign = None;
    let mut attacks = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        if path.file_name().and_then(|n| n.to_str()) == Some(BENIGN_NAME) {
            benign = Some(path);
        } else {
            attacks.push(path);
        }
    }
    let benign = benign.ok_or_else(|| DatasetError::MissingBenign {
        dir: dir.to_path_buf(),
        expected: BENIGN_NAME.to_string(),
    })?;
    attacks.sort();
    Ok((benign, attacks))
}

fn discover_from_manifest(
    dir: &Path,
    manifest: &Path,
) -> Result<(PathBuf, Vec<PathBuf>), DatasetError> {
    let text = fs::read_to_string(manifest).map_err(|source| DatasetError::Io {
        path: manifest.to_path_buf(),
        source,
    })?;
    let mut benign = None;
    let mut attacks: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(DatasetError::BadManifestLine {
            file: manifest.to_path_buf(),
            line: i + 1,
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(DatasetError::BadManifestLine {
                file: manifest.to_path_buf(),
                line: i + 1,
            });
        }
        if key == "benign" {
            benign = Some(dir.join(value));
        } else {
            attacks.insert(key.to_string(), dir.join(value));
        }
    }
    let benign = benign.ok_or_else(|| DatasetError::MissingBenign {
        dir: dir.to_path_buf(),
        expected: format!("a `benign = ...` entry in {MANIFEST_NAME}"),
    })?;
    if !benign.is_file() {
        return Err(DatasetError::MissingBenign {
            dir: dir.to_path_buf(),
            expected: benign.display().to_string(),
        });
    }
    // BTreeMap iteration gives attack classes in key order.
    Ok((benign, attacks.into_values().collect()))
}

/// Parses one CSV file. Returns the header names and the flat cell buffer
/// (row-major). When `canonical` is given, the file's columns are permuted
/// into that order; a different column set is an error.
fn parse_csv(
    path: &Path,
    canonical: Option<&[String]>,
) -> Result<(Vec<String>, Vec<f64>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| DatasetError::EmptyFile {
        file: path.to_path_buf(),
    })?;
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();

    // Column permutation: position j in the output takes input column perm[j].
    let perm: Vec<usize> = match canonical {
        None => (0..names.len()).collect(),
        Some(expected) => {
            if expected.len() != names.len() {
                return Err(DatasetError::HeaderMismatch {
                    file: path.to_path_buf(),
                });
            }
            expected
                .iter()
                .map(|want| names.iter().position(|have| have == want))
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| DatasetError::HeaderMismatch {
                    file: path.to_path_buf(),
                })?
        }
    };
    let out_names: Vec<String> = canonical.map(|c| c.to_vec()).unwrap_or_else(|| names.clone());

    let mut cells = Vec::new();
    let mut data_rows = 0usize;
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != names.len() {
            return Err(DatasetError::RaggedRow {
                file: path.to_path_buf(),
                line: idx + 1,
                expected: names.len(),
                found: row.len(),
            });
        }
        for &j in &perm {
            let cell = row[j].trim();
            let value: f64 = cell.parse().map_err(|_| DatasetError::BadCell {
                file: path.to_path_buf(),
                line: idx + 1,
                column: names[j].clone(),
                cell: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::BadCell {
                    file: path.to_path_buf(),
                    line: idx + 1,
                    column: names[j].clone(),
                    cell: cell.to_string(),
                });
            }
            cells.push(value);
        }
        data_rows += 1;
    }
    if data_rows == 0 {
        return Err(DatasetError::EmptyFile {
            file: path.to_path_buf(),
        });
    }
    Ok((out_names, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_mapping_skips_excluded_devices() {
        assert_eq!(node_for_device(1).unwrap(), 1);
        assert_eq!(node_for_device(2).unwrap(), 2);
        assert_eq!(node_for_device(4).unwrap(), 3);
        assert_eq!(node_for_device(9).unwrap(), 7);
        assert!(matches!(
            node_for_device(3),
            Err(DatasetError::ExcludedDevice { device: 3 })
        ));
        assert!(matches!(
            node_for_device(7),
            Err(DatasetError::ExcludedDevice { device: 7 })
        ));
        assert!(matches!(
            node_for_device(10),
            Err(DatasetError::UnknownDevice { device: 10 })
        ));
    }

    #[test]
    fn excluded_device_error_mentions_missing_data() {
        let msg = node_for_device(7).unwrap_err().to_string();
        assert!(msg.contains("missing data"), "got: {msg}");
    }
}
