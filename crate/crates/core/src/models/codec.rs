//! Versioned binary model format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4  b"FIOT"
//! version      u16
//! kind         u8   0 tree | 1 knn | 2 logistic
//! label_mode   u8   0 binary | 1 multiclass
//! n_features   u32
//! node_id      u32
//! scaler_flag  u8   0 absent | 1 present
//! [scaler]     n_features f64 means, n_features f64 stds
//! payload_len  u64
//! payload      kind-specific, see below
//! crc32        u32  IEEE CRC-32 of every preceding byte
//! ```
//!
//! Tree payload: `n_classes u32`, then the nodes pre-order; each node is a
//! tag byte (0 leaf, 1 internal), a leaf being `n_classes u32` counts and an
//! internal node being `feature u32, threshold f64, left, right`.
//! KNN payload: `k u32, rows u32`, `rows` u16 labels, `rows * n_features`
//! f64 cells row-major. Logistic payload: `n_classes u32`, then
//! `n_classes * (n_features + 1)` f64 weights row-major.
//!
//! The encoding is canonical: a fitted model always serializes to the same
//! bytes, so payload size is a pure function of the fitted state.

use super::{ModelError, ModelState, TrainedModel, TreeNode};
use crate::dataset::{ClassId, LabelMode};
use crate::preprocess::Scaler;
use ndarray::Array2;

pub const MAGIC: [u8; 4] = *b"FIOT";
pub const FORMAT_VERSION: u16 = 1;

const KIND_TREE: u8 = 0;
const KIND_KNN: u8 = 1;
const KIND_LOGISTIC: u8 = 2;

/// Encodes a model into the versioned binary layout. The returned length is
/// the number the communication accounting reports.
pub fn serialize_model(model: &TrainedModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match model.state() {
        ModelState::Tree { .. } => KIND_TREE,
        ModelState::Knn { .. } => KIND_KNN,
        ModelState::Logistic { .. } => KIND_LOGISTIC,
    });
    out.push(match model.label_mode() {
        LabelMode::Binary => 0,
        LabelMode::Multiclass => 1,
    });
    out.extend_from_slice(&(model.n_features() as u32).to_le_bytes());
    out.extend_from_slice(&model.training_node_id().to_le_bytes());
    match model.scaler() {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            for m in s.means() {
                out.extend_from_slice(&m.to_le_bytes());
            }
            for s in s.stds() {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }

    let mut payload = Vec::new();
    match model.state() {
        ModelState::Tree { root, n_classes } => {
            payload.extend_from_slice(&(*n_classes as u32).to_le_bytes());
            encode_node(root, &mut payload);
        }
        ModelState::Knn { features, labels, k } => {
            payload.extend_from_slice(&(*k as u32).to_le_bytes());
            payload.extend_from_slice(&(features.nrows() as u32).to_le_bytes());
            for &label in labels {
                payload.extend_from_slice(&(label as u16).to_le_bytes());
            }
            for cell in features.iter() {
                payload.extend_from_slice(&cell.to_le_bytes());
            }
        }
        ModelState::Logistic { weights } => {
            payload.extend_from_slice(&(weights.nrows() as u32).to_le_bytes());
            for cell in weights.iter() {
                payload.extend_from_slice(&cell.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32(&out).to_le_bytes());
    out
}

fn encode_node(node: &TreeNode, out: &mut Vec<u8>) {
    match node {
        TreeNode::Leaf { class_counts } => {
            out.push(0);
            for &c in class_counts {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
        } => {
            out.push(1);
            out.extend_from_slice(&(*feature_index as u32).to_le_bytes());
            out.extend_from_slice(&threshold.to_le_bytes());
            encode_node(left, out);
            encode_node(right, out);
        }
    }
}

/// Decodes and validates a serialized model. Any truncation, version skew,
/// or bit corruption is an error; a successful decode always yields a model
/// whose predictions match the original.
pub fn deserialize_model(bytes: &[u8]) -> Result<TrainedModel, ModelError> {
    if bytes.len() < MAGIC.len() + 2 {
        return Err(ModelError::Truncated);
    }
    if bytes[..4] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    if bytes.len() < 4 + 2 + 4 {
        return Err(ModelError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    if crc32(body) != stored_crc {
        return Err(ModelError::ChecksumMismatch);
    }

    let mut cur = Cursor::new(&body[6..]);
    let kind = cur.u8()?;
    let label_mode = match cur.u8()? {
        0 => LabelMode::Binary,
        1 => LabelMode::Multiclass,
        other => return Err(ModelError::Corrupted(format!("unknown label mode tag {other}"))),
    };
    let n_features = cur.u32()? as usize;
    let node_id = cur.u32()?;
    let scaler = match cur.u8()? {
        0 => None,
        1 => {
            let means: Vec<f64> = (0..n_features).map(|_| cur.f64()).collect::<Result<_, _>>()?;
            let stds: Vec<f64> = (0..n_features).map(|_| cur.f64()).collect::<Result<_, _>>()?;
            if stds.iter().any(|&s| !s.is_finite() || s <= 0.0) {
                return Err(ModelError::Corrupted("scaler std must be positive".into()));
            }
            Some(Scaler::from_parts(means, stds))
        }
        other => return Err(ModelError::Corrupted(format!("unknown scaler flag {other}"))),
    };
    let payload_len = cur.u64()? as usize;
    if cur.remaining() != payload_len {
        return Err(ModelError::Corrupted(format!(
            "payload length field says {payload_len} bytes, found {}",
            cur.remaining()
        )));
    }

    let expected_classes = label_mode.n_classes();
    let state = match kind {
        KIND_TREE => {
            let n_classes = cur.u32()? as usize;
            if n_classes != expected_classes {
                return Err(ModelError::Corrupted(format!(
                    "tree stores {n_classes} classes but the label mode implies {expected_classes}"
                )));
            }
            let root = decode_node(&mut cur, n_classes, n_features)?;
            ModelState::Tree { root, n_classes }
        }
        KIND_KNN => {
            let k = cur.u32()? as usize;
            let rows = cur.u32()? as usize;
            if k == 0 || k > rows {
                return Err(ModelError::Corrupted(format!("k = {k} with {rows} rows")));
            }
            let mut labels: Vec<ClassId> = Vec::with_capacity(rows);
            for _ in 0..rows {
                let label = cur.u16()? as ClassId;
                if label >= expected_classes {
                    return Err(ModelError::Corrupted(format!("label {label} out of range")));
                }
                labels.push(label);
            }
            let mut cells = Vec::with_capacity(rows * n_features);
            for _ in 0..rows * n_features {
                cells.push(cur.f64()?);
            }
            let features = Array2::from_shape_vec((rows, n_features), cells)
                .map_err(|e| ModelError::Corrupted(e.to_string()))?;
            ModelState::Knn { features, labels, k }
        }
        KIND_LOGISTIC => {
            let n_classes = cur.u32()? as usize;
            if n_classes != expected_classes {
                return Err(ModelError::Corrupted(format!(
                    "weights store {n_classes} classes but the label mode implies {expected_classes}"
                )));
            }
            let mut cells = Vec::with_capacity(n_classes * (n_features + 1));
            for _ in 0..n_classes * (n_features + 1) {
                cells.push(cur.f64()?);
            }
            let weights = Array2::from_shape_vec((n_classes, n_features + 1), cells)
                .map_err(|e| ModelError::Corrupted(e.to_string()))?;
            ModelState::Logistic { weights }
        }
        other => return Err(ModelError::Corrupted(format!("unknown model kind tag {other}"))),
    };
    if cur.remaining() != 0 {
        return Err(ModelError::Corrupted(format!(
            "{} trailing payload bytes",
            cur.remaining()
        )));
    }

    let mut model = TrainedModel::new(state, n_features, label_mode, node_id);
    if let Some(s) = scaler {
        model = model.with_scaler(s);
    }
    Ok(model)
}

fn decode_node(
    cur: &mut Cursor<'_>,
    n_classes: usize,
    n_features: usize,
) -> Result<TreeNode, ModelError> {
    match cur.u8()? {
        0 => {
            let mut class_counts = Vec::with_capacity(n_classes);
            for _ in 0..n_classes {
                class_counts.push(cur.u32()?);
            }
            if class_counts.iter().all(|&c| c == 0) {
                return Err(ModelError::Corrupted("leaf with all-zero counts".into()));
            }
            Ok(TreeNode::Leaf { class_counts })
        }
        1 => {
            let feature_index = cur.u32()? as usize;
            if feature_index >= n_features {
                return Err(ModelError::Corrupted(format!(
                    "split on feature {feature_index} of {n_features}"
                )));
            }
            let threshold = cur.f64()?;
            if !threshold.is_finite() {
                return Err(ModelError::Corrupted("non-finite split threshold".into()));
            }
            let left = Box::new(decode_node(cur, n_classes, n_features)?);
            let right = Box::new(decode_node(cur, n_classes, n_features)?);
            Ok(TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            })
        }
        other => Err(ModelError::Corrupted(format!("unknown node tag {other}"))),
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.remaining() < n {
            return Err(ModelError::Truncated);
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// IEEE CRC-32 (reflected, polynomial 0xEDB88320).
pub(crate) fn crc32(bytes: &[u8]) -> u32 {
    const TABLE: [u32; 256] = crc32_table();
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        let idx = ((crc ^ b as u32) & 0xFF) as usize;
        crc = (crc >> 8) ^ TABLE[idx];
    }
    !crc
}

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut bit = 0;
        while bit < 8 {
            c = if c & 1 == 1 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            bit += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}
