//! Synthetic non-IID federations for desk-scale runs.
//!
//! Each class is a Gaussian cluster with unit noise. Class means sit on a
//! sphere of radius `class_separation` around the origin and are shared by
//! all nodes; every node additionally displaces all of its class means by a
//! node-specific offset of magnitude `node_shift`, which is what makes the
//! federation non-IID.

use super::{ClassId, Dataset, DatasetError, SyntheticFederationSpec};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generates one dataset per node, ids 1..=n_nodes.
///
/// Deterministic: the same spec (including seed) always produces identical
/// feature matrices and labels. Labels cycle through the classes before a
/// final shuffle, so every class is present on every node whenever
/// `rows_per_node >= n_classes`.
pub fn generate_synthetic_federation(
    spec: &SyntheticFederationSpec,
) -> Result<Vec<Dataset>, DatasetError> {
    spec.validate()?;
    let mut master = ChaCha20Rng::seed_from_u64(spec.seed);

    let class_means: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| scaled_direction(&mut master, spec.n_features, spec.class_separation))
        .collect();
    let node_offsets: Vec<Vec<f64>> = (0..spec.n_nodes)
        .map(|_| scaled_direction(&mut master, spec.n_features, spec.node_shift))
        .collect();
    let node_seeds: Vec<u64> = (0..spec.n_nodes).map(|_| master.random()).collect();

    let feature_names: Vec<String> = (0..spec.n_features).map(|j| format!("f{j:03}")).collect();
    let label_mode = spec.label_mode();

    let mut nodes = Vec::with_capacity(spec.n_nodes);
    for node in 0..spec.n_nodes {
        let mut rng = ChaCha20Rng::seed_from_u64(node_seeds[node]);
        let mut labels: Vec<ClassId> =
            (0..spec.rows_per_node).map(|r| r % spec.n_classes).collect();
        labels.shuffle(&mut rng);

        let mut cells = Vec::with_capacity(spec.rows_per_node * spec.n_features);
        for &label in &labels {
            let mean = &class_means[label];
            let offset = &node_offsets[node];
            for j in 0..spec.n_features {
                let noise: f64 = StandardNormal.sample(&mut rng);
                cells.push(mean[j] + offset[j] + noise);
            }
        }
        let features = Array2::from_shape_vec((spec.rows_per_node, spec.n_features), cells)
            .expect("shape follows from construction");
        nodes.push(Dataset::new(
            features,
            labels,
            feature_names.clone(),
            (node + 1) as u32,
            label_mode,
        )?);
    }
    Ok(nodes)
}

/// A uniformly random direction scaled to `magnitude`; the zero vector when
/// the magnitude is zero.
fn scaled_direction(rng: &mut ChaCha20Rng, dim: usize, magnitude: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    if magnitude == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return v;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Unreachable in practice; keeps the scaling well-defined.
        v[0] = magnitude;
        return v;
    }
    v.iter_mut().for_each(|x| *x *= magnitude / norm);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produces_one_dataset_per_node_with_sequential_ids() {
        let spec = SyntheticFederationSpec {
            rows_per_node: 22,
            n_features: 5,
            n_classes: 3,
            ..SyntheticFederationSpec::new(22, 9)
        };
        let nodes = generate_synthetic_federation(&spec).unwrap();
        assert_eq!(nodes.len(), 7);
        for (i, node) in nodes.iter().enumerate() {
            assert_eq!(node.node_id(), (i + 1) as u32);
            assert_eq!(node.n_rows(), 22);
            assert_eq!(node.n_features(), 5);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticFederationSpec {
            n_nodes: 3,
            rows_per_node: 40,
            n_features: 8,
            n_classes: 4,
            ..SyntheticFederationSpec::new(40, 123)
        };
        let a = generate_synthetic_federation(&spec).unwrap();
        let b = generate_synthetic_federation(&spec).unwrap();
        assert_eq!(a, b);
        let mut other = spec;
        other.seed = 124;
        let c = generate_synthetic_federation(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_class_present_on_every_node() {
        let spec = SyntheticFederationSpec {
            n_nodes: 4,
            rows_per_node: 10 * 11,
            n_features: 6,
            ..SyntheticFederationSpec::new(110, 5)
        };
        for node in generate_synthetic_federation(&spec).unwrap() {
            assert_eq!(node.class_counts().len(), 11, "node {}", node.node_id());
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SyntheticFederationSpec::new(10, 1);
        for bad in [
            SyntheticFederationSpec { n_nodes: 1, ..base },
            SyntheticFederationSpec { rows_per_node: 0, ..base },
            SyntheticFederationSpec { n_features: 0, ..base },
            SyntheticFederationSpec { n_classes: 1, ..base },
            SyntheticFederationSpec { n_classes: 12, ..base },
            SyntheticFederationSpec { class_separation: 0.0, ..base },
            SyntheticFederationSpec { node_shift: -1.0, ..base },
            SyntheticFederationSpec { node_shift: f64::INFINITY, ..base },
        ] {
            assert!(generate_synthetic_federation(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn two_class_specs_use_binary_labels() {
        let spec = SyntheticFederationSpec {
            n_nodes: 2,
            rows_per_node: 12,
            n_features: 3,
            n_classes: 2,
            ..SyntheticFederationSpec::new(12, 2)
        };
        let nodes = generate_synthetic_federation(&spec).unwrap();
        assert_eq!(nodes[0].label_mode(), crate::dataset::LabelMode::Binary);
    }
}
