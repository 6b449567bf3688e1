//! The six pipeline commands. Each is a pure function of the config and the
//! files already on disk: identical inputs produce byte-identical outputs
//! (in `fixed` timing mode, including the metrics files).

use crate::config::{fixed_time_proxy, DataSource, RunConfig, TimingMode};
use crate::error::CliError;
use crate::output::{
    provenance_json, read_artifact, read_artifact_bytes, write_atomic, RunPaths,
};
use fediot_core::dataset::{
    generate_synthetic_federation, load_device, node_for_device, split, Dataset,
};
use fediot_core::evaluation::{
    accuracy, matrix_from_models_parallel, node_metrics_from_csv, node_metrics_to_csv,
    score_models, timed_train, AccuracyMatrix, LongRow, NodeMetrics, ScoreCard,
};
use fediot_core::federation::{
    aggregate, communication_cost, diagonal_weights, evaluate_federation, EnsembleModel,
    FederationReport, ModelUpdate, WeightingPolicy,
};
use fediot_core::models::{deserialize_model, ModelKind, TrainedModel};
use std::path::Path;

/// Loads the per-node `(train, test)` pairs the config describes. Synthetic
/// sources regenerate from the seed; capture sources reload from disk. Both
/// are deterministic, so every command sees the same partition.
pub fn load_federation(config: &RunConfig) -> Result<Vec<(Dataset, Dataset)>, CliError> {
    let datasets = match &config.source {
        DataSource::Synthetic(synthetic) => {
            generate_synthetic_federation(&synthetic.to_spec(config.seed))?
        }
        DataSource::Nbaiot(nbaiot) => {
            let mut ordered: Vec<(u32, u32)> = nbaiot
                .devices
                .iter()
                .map(|&device| Ok((node_for_device(device)?, device)))
                .collect::<Result<_, CliError>>()?;
            ordered.sort_unstable();
            ordered
                .into_iter()
                .map(|(_, device)| {
                    let dir = nbaiot.root.join(format!("device_{device}"));
                    Ok(load_device(&dir, device, config.label_mode)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?
        }
    };
    let spec = config.split_spec();
    datasets
        .iter()
        .map(|ds| Ok(split(ds, &spec)?))
        .collect()
}

/// Ordered parallel map over node-grained work items.
fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let next = &next;
    let f = &f;
    let mut indexed: Vec<(usize, R)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs.min(items.len()))
            .map(|_| {
                scope.spawn(move || {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break;
                        }
                        done.push((i, f(&items[i])));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("node worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

/// Writes a synthetic federation to `<out>/data/node_<i>/` in the per-device
/// CSV layout.
pub fn cmd_synth(config: &RunConfig) -> Result<(), CliError> {
    let DataSource::Synthetic(synthetic) = &config.source else {
        return Err(CliError::Usage(
            "`synth` needs a synthetic data source in the config".into(),
        ));
    };
    let paths = RunPaths::new(&config.out_dir);
    let nodes = generate_synthetic_federation(&synthetic.to_spec(config.seed))?;
    let mut written = Vec::new();
    for node in &nodes {
        let dir = paths.node_data_dir(node.node_id());
        for (name, contents) in node.to_device_files() {
            let path = dir.join(&name);
            write_atomic(&path, contents.as_bytes())?;
            written.push(format!("data/node_{}/{name}", node.node_id()));
        }
    }
    let manifest = serde_json::json!({
        "nodes": nodes.len(),
        "rows_per_node": synthetic.rows_per_node,
        "files": written,
    });
    write_atomic(
        &paths.synth_manifest(),
        provenance_json(config, &manifest).as_bytes(),
    )?;
    println!("synth: wrote {} files under {}", manifest["files"].as_array().unwrap().len(), paths.root().display());
    Ok(())
}

/// Trains every selected model on every node; emits per-node model files
/// and the per-model metrics tables.
///
/// `jobs` here is the explicit flag value only: training is timing
/// sensitive, so it stays sequential unless the user asks otherwise.
pub fn cmd_train(config: &RunConfig, explicit_jobs: Option<usize>) -> Result<(), CliError> {
    let federation = load_federation(config)?;
    let paths = RunPaths::new(&config.out_dir);
    let jobs = explicit_jobs.unwrap_or(1);
    for &kind in &config.models {
        let trainer = config.trainers.spec_for(kind);
        let outcomes: Vec<Result<(TrainedModel, f64, f64), CliError>> =
            parallel_map(&federation, jobs, |(train, test)| {
                let (model, seconds) = timed_train(&trainer, train)?;
                let own_accuracy = accuracy(&model, test)?;
                Ok((model, seconds, own_accuracy))
            });
        let mut metrics = Vec::with_capacity(federation.len());
        for ((train, _), outcome) in federation.iter().zip(outcomes) {
            let (model, measured, own_accuracy) = outcome?;
            let training_time_s = match config.timing {
                TimingMode::Measured => measured,
                TimingMode::Fixed => fixed_time_proxy(kind, train.n_rows()),
            };
            metrics.push(NodeMetrics {
                node_id: train.node_id(),
                accuracy: own_accuracy,
                training_time_s,
                train_rows: train.n_rows(),
            });
            let bytes = fediot_core::models::serialize_model(&model);
            write_atomic(&paths.model_file(kind, train.node_id()), &bytes)?;
        }
        write_atomic(
            &paths.metrics_csv(kind),
            node_metrics_to_csv(&metrics).as_bytes(),
        )?;
        write_atomic(
            &paths.metrics_json(kind),
            provenance_json(config, &metrics).as_bytes(),
        )?;
        println!(
            "train: {kind} models for {} nodes -> {}",
            metrics.len(),
            paths.metrics_csv(kind).display()
        );
    }
    Ok(())
}

fn load_models(
    paths: &RunPaths,
    kind: ModelKind,
    federation: &[(Dataset, Dataset)],
) -> Result<Vec<TrainedModel>, CliError> {
    federation
        .iter()
        .map(|(train, _)| {
            let path = paths.model_file(kind, train.node_id());
            let bytes = read_artifact_bytes(&path, "train")?;
            Ok(deserialize_model(&bytes)?)
        })
        .collect()
}

/// Evaluates every trained model on every node's test split and writes the
/// per-model accuracy matrix.
pub fn cmd_cross_eval(config: &RunConfig) -> Result<(), CliError> {
    let federation = load_federation(config)?;
    let paths = RunPaths::new(&config.out_dir);
    for &kind in &config.models {
        let models = load_models(&paths, kind, &federation)?;
        let tests: Vec<&Dataset> = federation.iter().map(|(_, test)| test).collect();
        let matrix = matrix_from_models_parallel(&models, &tests, config.jobs)?;
        write_atomic(&paths.matrix_csv(kind), matrix.to_csv_string().as_bytes())?;
        write_atomic(
            &paths.matrix_json(kind),
            provenance_json(config, &matrix).as_bytes(),
        )?;
        println!("cross-eval: {kind} -> {}", paths.matrix_csv(kind).display());
    }
    Ok(())
}

/// Ranks the selected models from their metrics tables.
pub fn cmd_score(config: &RunConfig) -> Result<(), CliError> {
    let paths = RunPaths::new(&config.out_dir);
    let mut per_model = Vec::new();
    for &kind in &config.models {
        let text = read_artifact(&paths.metrics_csv(kind), "train")?;
        per_model.push((kind, node_metrics_from_csv(&text)?));
    }
    let card = score_models(&per_model, &config.score_weights)?;
    write_atomic(&paths.scorecard_csv(), card.to_csv_string().as_bytes())?;
    write_atomic(
        &paths.scorecard_json(),
        provenance_json(config, &card).as_bytes(),
    )?;
    let ranking: Vec<String> = card.entries.iter().map(|e| e.model.to_string()).collect();
    println!("score: {} -> {}", ranking.join(" > "), paths.scorecard_csv().display());
    Ok(())
}

/// Aggregates the stored per-node models into a majority-vote ensemble and
/// compares it against the local models, with communication accounting.
///
/// With `from_matrix`, skips the live run and reports the per-node averages
/// of a stored accuracy matrix instead (the ensemble column stays empty).
pub fn cmd_federate(config: &RunConfig, from_matrix: Option<&Path>) -> Result<(), CliError> {
    let paths = RunPaths::new(&config.out_dir);

    if let Some(matrix_path) = from_matrix {
        if config.models.len() != 1 {
            return Err(CliError::Usage(
                "`federate --from-matrix` needs exactly one --model".into(),
            ));
        }
        let kind = config.models[0];
        let text = read_artifact(matrix_path, "an earlier cross-eval")?;
        let matrix = AccuracyMatrix::from_csv_str(&text, kind)?;
        let report = FederationReport::from_row_averages(&matrix);
        write_atomic(&paths.federation_csv(kind), report.to_csv_string().as_bytes())?;
        write_atomic(
            &paths.federation_json(kind),
            provenance_json(config, &report).as_bytes(),
        )?;
        println!("federate: {kind} (from matrix) -> {}", paths.federation_csv(kind).display());
        return Ok(());
    }

    let federation = load_federation(config)?;
    for &kind in &config.models {
        let metrics = node_metrics_from_csv(&read_artifact(&paths.metrics_csv(kind), "train")?)?;
        if metrics.len() != federation.len() {
            return Err(CliError::Data(format!(
                "metrics_{kind}.csv covers {} nodes but the source has {}",
                metrics.len(),
                federation.len()
            )));
        }
        let updates: Vec<ModelUpdate> = federation
            .iter()
            .zip(&metrics)
            .map(|((train, _), m)| {
                let payload =
                    read_artifact_bytes(&paths.model_file(kind, train.node_id()), "train")?;
                Ok(ModelUpdate {
                    node_id: train.node_id(),
                    payload_bytes: payload.len(),
                    payload,
                    training_time_s: m.training_time_s,
                    train_rows: m.train_rows,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let matrix =
            AccuracyMatrix::from_csv_str(&read_artifact(&paths.matrix_csv(kind), "cross-eval")?, kind)?;
        let equal = aggregate(&updates)?;
        let ensemble = match config.weighting {
            WeightingPolicy::Equal => equal,
            WeightingPolicy::Diagonal => {
                EnsembleModel::with_weights(equal.members().to_vec(), diagonal_weights(&matrix))?
            }
        };
        let tests: Vec<&Dataset> = federation.iter().map(|(_, test)| test).collect();
        let raw_bytes: Vec<usize> = federation
            .iter()
            .map(|(train, _)| train.raw_csv_bytes())
            .collect();
        let summary = communication_cost(&updates, &raw_bytes)?;
        let report = evaluate_federation(&ensemble, &matrix, &tests)?.with_communication(summary);
        write_atomic(&paths.federation_csv(kind), report.to_csv_string().as_bytes())?;
        write_atomic(
            &paths.federation_json(kind),
            provenance_json(config, &report).as_bytes(),
        )?;
        println!(
            "federate: {kind} ensemble of {} -> {}",
            updates.len(),
            paths.federation_csv(kind).display()
        );
    }
    Ok(())
}

/// Flattens every artifact present into one plot-ready long-format table.
pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    let paths = RunPaths::new(&config.out_dir);
    let mut rows: Vec<LongRow> = Vec::new();
    let push = |rows: &mut Vec<LongRow>, model: ModelKind, node: String, metric: &str, value: f64| {
        rows.push(LongRow {
            model: model.to_string(),
            node,
            metric: metric.to_string(),
            value,
        });
    };

    for &kind in &config.models {
        if let Ok(text) = std::fs::read_to_string(paths.metrics_csv(kind)) {
            for m in node_metrics_from_csv(&text)? {
                let node = format!("node_{}", m.node_id);
                push(&mut rows, kind, node.clone(), "accuracy", m.accuracy);
                push(&mut rows, kind, node.clone(), "training_time_s", m.training_time_s);
                push(&mut rows, kind, node, "train_rows", m.train_rows as f64);
            }
        }
        if let Ok(text) = std::fs::read_to_string(paths.matrix_csv(kind)) {
            let matrix = AccuracyMatrix::from_csv_str(&text, kind)?;
            for i in 0..matrix.n_nodes() {
                for j in 0..matrix.n_nodes() {
                    push(
                        &mut rows,
                        kind,
                        format!("node_{}", i + 1),
                        &format!("accuracy_on_node_{}", j + 1),
                        matrix.get(i, j),
                    );
                }
            }
        }
        if let Ok(text) = std::fs::read_to_string(paths.federation_json(kind)) {
            let report = federation_report_from_provenance(&text)?;
            for node in &report.nodes {
                let label = format!("node_{}", node.node_id);
                push(&mut rows, kind, label.clone(), "avg_accuracy_per_node", node.avg_accuracy_per_node);
                if let Some(e) = node.ensemble_accuracy {
                    push(&mut rows, kind, label, "ensemble_accuracy", e);
                }
            }
            if let Some(comm) = report.communication {
                push(&mut rows, kind, "all".into(), "update_bytes", comm.total_update_bytes as f64);
                push(&mut rows, kind, "all".into(), "raw_train_bytes", comm.total_raw_train_bytes as f64);
                push(&mut rows, kind, "all".into(), "communication_ratio", comm.ratio);
            }
        }
    }
    if let Ok(text) = std::fs::read_to_string(paths.scorecard_json()) {
        let card = scorecard_from_provenance(&text)?;
        for e in &card.entries {
            push(&mut rows, e.model, "all".into(), "weighted_avg_accuracy", e.weighted_avg_accuracy);
            push(&mut rows, e.model, "all".into(), "weighted_avg_time_s", e.weighted_avg_time_s);
            push(&mut rows, e.model, "all".into(), "normalized_accuracy", e.normalized_accuracy);
            push(&mut rows, e.model, "all".into(), "normalized_training_time", e.normalized_training_time);
            push(&mut rows, e.model, "all".into(), "score", e.score);
        }
    }

    if rows.is_empty() {
        return Err(CliError::Data(
            "no artifacts found in the output directory; run train/cross-eval/score/federate first"
                .into(),
        ));
    }
    write_atomic(
        &paths.long_report_csv(),
        fediot_core::evaluation::long_rows_to_csv(&rows).as_bytes(),
    )?;
    println!("report: {} rows -> {}", rows.len(), paths.long_report_csv().display());
    Ok(())
}

fn data_field(text: &str) -> Result<serde_json::Value, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Data(format!("malformed report JSON: {e}")))?;
    value
        .get("data")
        .cloned()
        .ok_or_else(|| CliError::Data("report JSON lacks a `data` field".into()))
}

fn federation_report_from_provenance(text: &str) -> Result<FederationReport, CliError> {
    serde_json::from_value(data_field(text)?)
        .map_err(|e| CliError::Data(format!("malformed federation report: {e}")))
}

fn scorecard_from_provenance(text: &str) -> Result<ScoreCard, CliError> {
    serde_json::from_value(data_field(text)?)
        .map_err(|e| CliError::Data(format!("malformed scorecard: {e}")))
}
