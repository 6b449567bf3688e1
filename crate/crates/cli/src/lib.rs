//! Command-line front end for the federated botnet-detection simulator.
//!
//! Exposed as a library so integration tests can drive commands in-process;
//! `main.rs` only parses arguments and maps errors to exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use fediot_core::dataset::LabelMode;
use fediot_core::evaluation::ScoreWeights;
use fediot_core::models::ModelKind;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "fediot",
    version,
    about = "Simulate federated botnet detection: train lightweight classifiers per node, \
             evaluate them across nodes, and aggregate by majority vote at a simulated edge"
)]
pub struct Cli {
    /// JSON run configuration (required by every subcommand).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for per-node work. `train` stays at 1 unless this is
    /// given explicitly.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Override the label mode.
    #[arg(long, global = true, value_parser = parse_label_mode, value_name = "binary|multiclass")]
    pub label_mode: Option<LabelMode>,

    /// Select a model kind (repeatable); replaces the config's list.
    #[arg(long = "model", global = true, value_name = "tree|knn|logistic")]
    pub models: Vec<ModelKind>,

    /// Score weights as `accuracy:time`, e.g. `0.5:0.5`.
    #[arg(long, global = true, value_parser = parse_weights, value_name = "ACC:TIME")]
    pub weights: Option<ScoreWeights>,

    /// Override the config's output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic federation's node CSV files.
    Synth,
    /// Train the selected models on every node; write model files and metrics.
    Train,
    /// Evaluate every node's model on every node's test split.
    CrossEval,
    /// Rank the selected models by normalized accuracy and training time.
    Score,
    /// Aggregate node models into a majority-vote ensemble and report
    /// per-node accuracies plus communication costs.
    Federate {
        /// Report the row averages of a stored accuracy matrix instead of
        /// running a live federation (needs exactly one --model).
        #[arg(long, value_name = "FILE")]
        from_matrix: Option<PathBuf>,
    },
    /// Aggregate all artifacts into one plot-ready long-format CSV.
    Report,
}

fn parse_label_mode(s: &str) -> Result<LabelMode, String> {
    match s {
        "binary" => Ok(LabelMode::Binary),
        "multiclass" => Ok(LabelMode::Multiclass),
        other => Err(format!("unknown label mode {other:?} (expected binary or multiclass)")),
    }
}

fn parse_weights(s: &str) -> Result<ScoreWeights, String> {
    let (acc, time) = s
        .split_once(':')
        .ok_or_else(|| format!("expected ACC:TIME, got {s:?}"))?;
    let weights = ScoreWeights {
        accuracy_weight: acc.trim().parse().map_err(|e| format!("bad accuracy weight: {e}"))?,
        training_time_weight: time.trim().parse().map_err(|e| format!("bad time weight: {e}"))?,
    };
    weights.validate().map_err(|e| e.to_string())?;
    Ok(weights)
}

/// Loads the config file and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Usage("a run configuration is required; pass --config FILE".into())
    })?;
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(mode) = cli.label_mode {
        config.label_mode = mode;
    }
    if !cli.models.is_empty() {
        config.models = cli.models.clone();
    }
    if let Some(weights) = cli.weights {
        config.score_weights = weights;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

/// Runs one parsed invocation end to end.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Synth => commands::cmd_synth(&config),
        Command::Train => commands::cmd_train(&config, cli.jobs),
        Command::CrossEval => commands::cmd_cross_eval(&config),
        Command::Score => commands::cmd_score(&config),
        Command::Federate { from_matrix } => {
            commands::cmd_federate(&config, from_matrix.as_deref())
        }
        Command::Report => commands::cmd_report(&config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_parser_accepts_pairs_and_rejects_bad_sums() {
        let w = parse_weights("0.7:0.3").unwrap();
        assert_eq!(w.accuracy_weight, 0.7);
        assert!(parse_weights("0.7:0.7").is_err());
        assert!(parse_weights("0.7").is_err());
        assert!(parse_weights("a:b").is_err());
    }

    #[test]
    fn cli_parses_subcommands_and_globals() {
        let cli = Cli::try_parse_from([
            "fediot",
            "federate",
            "--config",
            "c.json",
            "--model",
            "tree",
            "--from-matrix",
            "m.csv",
            "--seed",
            "9",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.models, vec![ModelKind::Tree]);
        match cli.command {
            Command::Federate { from_matrix } => {
                assert_eq!(from_matrix.as_deref(), Some(std::path::Path::new("m.csv")));
            }
            other => panic!("unexpected command {other:?}"),
        }
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        let cli = Cli::try_parse_from(["fediot", "train"]).unwrap();
        let err = run(&cli).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
