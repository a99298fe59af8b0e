//! Argument parsing and dispatch for the `trajrl` binary.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::artifacts::read_text;
use crate::commands;
use crate::config::{merge, unwrap_manifest, ExperimentConfig, SCHEMA};
use crate::error::{HarnessError, Result};
use crate::presets::{preset, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "trajrl", version, about = "Trajectory-centric RL experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one local controller and write its learning curve.
    TrainLocal(Options),
    /// Train a local controller per condition from demonstrations.
    BuildLibrary(Options),
    /// Behavior-clone a library into a network policy.
    Distill(Options),
    /// Sweep the library, its controllers and networks over random conditions.
    Evaluate(Options),
    /// Compare the solver against the exact Riccati solution.
    Oracle(Options),
    /// Collect learning curves of several runs into one CSV.
    ExportCurves(Options),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// JSON configuration, merged over the preset; a run manifest also works.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Named base configuration.
    #[arg(long)]
    pub preset: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainLocal(_) => "train-local",
            Command::BuildLibrary(_) => "build-library",
            Command::Distill(_) => "distill",
            Command::Evaluate(_) => "evaluate",
            Command::Oracle(_) => "oracle",
            Command::ExportCurves(_) => "export-curves",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::TrainLocal(o)
            | Command::BuildLibrary(o)
            | Command::Distill(o)
            | Command::Evaluate(o)
            | Command::Oracle(o)
            | Command::ExportCurves(o) => o,
        }
    }
}

/// Preset, then config file, then `--seed`.
pub fn resolve_config(opts: &Options) -> Result<ExperimentConfig> {
    if opts.preset.is_none() && opts.config.is_none() {
        return Err(HarnessError::Config("no configuration: pass --config or --preset".into()));
    }
    let mut value = json!({ "schema": SCHEMA });
    if let Some(name) = &opts.preset {
        let p = preset(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset \"{name}\"; known: {}", PRESETS.join(", "))))?;
        merge(&mut value, p);
    }
    if let Some(path) = &opts.config {
        let text = read_text(path)?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
        merge(&mut value, unwrap_manifest(file));
    }
    if let Some(seed) = opts.seed {
        value["seed"] = json!(seed);
    }
    ExperimentConfig::from_value(value)
}

fn output_dir(cfg: &ExperimentConfig, opts: &Options, command: &str) -> PathBuf {
    opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| Path::new("runs").join(command))
}

pub fn run(cli: &Cli) -> Result<()> {
    let opts = cli.command.options();
    let cfg = resolve_config(opts)?;
    let out = output_dir(&cfg, opts, cli.command.name());
    match &cli.command {
        Command::TrainLocal(_) => {
            let outcome = commands::cmd_train_local(&cfg, &out)?;
            if let Some(last) = outcome.curve.rows.last() {
                println!("iterations {}  final mean cost {:.6}  model cost {:.6}", last.iteration, last.mean_cost, last.model_cost);
            }
        }
        Command::BuildLibrary(_) => {
            let lib = commands::cmd_build_library(&cfg, &out)?;
            println!("library of {} entries", lib.len());
        }
        Command::Distill(_) => {
            let policy = commands::cmd_distill(&cfg, &out)?;
            println!("network {} -> {}, final loss {:.6}", policy.input_dim(), policy.output_dim(), policy.meta.final_loss);
        }
        Command::Evaluate(_) => {
            commands::cmd_evaluate(&cfg, &out)?;
        }
        Command::Oracle(_) => {
            commands::cmd_oracle(&cfg, &out)?;
        }
        Command::ExportCurves(_) => {
            commands::cmd_export_curves(&cfg, &out)?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
