//! `stowlab` command line: instance generation, training, evaluation, SMIP
//! baselines, sweeps and reports.
//!
//! Output files, all under `--out`:
//!
//! | command           | files                                                        |
//! |-------------------|--------------------------------------------------------------|
//! | `generate`        | `instances.csv`, `instances.json`                            |
//! | `train`           | `checkpoint.json`, `metrics.jsonl`, `train.json`             |
//! | `eval`            | `results.csv`, `eval_instances.csv`, `eval.json`             |
//! | `smip`            | `smip.csv`, `smip.json`, optional LP export                  |
//! | `compare`         | `compare.csv`                                                |
//! | `sweep-ur`        | `sweep_ur.csv`                                               |
//! | `sweep-scenarios` | `sweep_scenarios.csv`                                        |
//!
//! Wall-clock times appear only in the JSON files and in `compare.csv`, so
//! `eval` and `smip` CSVs are byte-identical across repeated runs.

pub mod commands;
pub mod out;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stowlab_core::{Result, StowError, VoyageConfig};

#[derive(Debug, Parser)]
#[command(name = "stowlab", version, about = "Master stowage planning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Preset name (mini, toy, paper) or path to a TOML config.
    #[arg(long, default_value = "mini")]
    pub config: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Port count override; `compare` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub ports: Vec<usize>,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemandArg {
    Continuous,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Sac,
    Random,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmipMode {
    Na,
    Pi,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write demand realizations for seeded instances.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        instances: u64,
        #[arg(long, value_enum, default_value_t = DemandArg::Continuous)]
        mode: DemandArg,
    },
    /// Train a policy with SAC.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "PBS/CP")]
        pipeline: String,
        /// Environment steps.
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        #[arg(long)]
        lambda_f: Option<f64>,
        #[arg(long)]
        warmup: Option<usize>,
        /// Hidden layer sizes for actor and critics, e.g. `64,64`.
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<usize>,
    },
    /// Evaluate a checkpoint or a baseline policy.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = PolicyArg::Sac)]
        policy: PolicyArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "PBS/CP")]
        pipeline: String,
        #[arg(long, default_value_t = 30)]
        instances: u64,
        #[arg(long, default_value_t = 1)]
        rollouts: usize,
        /// Sample actions instead of using the mean (SAC only).
        #[arg(long)]
        stochastic: bool,
    },
    /// Solve the scenario-tree program for seeded instances.
    Smip {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SmipMode::Na)]
        mode: SmipMode,
        #[arg(long, default_value_t = 3)]
        scenarios: usize,
        #[arg(long, default_value_t = 1)]
        instances: u64,
        /// Seconds per instance.
        #[arg(long, default_value_t = 3600.0)]
        time_limit: f64,
        /// Write the first instance's model in LP format here.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Branch on binaries instead of solving the relaxation.
        #[arg(long)]
        branch: bool,
    },
    /// Paired comparison of methods on shared instances.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "PBS/CP")]
        pipeline: String,
        #[arg(long, default_value_t = 30)]
        instances: u64,
        #[arg(long, default_value_t = 1)]
        rollouts: usize,
        #[arg(long, default_value_t = 3)]
        scenarios: usize,
        #[arg(long)]
        branch: bool,
    },
    /// Evaluate a fixed checkpoint across utilization rates.
    SweepUr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.9,1.0,1.1,1.2")]
        ur: Vec<f64>,
        #[arg(long, default_value = "PBS/CP")]
        pipeline: String,
        #[arg(long, default_value_t = 30)]
        instances: u64,
        #[arg(long, default_value_t = 1)]
        rollouts: usize,
        /// Also solve SMIP-NA at each rate with this many scenarios.
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// NA and PI objectives across scenario counts.
    SweepScenarios {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        scenarios: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        instances: u64,
        #[arg(long)]
        branch: bool,
    },
    /// Summarize the CSV files in a results directory.
    Report {
        #[arg(default_value = "results")]
        dir: PathBuf,
    },
}

/// Loads a preset or TOML file, applying a single `--ports` override.
pub fn load_config(name: &str, ports: Option<usize>) -> Result<VoyageConfig> {
    let mut cfg = match VoyageConfig::preset(name) {
        Ok(c) => c,
        Err(_) if std::path::Path::new(name).exists() => VoyageConfig::from_toml_str(&std::fs::read_to_string(name)?)?,
        Err(_) => {
            return Err(StowError::InvalidConfig(format!(
                "`{name}` is neither a preset (mini, toy, paper) nor a config file"
            )))
        }
    };
    if let Some(p) = ports {
        cfg.n_ports = p;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn single_port(common: &Common) -> Result<Option<usize>> {
    match common.ports.as_slice() {
        [] => Ok(None),
        [p] => Ok(Some(*p)),
        _ => Err(StowError::InvalidConfig("this command takes a single --ports value".into())),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    use commands::*;
    match cli.command {
        Command::Generate { common, instances, mode } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            generate(&cfg, &common, instances, mode)
        }
        Command::Train {
            common,
            pipeline,
            budget,
            lambda_f,
            warmup,
            hidden,
        } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            train(&cfg, &common, &pipeline, budget, lambda_f, warmup, &hidden)
        }
        Command::Eval {
            common,
            policy,
            checkpoint,
            pipeline,
            instances,
            rollouts,
            stochastic,
        } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            let spec = EvalArgs {
                policy,
                checkpoint,
                pipeline,
                instances,
                rollouts,
                stochastic,
            };
            eval(&cfg, &common, &spec)
        }
        Command::Smip {
            common,
            mode,
            scenarios,
            instances,
            time_limit,
            export,
            branch,
        } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            let args = SmipArgs {
                mode,
                scenarios,
                instances,
                time_limit,
                branch,
            };
            smip(&cfg, &common, &args, export.as_deref())
        }
        Command::Compare {
            common,
            checkpoint,
            pipeline,
            instances,
            rollouts,
            scenarios,
            branch,
        } => compare(&common, checkpoint.as_deref(), &pipeline, instances, rollouts, scenarios, branch),
        Command::SweepUr {
            common,
            checkpoint,
            ur,
            pipeline,
            instances,
            rollouts,
            scenarios,
        } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            sweep_ur(&cfg, &common, &checkpoint, &ur, &pipeline, instances, rollouts, scenarios)
        }
        Command::SweepScenarios {
            common,
            scenarios,
            instances,
            branch,
        } => {
            let cfg = load_config(&common.config, single_port(&common)?)?;
            sweep_scenarios(&cfg, &common, &scenarios, instances, branch)
        }
        Command::Report { dir } => {
            print!("{}", report(&dir)?);
            Ok(())
        }
    }
}
