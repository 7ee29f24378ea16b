//! Command-line surface: config parsing, experiment dispatch, metrics on
//! exported features, and plotting.

mod config;
mod metrics;
mod plot;

pub use config::{apply_override, parse_config, parse_config_str};
pub use metrics::{cmd_metrics, feature_metrics, metrics_csv, FileMetrics, METRICS_CSV_HEADER};
pub use plot::{cmd_plot, PlotOptions};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::collapse::{CollapseError, KMeansConfig};
use crate::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutcome, HarnessError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<CollapseError> for CliError {
    fn from(e: CollapseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    /// 1 config error, 2 runtime or training error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Harness(HarnessError::Config(_)) => 1,
            CliError::Io { .. } => 3,
            CliError::Harness(e) if e.is_io() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nclab", version, about = "Train small MLPs and measure train/test variability collapse")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collapse over training time (metrics.csv)
    Train(RunArgs),
    /// One training run per train-set size (sweep.csv)
    Sweep(RunArgs),
    /// Super-class pretraining, then fine-tuning from each checkpoint (transfer.csv)
    Transfer(RunArgs),
    /// Per-layer train collapse over training time (metrics.csv with layer columns)
    Cascade(RunArgs),
    /// Variances of NCF1 feature files
    Metrics(MetricsArgs),
    /// SVG line chart of CSV columns
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value by dotted key, e.g. optimizer.base_lr=0.05 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides output_dir)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root seed (overrides seed)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// NCF1 files
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Seed of the k-means stream (the run's root seed reproduces its logged values)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV written by one of the experiments
    pub csv: PathBuf,
    /// Columns to plot, comma separated (default: all but the x column)
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// x column (default: the first column)
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub log_y: bool,
    #[arg(long)]
    pub title: Option<String>,
    /// Output SVG path
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    fn load(&self, expected: ExperimentKind, command: &str) -> Result<ExperimentConfig, CliError> {
        let mut overrides = self.set.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", serde_json::Value::String(out.display().to_string())));
        }
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        let cfg = parse_config(&self.config, &overrides)?;
        if cfg.experiment != expected {
            return Err(CliError::Config(format!(
                "`nclab {command}` cannot run a `{}` experiment config; use `nclab {}`",
                cfg.experiment,
                subcommand_for(cfg.experiment)
            )));
        }
        Ok(cfg)
    }
}

fn subcommand_for(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Collapse => "train",
        ExperimentKind::Sweep => "sweep",
        ExperimentKind::Transfer => "transfer",
        ExperimentKind::Cascade => "cascade",
    }
}

fn report(outcome: &ExperimentOutcome, cfg: &ExperimentConfig) {
    let dir = cfg.output_dir.display();
    match outcome {
        ExperimentOutcome::Collapse(o) | ExperimentOutcome::Cascade(o) => {
            let last = o.records.last().expect("final row always logged");
            println!(
                "{dir}/metrics.csv: {} rows, stopped at iteration {} ({:?})",
                o.records.len(),
                o.final_iteration,
                o.stop_reason
            );
            println!(
                "final train_loss {:.3e}  train_variance {:.4}  strong_test_variance {:.4}  weak_test_variance {:.4}  test_error {:.4}",
                last.train_loss, last.train_variance, last.strong_test_variance, last.weak_test_variance, last.test_error
            );
            if !last.layer_variances.is_empty() && matches!(outcome, ExperimentOutcome::Cascade(_)) {
                println!("per-layer train variance {:?}", last.layer_variances);
            }
        }
        ExperimentOutcome::Sweep(o) => {
            println!("{dir}/sweep.csv: {} members", o.rows.len());
            for r in &o.rows {
                match &r.outcome {
                    Ok(rec) => println!(
                        "  n_train {:6}  train_variance {:.4}  strong_test_variance {:.4}  test_error {:.4}",
                        r.n_train, rec.train_variance, rec.strong_test_variance, rec.test_error
                    ),
                    Err(e) => println!("  n_train {:6}  FAILED: {e}", r.n_train),
                }
            }
        }
        ExperimentOutcome::Transfer(o) => {
            println!("{dir}/transfer.csv: {} checkpoints", o.rows.len());
            for r in &o.rows {
                println!(
                    "  iter {:6}  pretrain_train_variance {:.4}  best_finetune_test_acc {:.4} (lr {})",
                    r.checkpoint_iter, r.pretrain_train_variance, r.best_finetune_test_acc, r.best_lr
                );
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (args, kind) = match &cli.command {
        Command::Train(a) => (a, ExperimentKind::Collapse),
        Command::Sweep(a) => (a, ExperimentKind::Sweep),
        Command::Transfer(a) => (a, ExperimentKind::Transfer),
        Command::Cascade(a) => (a, ExperimentKind::Cascade),
        Command::Metrics(m) => {
            let rows = cmd_metrics(&m.files, m.seed, &KMeansConfig::default())?;
            let csv = metrics_csv(&rows);
            print!("{csv}");
            if let Some(out) = &m.out {
                metrics::write_text(out, &csv)?;
            }
            return Ok(());
        }
        Command::Plot(p) => {
            let text = std::fs::read_to_string(&p.csv).map_err(|source| CliError::Io {
                path: p.csv.clone(),
                source,
            })?;
            let svg = cmd_plot(
                &text,
                &PlotOptions {
                    x: p.x.clone(),
                    columns: p.columns.clone(),
                    log_y: p.log_y,
                    title: p.title.clone(),
                },
            )?;
            return metrics::write_text(&p.out, &svg);
        }
    };
    let cfg = args.load(kind, subcommand_for(kind))?;
    let outcome = run_experiment(&cfg)?;
    report(&outcome, &cfg);
    Ok(())
}
