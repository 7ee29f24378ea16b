use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Result};
use crate::collapse::KMeansConfig;
use crate::data::{Subset, SynthSpec};
use crate::network::{InitScheme, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Collapse,
    Sweep,
    Transfer,
    Cascade,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Collapse => "collapse",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Transfer => "transfer",
            ExperimentKind::Cascade => "cascade",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A directory holding IDX image/label pairs in the MNIST file layout.
    Idx { dir: PathBuf },
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    #[serde(default)]
    pub train: Subset,
    #[serde(default)]
    pub test: Subset,
    /// Pixel-wise standardization with statistics of the full source train split.
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Keep only these classes (relabeled to `0..len`), applied before subsetting.
    #[serde(default)]
    pub keep_classes: Option<Vec<usize>>,
    /// Super-class of every class, applied after subsetting.
    #[serde(default)]
    pub grouping: Option<Vec<usize>>,
    /// Seed of synthetic data generation; the root seed when unset.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    pub hidden_dims: Vec<usize>,
    pub init: InitScheme,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![256, 256, 256],
            init: InitScheme::He,
        }
    }
}

/// A set of iterations within a training budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    None,
    /// `0, every, 2·every, …` and the budget.
    Every { every: u64 },
    /// `0, 1, 2, 4, 8, …` and the budget.
    Log2,
    /// 0 plus `count` points geometrically spaced over `1..=budget`.
    Geometric { count: usize },
    List { iterations: Vec<u64> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Log2
    }
}

impl Schedule {
    /// Sorted, deduplicated points in `0..=budget`.
    pub fn points(&self, budget: u64) -> Vec<u64> {
        let mut pts: Vec<u64> = match self {
            Schedule::None => Vec::new(),
            Schedule::Every { every } => (0..=budget)
                .step_by((*every).max(1) as usize)
                .chain([budget])
                .collect(),
            Schedule::Log2 => std::iter::once(0)
                .chain(std::iter::successors(Some(1u64), |&p| p.checked_mul(2)).take_while(|&p| p < budget))
                .chain([budget])
                .collect(),
            Schedule::Geometric { count } => {
                let c = (*count).max(1);
                let mut v = vec![0];
                if budget > 0 {
                    for i in 0..c {
                        let frac = if c == 1 { 1.0 } else { i as f64 / (c - 1) as f64 };
                        v.push((budget as f64).powf(frac).round() as u64);
                    }
                }
                v
            }
            Schedule::List { iterations } => iterations.iter().copied().filter(|&t| t <= budget).collect(),
        };
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Iterations at which a metrics row is logged; 0 and the last iteration always are.
    pub cadence: Schedule,
    pub kmeans: KMeansConfig,
    /// Measure every row against the class means (and k-means centroids) of
    /// the final iteration instead of those of the row's own iteration.
    pub means_at_final_t: bool,
    /// Write last-layer train and test features of the final iteration as NCF1.
    pub export_features: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            cadence: Schedule::Log2,
            kmeans: KMeansConfig::default(),
            means_at_final_t: false,
            export_features: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Train samples per class of each sweep member.
    pub sizes_per_class: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for LrGrid {
    fn default() -> Self {
        Self {
            min: 0.0005,
            max: 0.25,
            points: 12,
        }
    }
}

impl LrGrid {
    /// Geometric grid with both endpoints exact.
    pub fn values(&self) -> Vec<f64> {
        if self.points < 2 {
            return vec![self.min];
        }
        let ratio = (self.max / self.min).ln();
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    self.min
                } else if i == self.points - 1 {
                    self.max
                } else {
                    self.min * (ratio * i as f64 / (self.points - 1) as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// Fine-tune rows of the source train split; must not overlap the pretraining rows.
    pub finetune_train: Subset,
    pub finetune_test: Subset,
    #[serde(default)]
    pub lr_grid: LrGrid,
    #[serde(default = "default_finetune_iterations")]
    pub finetune_iterations: u64,
}

fn default_finetune_iterations() -> u64 {
    5000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

/// Everything needed to replay an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub optimizer: TrainConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Iterations at which checkpoints are written.
    #[serde(default)]
    pub checkpoints: Schedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub transfer: Option<TransferConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let o = &self.optimizer;
        if o.batch_size == 0 {
            return bad("optimizer.batch_size must be at least 1".into());
        }
        if o.iterations == 0 {
            return bad("optimizer.iterations must be at least 1".into());
        }
        if !(o.base_lr.is_finite() && o.base_lr > 0.0) {
            return bad(format!("optimizer.base_lr must be positive, got {}", o.base_lr));
        }
        if !(0.0..1.0).contains(&o.momentum) {
            return bad(format!("optimizer.momentum must be in [0, 1), got {}", o.momentum));
        }
        if let Some(th) = o.loss_threshold {
            if !(th.is_finite() && th > 0.0) {
                return bad(format!("optimizer.loss_threshold must be positive, got {th}"));
            }
        }
        if self.architecture.hidden_dims.iter().any(|&d| d == 0) {
            return bad("architecture.hidden_dims entries must be at least 1".into());
        }
        for (name, s) in [("metrics.cadence", &self.metrics.cadence), ("checkpoints", &self.checkpoints)] {
            match s {
                Schedule::Every { every: 0 } => return bad(format!("{name}.every must be at least 1")),
                Schedule::Geometric { count: 0 } => return bad(format!("{name}.count must be at least 1")),
                _ => {}
            }
        }
        let km = &self.metrics.kmeans;
        if km.restarts == 0 || km.max_iters == 0 || !(km.tol >= 0.0) {
            return bad("metrics.kmeans needs restarts >= 1, max_iters >= 1 and tol >= 0".into());
        }
        match self.experiment {
            ExperimentKind::Cascade if self.architecture.hidden_dims.len() < 2 => {
                return bad("cascade needs at least 2 hidden layers".into())
            }
            ExperimentKind::Sweep => match &self.sweep {
                Some(s) if !s.sizes_per_class.is_empty() && s.sizes_per_class.iter().all(|&n| n > 0) => {}
                _ => return bad("sweep needs a non-empty sweep.sizes_per_class list of positive sizes".into()),
            },
            ExperimentKind::Transfer => {
                let Some(t) = &self.transfer else {
                    return bad("transfer needs a transfer section".into());
                };
                if self.dataset.grouping.is_none() {
                    return bad("transfer needs dataset.grouping for super-class pretraining".into());
                }
                let g = &t.lr_grid;
                if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) || g.points == 0 {
                    return bad("transfer.lr_grid needs 0 < min <= max and points >= 1".into());
                }
                if t.finetune_iterations == 0 {
                    return bad("transfer.finetune_iterations must be at least 1".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (sorted keys) without `output_dir`,
    /// so moving a run does not change its identity.
    pub fn hash(&self) -> [u8; 32] {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        Sha256::digest(v.to_string().as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
