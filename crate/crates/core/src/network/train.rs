use serde::{Deserialize, Serialize};

use super::{
    backward, cross_entropy_loss, forward, sgd_momentum_step, LrSchedule, NetworkError,
    NetworkParams, OptimizerState, Result,
};
use crate::data::Dataset;
use crate::numerics::{shuffle_permutation, Matrix, Rng};

/// Minibatch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Iteration budget; also the cosine horizon `t_max`.
    pub iterations: u64,
    pub base_lr: f64,
    pub momentum: f64,
    /// Stop once an epoch's mean minibatch loss drops below this.
    pub loss_threshold: Option<f64>,
    pub schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            iterations: 80_000,
            base_lr: 0.001,
            momentum: 0.9,
            loss_threshold: None,
            schedule: LrSchedule::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    LossThreshold,
}

/// Parameters and optimizer state at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub params: NetworkParams<f32>,
    pub optimizer: OptimizerState<f32>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub snapshots: Vec<Snapshot>,
    /// Minibatch loss of every iteration, in order.
    pub loss_log: Vec<f64>,
    pub final_iteration: u64,
    pub stop_reason: StopReason,
    pub params: NetworkParams<f32>,
}

/// Stepwise minibatch trainer.
///
/// The train set is reshuffled every `⌈n / batch⌉` iterations; the last batch
/// of an epoch may be smaller.
pub struct Trainer<'a> {
    data: &'a Dataset,
    cfg: TrainConfig,
    params: NetworkParams<f32>,
    optimizer: OptimizerState<f32>,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch_loss: f64,
    epoch_batches: usize,
    last_epoch_loss: Option<f64>,
    loss_log: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        params: NetworkParams<f32>,
        data: &'a Dataset,
        cfg: &TrainConfig,
        rng: Rng,
    ) -> Result<Self> {
        if cfg.batch_size == 0 || cfg.batch_size > data.len() {
            return Err(NetworkError::InvalidConfig(format!(
                "batch size {} must be in 1..={}",
                cfg.batch_size,
                data.len()
            )));
        }
        if params.input_dim() != data.input_dim() || params.num_classes() != data.num_classes {
            return Err(NetworkError::Shape(format!(
                "network maps {} -> {} but data has {} features and {} classes",
                params.input_dim(),
                params.num_classes(),
                data.input_dim(),
                data.num_classes
            )));
        }
        let optimizer = OptimizerState::new(&params, cfg.momentum, cfg.base_lr, cfg.iterations)?
            .with_schedule(cfg.schedule);
        Ok(Self {
            data,
            cfg: cfg.clone(),
            params,
            optimizer,
            rng,
            order: Vec::new(),
            cursor: 0,
            epoch_loss: 0.0,
            epoch_batches: 0,
            last_epoch_loss: None,
            loss_log: Vec::new(),
        })
    }

    pub fn iteration(&self) -> u64 {
        self.optimizer.t
    }

    pub fn params(&self) -> &NetworkParams<f32> {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState<f32> {
        &self.optimizer
    }

    pub fn loss_log(&self) -> &[f64] {
        &self.loss_log
    }

    pub fn into_parts(self) -> (NetworkParams<f32>, Vec<f64>) {
        (self.params, self.loss_log)
    }

    /// Mean minibatch loss of the most recently completed epoch.
    pub fn last_epoch_loss(&self) -> Option<f64> {
        self.last_epoch_loss
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            iteration: self.optimizer.t,
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
        }
    }

    /// Why training should stop now, if it should.
    pub fn stop_reason(&self) -> Option<StopReason> {
        if self.optimizer.t >= self.cfg.iterations {
            return Some(StopReason::Budget);
        }
        match (self.cfg.loss_threshold, self.last_epoch_loss) {
            (Some(th), Some(l)) if l < th => Some(StopReason::LossThreshold),
            _ => None,
        }
    }

    /// One SGD iteration; returns the minibatch loss.
    pub fn step(&mut self) -> Result<f64> {
        if self.cursor == 0 {
            self.order = shuffle_permutation(&mut self.rng, self.data.len())?;
        }
        let end = (self.cursor + self.cfg.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        let x = self.data.inputs.select_rows(idx);
        let y: Vec<usize> = idx.iter().map(|&i| self.data.labels[i]).collect();

        let trace = forward(&self.params, &x)?;
        let (loss, _) = cross_entropy_loss(&trace.logits, &y)?;
        if !loss.is_finite() {
            return Err(NetworkError::NonFiniteGradient {
                layer: self.params.layers.len() - 1,
                iteration: self.optimizer.t,
            });
        }
        let grads = backward(&self.params, &trace, &x, &y)?;
        sgd_momentum_step(&mut self.params, &grads, &mut self.optimizer)?;

        self.loss_log.push(loss);
        self.epoch_loss += loss;
        self.epoch_batches += 1;
        self.cursor = end;
        if self.cursor == self.order.len() {
            self.cursor = 0;
            self.last_epoch_loss = Some(self.epoch_loss / self.epoch_batches as f64);
            self.epoch_loss = 0.0;
            self.epoch_batches = 0;
        }
        Ok(loss)
    }
}

/// Error from [`train_loop`], carrying the latest scheduled snapshot.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: NetworkError,
    pub last_good: Option<Snapshot>,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.last_good {
            Some(s) => write!(f, "{} (last good snapshot at iteration {})", self.error, s.iteration),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for TrainFailure {}

/// Trains until the budget or loss threshold is hit, snapshotting at every
/// iteration listed in `schedule` and at the final iteration.
pub fn train_loop(
    params: NetworkParams<f32>,
    data: &Dataset,
    cfg: &TrainConfig,
    schedule: &[u64],
    rng: Rng,
) -> std::result::Result<TrainOutcome, TrainFailure> {
    let mut trainer = Trainer::new(params, data, cfg, rng).map_err(|error| TrainFailure {
        error,
        last_good: None,
    })?;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    loop {
        let t = trainer.iteration();
        if schedule.contains(&t) {
            snapshots.push(trainer.snapshot());
        }
        if let Some(reason) = trainer.stop_reason() {
            if snapshots.last().map(|s| s.iteration) != Some(t) {
                snapshots.push(trainer.snapshot());
            }
            let (params, loss_log) = trainer.into_parts();
            return Ok(TrainOutcome {
                snapshots,
                loss_log,
                final_iteration: t,
                stop_reason: reason,
                params,
            });
        }
        if let Err(error) = trainer.step() {
            return Err(TrainFailure {
                error,
                last_good: snapshots.pop(),
            });
        }
    }
}

/// Mean cross-entropy and misclassification rate over a whole dataset.
pub fn evaluate(params: &NetworkParams<f32>, inputs: &Matrix<f32>, labels: &[usize]) -> Result<(f64, f64)> {
    let trace = forward(params, inputs)?;
    let (loss, _) = cross_entropy_loss(&trace.logits, labels)?;
    Ok((loss, classification_error(&trace.logits, labels)))
}

/// Fraction of rows whose arg-max logit differs from the label (ties go to the lowest index).
pub fn classification_error(logits: &Matrix<f32>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let wrong = logits
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best != y
        })
        .count();
    wrong as f64 / labels.len() as f64
}
