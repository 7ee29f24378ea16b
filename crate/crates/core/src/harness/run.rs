use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::{checkpoint_name, load_checkpoint, save_checkpoint, Checkpoint};
use super::config::{ExperimentConfig, ExperimentKind, MetricsConfig};
use super::csv::{render, write_metrics_csv, SWEEP_HEADER, TRANSFER_HEADER};
use super::prepare::{experiment_data, load_source, prepare_split};
use super::{write_atomic, HarnessError, Result};
use crate::collapse::{
    class_means, kmeans_with_inits, variance_ratio, weak_test_variance, write_ncf1, Centroids,
    ClassMeans, CollapseRecord, FeatureMatrix,
};
use crate::data::{Dataset, Subset};
use crate::network::{
    classification_error, cross_entropy_loss, forward, init_params_with, reinit_head,
    MlpArchitecture, NetworkParams, StopReason, TrainConfig, Trainer,
};
use crate::numerics::{derive_seed, Matrix, Rng, Stream};

/// Which hidden layers to extract (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelector {
    Last,
    All,
    Layer(u32),
}

fn select_features(
    hidden: Vec<Matrix<f32>>,
    data: &Dataset,
    selector: LayerSelector,
    iteration: u64,
) -> Result<Vec<FeatureMatrix>> {
    let l = hidden.len();
    if l == 0 {
        return Err(HarnessError::Config("network has no hidden layers".into()));
    }
    let wanted: Vec<usize> = match selector {
        LayerSelector::Last => vec![l - 1],
        LayerSelector::All => (0..l).collect(),
        LayerSelector::Layer(i) if i >= 1 && i as usize <= l => vec![i as usize - 1],
        LayerSelector::Layer(i) => {
            return Err(HarnessError::Config(format!("layer {i} requested from a network with {l} hidden layers")))
        }
    };
    hidden
        .into_iter()
        .enumerate()
        .filter(|(i, _)| wanted.contains(i))
        .map(|(i, h)| {
            Ok(FeatureMatrix::new(h, data.labels.clone(), data.num_classes, i as u32 + 1, iteration, data.split)?)
        })
        .collect()
}

/// Hidden-layer features of every row of `data`, in row order.
pub fn extract_features(
    params: &NetworkParams<f32>,
    data: &Dataset,
    selector: LayerSelector,
    iteration: u64,
) -> Result<Vec<FeatureMatrix>> {
    if params.input_dim() != data.input_dim() {
        return Err(crate::network::NetworkError::Shape(format!(
            "network expects {} inputs, data has {}",
            params.input_dim(),
            data.input_dim()
        ))
        .into());
    }
    select_features(forward(params, &data.inputs)?.hidden, data, selector, iteration)
}

/// Centres every metric is measured against.
struct Reference {
    train: Vec<ClassMeans>,
    test: ClassMeans,
    centroids: Centroids,
}

fn reference(train: &[FeatureMatrix], test: &FeatureMatrix, metrics: &MetricsConfig, seed: u64) -> Result<Reference> {
    let test_means = class_means(test)?;
    let mut rng = Rng::for_stream(derive_seed(seed, test.iteration), Stream::KMeans);
    let centroids = kmeans_with_inits(
        &test.features,
        test.num_classes,
        &mut rng,
        &metrics.kmeans,
        std::slice::from_ref(&test_means.means),
    )?;
    Ok(Reference {
        train: train.iter().map(class_means).collect::<std::result::Result<_, _>>()?,
        test: test_means,
        centroids,
    })
}

struct Measured {
    record: CollapseRecord,
    train_features: Vec<FeatureMatrix>,
    test_features: FeatureMatrix,
}

fn measure_with(
    params: &NetworkParams<f32>,
    train: &Dataset,
    test: &Dataset,
    iteration: u64,
    metrics: &MetricsConfig,
    seed: u64,
    fixed: Option<&Reference>,
) -> Result<Measured> {
    let tr = forward(params, &train.inputs)?;
    let (train_loss, _) = cross_entropy_loss(&tr.logits, &train.labels)?;
    let train_error = classification_error(&tr.logits, &train.labels);
    let te = forward(params, &test.inputs)?;
    let test_error = classification_error(&te.logits, &test.labels);
    let train_features = select_features(tr.hidden, train, LayerSelector::All, iteration)?;
    let test_features = select_features(te.hidden, test, LayerSelector::Last, iteration)?
        .pop()
        .expect("one layer selected");
    let own;
    let r = match fixed {
        Some(r) => r,
        None => {
            own = reference(&train_features, &test_features, metrics, seed)?;
            &own
        }
    };
    let layer_variances = train_features
        .iter()
        .zip(&r.train)
        .map(|(f, m)| variance_ratio(f, m))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let record = CollapseRecord {
        iteration,
        train_loss,
        train_error,
        test_error,
        train_variance: *layer_variances.last().expect("at least one hidden layer"),
        strong_test_variance: variance_ratio(&test_features, &r.test)?,
        weak_test_variance: weak_test_variance(&test_features, &r.centroids)?,
        layer_variances,
    };
    Ok(Measured {
        record,
        train_features,
        test_features,
    })
}

/// One metrics row for `params`, with class means and k-means centroids of
/// the same iteration. `layer_variances` always covers every hidden layer.
pub fn measure(
    params: &NetworkParams<f32>,
    train: &Dataset,
    test: &Dataset,
    iteration: u64,
    metrics: &MetricsConfig,
    seed: u64,
) -> Result<CollapseRecord> {
    Ok(measure_with(params, train, test, iteration, metrics, seed, None)?.record)
}

#[derive(Debug, Clone)]
pub struct CollapseOutcome {
    pub records: Vec<CollapseRecord>,
    pub final_iteration: u64,
    pub stop_reason: StopReason,
    /// `(iteration, path)` of every checkpoint written.
    pub checkpoints: Vec<(u64, PathBuf)>,
    pub params: NetworkParams<f32>,
}

fn echo_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(cfg).expect("config serializes");
    text.push('\n');
    write_atomic(&dir.join("config.json"), text.as_bytes())
}

fn write_run_info(
    cfg: &ExperimentConfig,
    dir: &Path,
    rows: &[(u64, f64)],
    final_iteration: u64,
    stop: Option<StopReason>,
) -> Result<()> {
    let info = serde_json::json!({
        "experiment": cfg.experiment,
        "config_hash": cfg.hash_hex(),
        "final_iteration": final_iteration,
        "stop_reason": stop,
        "rows": rows
            .iter()
            .map(|(t, s)| serde_json::json!({"iteration": t, "wall_clock_seconds": s}))
            .collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&info).expect("json serializes");
    text.push('\n');
    write_atomic(&dir.join("run_info.json"), text.as_bytes())
}

/// Trains on `train`, logging metrics at the cadence and writing scheduled
/// checkpoints, all under `dir`.
fn tracked_run(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, per_layer: bool, dir: &Path) -> Result<CollapseOutcome> {
    let arch = MlpArchitecture::new(train.input_dim(), cfg.architecture.hidden_dims.clone(), train.num_classes)?;
    let params = init_params_with(&arch, cfg.architecture.init, &mut Rng::for_stream(cfg.seed, Stream::Init))?;
    let mut trainer = Trainer::new(params, train, &cfg.optimizer, Rng::for_stream(cfg.seed, Stream::Shuffle))?;
    let budget = cfg.optimizer.iterations;
    let cadence = cfg.metrics.cadence.points(budget);
    let ckpt_points = cfg.checkpoints.points(budget);
    let hash = cfg.hash();
    let deferred = cfg.metrics.means_at_final_t;
    let metrics_path = dir.join("metrics.csv");

    let start = Instant::now();
    let mut records = Vec::new();
    let mut pending: Vec<(u64, NetworkParams<f32>)> = Vec::new();
    let mut wall = Vec::new();
    let mut checkpoints: Vec<(u64, PathBuf)> = Vec::new();
    let stop_reason = loop {
        let t = trainer.iteration();
        let stop = trainer.stop_reason();
        if ckpt_points.binary_search(&t).is_ok() || (stop.is_some() && !ckpt_points.is_empty()) {
            let path = dir.join("checkpoints").join(checkpoint_name(t));
            save_checkpoint(&Checkpoint::from_snapshot(&trainer.snapshot(), hash), &path)?;
            checkpoints.push((t, path));
        }
        if cadence.binary_search(&t).is_ok() || stop.is_some() {
            if deferred {
                pending.push((t, trainer.params().clone()));
            } else {
                records.push(measure_with(trainer.params(), train, test, t, &cfg.metrics, cfg.seed, None)?.record);
            }
            wall.push((t, start.elapsed().as_secs_f64()));
        }
        if let Some(reason) = stop {
            break reason;
        }
        if let Err(error) = trainer.step() {
            write_metrics_csv(&metrics_path, &records, per_layer)?;
            write_run_info(cfg, dir, &wall, trainer.iteration(), None)?;
            return Err(HarnessError::Training {
                error,
                iteration: trainer.iteration(),
                last_checkpoint: checkpoints.last().map(|c| c.1.clone()),
            });
        }
    };
    let final_iteration = trainer.iteration();
    let mut last = None;
    if deferred {
        let fin = measure_with(trainer.params(), train, test, final_iteration, &cfg.metrics, cfg.seed, None)?;
        let r = reference(&fin.train_features, &fin.test_features, &cfg.metrics, cfg.seed)?;
        for (t, p) in &pending {
            records.push(measure_with(p, train, test, *t, &cfg.metrics, cfg.seed, Some(&r))?.record);
        }
        last = Some(fin);
    }
    write_metrics_csv(&metrics_path, &records, per_layer)?;
    if cfg.metrics.export_features {
        let fin = match last {
            Some(m) => m,
            None => measure_with(trainer.params(), train, test, final_iteration, &cfg.metrics, cfg.seed, None)?,
        };
        let train_last = fin.train_features.last().expect("at least one hidden layer");
        write_atomic(&dir.join("features").join("train_final.ncf1"), &write_ncf1(train_last))?;
        write_atomic(&dir.join("features").join("test_final.ncf1"), &write_ncf1(&fin.test_features))?;
    }
    write_run_info(cfg, dir, &wall, final_iteration, Some(stop_reason))?;
    let (params, _) = trainer.into_parts();
    Ok(CollapseOutcome {
        records,
        final_iteration,
        stop_reason,
        checkpoints,
        params,
    })
}

fn run_tracked(cfg: &ExperimentConfig, per_layer: bool) -> Result<CollapseOutcome> {
    cfg.validate()?;
    echo_config(cfg, &cfg.output_dir)?;
    let source = load_source(&cfg.dataset, cfg.seed)?;
    let (train, test) = experiment_data(cfg, &source)?;
    tracked_run(cfg, &train, &test, per_layer, &cfg.output_dir)
}

/// Train/test collapse over training time; writes `metrics.csv`.
pub fn run_collapse_experiment(cfg: &ExperimentConfig) -> Result<CollapseOutcome> {
    run_tracked(cfg, false)
}

/// As [`run_collapse_experiment`], with one train-variance column per hidden layer.
pub fn run_cascade_experiment(cfg: &ExperimentConfig) -> Result<CollapseOutcome> {
    if cfg.architecture.hidden_dims.len() < 2 {
        return Err(HarnessError::Config("cascade needs at least 2 hidden layers".into()));
    }
    run_tracked(cfg, true)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n_per_class: usize,
    pub n_train: usize,
    /// Final metrics row, or the error message of a failed member.
    pub outcome: std::result::Result<CollapseRecord, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
}

/// The standalone collapse config of one sweep member.
pub fn sweep_member_config(cfg: &ExperimentConfig, n_per_class: usize) -> ExperimentConfig {
    let mut m = cfg.clone();
    m.experiment = ExperimentKind::Collapse;
    m.sweep = None;
    m.dataset.train = Subset::PerClass { n: n_per_class };
    m.dataset.seed = Some(cfg.dataset.seed.unwrap_or(cfg.seed));
    m.seed = derive_seed(cfg.seed, n_per_class as u64);
    m.output_dir = cfg.output_dir.join(format!("n_{n_per_class}"));
    m
}

/// One collapse run per train size; a failing member is recorded and the sweep continues.
pub fn run_subset_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let sizes = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep section missing".into()))?
        .sizes_per_class
        .clone();
    echo_config(cfg, &cfg.output_dir)?;
    let source = load_source(&cfg.dataset, cfg.seed)?;
    let k = cfg
        .dataset
        .keep_classes
        .as_ref()
        .map_or(source.train.num_classes, |c| c.len());
    let mut rows = Vec::new();
    for n in sizes {
        let member = sweep_member_config(cfg, n);
        let outcome = echo_config(&member, &member.output_dir)
            .and_then(|_| experiment_data(&member, &source))
            .and_then(|(train, test)| tracked_run(&member, &train, &test, false, &member.output_dir))
            .map(|o| o.records.last().cloned().expect("final row always logged"))
            .map_err(|e| e.to_string());
        rows.push(SweepRow {
            n_per_class: n,
            n_train: n * k,
            outcome,
        });
    }
    let text = render(
        SWEEP_HEADER,
        rows.iter().map(|r| match &r.outcome {
            Ok(rec) => format!(
                "{},{},{},{},{}",
                r.n_train, rec.train_loss, rec.train_variance, rec.strong_test_variance, rec.test_error
            ),
            Err(_) => format!("{},NaN,NaN,NaN,NaN", r.n_train),
        }),
    );
    write_atomic(&cfg.output_dir.join("sweep.csv"), text.as_bytes())?;
    Ok(SweepOutcome { rows })
}

#[derive(Debug, Clone)]
pub struct TransferRow {
    pub checkpoint_iter: u64,
    pub pretrain_train_variance: f64,
    pub pretrain_train_error: f64,
    pub best_finetune_test_acc: f64,
    pub best_lr: f64,
    /// Test accuracy of every grid learning rate; `None` if fine-tuning diverged.
    pub grid: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub rows: Vec<TransferRow>,
    pub pretrain: CollapseOutcome,
}

fn finetune(
    params: NetworkParams<f32>,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    rng: Rng,
) -> Result<Option<f64>> {
    let mut trainer = Trainer::new(params, train, cfg, rng)?;
    while trainer.stop_reason().is_none() {
        if trainer.step().is_err() {
            return Ok(None);
        }
    }
    if !trainer.params().all_finite() {
        return Ok(None);
    }
    let logits = forward(trainer.params(), &test.inputs)?.logits;
    Ok(Some(1.0 - classification_error(&logits, &test.labels)))
}

/// Super-class pretraining with checkpoints, then fine-tuning from every
/// checkpoint over the learning-rate grid; writes `transfer.csv`.
pub fn run_transfer_experiment(cfg: &ExperimentConfig) -> Result<TransferOutcome> {
    cfg.validate()?;
    let t = cfg
        .transfer
        .as_ref()
        .ok_or_else(|| HarnessError::Config("transfer section missing".into()))?;
    let grouping = cfg
        .dataset
        .grouping
        .as_deref()
        .ok_or_else(|| HarnessError::Config("transfer needs dataset.grouping".into()))?;
    echo_config(cfg, &cfg.output_dir)?;
    let source = load_source(&cfg.dataset, cfg.seed)?;
    let keep = cfg.dataset.keep_classes.as_deref();
    let pre_train = prepare_split(&source.train, &cfg.dataset.train, keep, Some(grouping), cfg.seed, 0)?;
    let pre_test = prepare_split(&source.test, &cfg.dataset.test, keep, Some(grouping), cfg.seed, 1)?;
    let ft_train = prepare_split(&source.train, &t.finetune_train, keep, None, cfg.seed, 2)?;
    let ft_test = prepare_split(&source.test, &t.finetune_test, keep, None, cfg.seed, 3)?;

    let pre_rows: HashSet<usize> = pre_train.provenance.indices.iter().copied().collect();
    let shared: Vec<usize> = ft_train
        .provenance
        .indices
        .iter()
        .copied()
        .filter(|i| pre_rows.contains(i))
        .collect();
    if let Some(&example) = shared.first() {
        return Err(HarnessError::Leakage {
            count: shared.len(),
            example,
        });
    }

    let pre_dir = cfg.output_dir.join("pretrain");
    let pretrain = tracked_run(cfg, &pre_train, &pre_test, false, &pre_dir)?;
    let hash = cfg.hash();
    let grid = t.lr_grid.values();
    let mut rows = Vec::new();
    let mut grid_lines = Vec::new();
    for (iter, path) in &pretrain.checkpoints {
        let ckpt = load_checkpoint(path, Some(&hash))?;
        let feats = extract_features(&ckpt.params, &pre_train, LayerSelector::Last, *iter)?.remove(0);
        let variance = variance_ratio(&feats, &class_means(&feats)?)?;
        let logits = forward(&ckpt.params, &pre_train.inputs)?.logits;
        let pre_error = classification_error(&logits, &pre_train.labels);
        let head_rng = Rng::for_stream(derive_seed(cfg.seed, *iter), Stream::HeadInit);
        let start = reinit_head(&ckpt.params, ft_train.num_classes, cfg.architecture.init, &mut head_rng.clone())?;
        let mut results = Vec::with_capacity(grid.len());
        for &lr in &grid {
            let ft_cfg = TrainConfig {
                iterations: t.finetune_iterations,
                base_lr: lr,
                loss_threshold: None,
                ..cfg.optimizer.clone()
            };
            let shuffle = Rng::for_stream(derive_seed(cfg.seed, *iter), Stream::Shuffle);
            let acc = finetune(start.clone(), &ft_train, &ft_test, &ft_cfg, shuffle)?;
            grid_lines.push(format!(
                "{iter},{lr},{}",
                acc.map_or_else(|| "NaN".to_string(), |a| a.to_string())
            ));
            results.push((lr, acc));
        }
        // first (smallest) learning rate wins ties
        let (best_lr, best_acc) = results
            .iter()
            .filter_map(|&(lr, a)| a.map(|a| (lr, a)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        rows.push(TransferRow {
            checkpoint_iter: *iter,
            pretrain_train_variance: variance,
            pretrain_train_error: pre_error,
            best_finetune_test_acc: if best_acc.is_finite() { best_acc } else { f64::NAN },
            best_lr,
            grid: results,
        });
    }
    let text = render(
        TRANSFER_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{}",
                r.checkpoint_iter, r.pretrain_train_variance, r.best_finetune_test_acc, r.best_lr
            )
        }),
    );
    write_atomic(&cfg.output_dir.join("transfer.csv"), text.as_bytes())?;
    write_atomic(
        &cfg.output_dir.join("finetune_grid.csv"),
        render("checkpoint_iter,lr,test_acc", grid_lines).as_bytes(),
    )?;
    Ok(TransferOutcome { rows, pretrain })
}

#[derive(Debug, Clone)]
pub enum ExperimentOutcome {
    Collapse(CollapseOutcome),
    Cascade(CollapseOutcome),
    Sweep(SweepOutcome),
    Transfer(TransferOutcome),
}

/// Runs whichever experiment the config names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    Ok(match cfg.experiment {
        ExperimentKind::Collapse => ExperimentOutcome::Collapse(run_collapse_experiment(cfg)?),
        ExperimentKind::Cascade => ExperimentOutcome::Cascade(run_cascade_experiment(cfg)?),
        ExperimentKind::Sweep => ExperimentOutcome::Sweep(run_subset_sweep(cfg)?),
        ExperimentKind::Transfer => ExperimentOutcome::Transfer(run_transfer_experiment(cfg)?),
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `None` for fewer
/// than two points, non-finite values, or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
