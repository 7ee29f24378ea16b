use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, Result};
use crate::collapse::CollapseRecord;

pub const METRICS_COLUMNS: [&str; 7] = [
    "iteration",
    "train_loss",
    "train_error",
    "test_error",
    "train_variance",
    "strong_test_variance",
    "weak_test_variance",
];

pub const SWEEP_HEADER: &str =
    "n_train,final_train_loss,final_train_variance,final_strong_test_variance,final_test_error";

pub const TRANSFER_HEADER: &str = "checkpoint_iter,pretrain_train_variance,best_finetune_test_acc,best_lr";

/// Metrics header with `layers` per-layer columns appended.
pub fn metrics_header(layers: usize) -> String {
    let mut h = METRICS_COLUMNS.join(",");
    for l in 1..=layers {
        let _ = write!(h, ",layer_{l}_variance");
    }
    h
}

/// Floats use the shortest representation that parses back to the same value.
pub(super) fn metrics_row(r: &CollapseRecord) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{}",
        r.iteration,
        r.train_loss,
        r.train_error,
        r.test_error,
        r.train_variance,
        r.strong_test_variance,
        r.weak_test_variance
    );
    for v in &r.layer_variances {
        let _ = write!(s, ",{v}");
    }
    s
}

pub(super) fn render(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(path: &Path, records: &[CollapseRecord], per_layer: bool) -> Result<()> {
    let layers = if per_layer {
        records.first().map_or(0, |r| r.layer_variances.len())
    } else {
        0
    };
    let text = render(
        &metrics_header(layers),
        records.iter().map(|r| {
            if per_layer {
                metrics_row(r)
            } else {
                metrics_row(&CollapseRecord {
                    layer_variances: Vec::new(),
                    ..r.clone()
                })
            }
        }),
    );
    write_atomic(path, text.as_bytes())
}
