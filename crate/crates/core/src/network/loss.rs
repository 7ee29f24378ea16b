use super::{NetworkError, Result};
use crate::numerics::{Matrix, Scalar};

/// Per-row softmax statistics, computed in `f64`.
struct RowSoftmax {
    /// `-log p(label)`
    nll: f64,
    /// probabilities
    probs: Vec<f64>,
    /// `1 - p(label)`, summed from the other classes so it keeps precision near 0
    rest: f64,
}

fn row_softmax<T: Scalar>(row: &[T], label: usize) -> RowSoftmax {
    let z: Vec<f64> = row.iter().map(|v| v.to_f64()).collect();
    let zy = z[label];
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if zy >= max {
        // true class is the argmax: nll = ln(1 + Σ_{j≠y} e^{z_j − z_y})
        let others: f64 = z
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(_, &v)| (v - zy).exp())
            .sum();
        let denom = 1.0 + others;
        let probs: Vec<f64> = z.iter().map(|&v| (v - zy).exp() / denom).collect();
        let rest = others / denom;
        RowSoftmax {
            nll: others.ln_1p(),
            probs,
            rest,
        }
    } else {
        let s: f64 = z.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + s.ln();
        let probs: Vec<f64> = z.iter().map(|&v| (v - lse).exp()).collect();
        let rest = probs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(_, p)| p)
            .sum();
        RowSoftmax {
            nll: lse - zy,
            probs,
            rest,
        }
    }
}

fn check_labels<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(NetworkError::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    if logits.rows() == 0 {
        return Err(NetworkError::Shape("empty batch".into()));
    }
    let k = logits.cols();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= k) {
        return Err(NetworkError::LabelOutOfRange {
            row,
            label,
            num_classes: k,
        });
    }
    Ok(())
}

/// Row-wise softmax of arbitrary finite logits (max-shifted).
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for (i, row) in logits.iter_rows().enumerate() {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v.to_f64() - max).exp()).collect();
        let s: f64 = e.iter().sum();
        for (o, v) in out.row_mut(i).iter_mut().zip(e) {
            *o = T::from_f64(v / s);
        }
    }
    out
}

/// Mean cross-entropy over the batch and the softmax probabilities.
pub fn cross_entropy_loss<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<(f64, Matrix<T>)> {
    check_labels(logits, labels)?;
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (i, (row, &y)) in logits.iter_rows().zip(labels).enumerate() {
        let sm = row_softmax(row, y);
        total += sm.nll;
        for (o, p) in probs.row_mut(i).iter_mut().zip(sm.probs) {
            *o = T::from_f64(p);
        }
    }
    Ok((total / labels.len() as f64, probs))
}

/// Gradient of the mean cross-entropy with respect to the logits.
pub(crate) fn logit_gradient<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<Matrix<T>> {
    check_labels(logits, labels)?;
    let scale = 1.0 / labels.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (i, (row, &y)) in logits.iter_rows().zip(labels).enumerate() {
        let sm = row_softmax(row, y);
        let g = grad.row_mut(i);
        for (j, (o, p)) in g.iter_mut().zip(&sm.probs).enumerate() {
            let d = if j == y { -sm.rest } else { *p };
            *o = T::from_f64(d * scale);
        }
    }
    Ok(grad)
}
