use super::{Dataset, Result};

/// Columns whose train std is below this are only mean-centred.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Per-column mean and population std.
    pub fn fit(data: &Dataset) -> Self {
        let d = data.input_dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0f64; d];
        for row in data.inputs.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; d];
        for row in data.inputs.iter_rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Self { mean, std }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        let d = self.mean.len();
        for row in out.inputs.as_mut_slice().chunks_exact_mut(d.max(1)) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                let centred = *v as f64 - m;
                *v = if *s < STD_FLOOR { centred } else { centred / s } as f32;
            }
        }
        out
    }
}

/// Standardizes both splits with statistics fitted on `train`.
pub fn standardize_pixelwise(
    train: &Dataset,
    test: &Dataset,
) -> Result<(Dataset, Dataset, StandardizationStats)> {
    if train.input_dim() != test.input_dim() {
        return Err(super::DataError::Invalid(format!(
            "train has {} features, test has {}",
            train.input_dim(),
            test.input_dim()
        )));
    }
    let stats = StandardizationStats::fit(train);
    Ok((stats.apply(train), stats.apply(test), stats))
}
