use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Provenance, Result, Split};
use crate::numerics::{sample_gaussian, Matrix, Rng};

/// Isotropic Gaussian mixture: class centres `~ N(0, center_spread²·I)`,
/// samples `center + N(0, noise_std²·I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    pub center_spread: f64,
    pub noise_std: f64,
}

impl SynthSpec {
    fn describe(&self) -> String {
        format!(
            "synthetic(k={}, dim={}, spread={}, noise={})",
            self.num_classes, self.dim, self.center_spread, self.noise_std
        )
    }
}

/// Draws the class centres once, then independent train and test samples.
/// Rows are interleaved by class (`label = row % k`).
///
/// Returns `(train, test, centers)`.
pub fn synth_gaussian_mixture(rng: &mut Rng, spec: &SynthSpec) -> Result<(Dataset, Dataset, Matrix<f64>)> {
    if spec.num_classes < 2 || spec.dim == 0 || spec.train_per_class == 0 {
        return Err(DataError::Invalid(format!(
            "need k >= 2, dim >= 1 and train_per_class >= 1, got {spec:?}"
        )));
    }
    if !(spec.noise_std >= 0.0 && spec.center_spread >= 0.0) {
        return Err(DataError::Invalid("spread and noise must be >= 0".into()));
    }
    let k = spec.num_classes;
    let centers: Matrix<f64> = sample_gaussian(rng, k, spec.dim, 0.0, spec.center_spread)?;
    let mut draw = |per_class: usize, split: Split| -> Result<Dataset> {
        let n = per_class * k;
        let noise: Matrix<f64> = sample_gaussian(rng, n, spec.dim, 0.0, spec.noise_std)?;
        let mut data = Vec::with_capacity(n * spec.dim);
        for i in 0..n {
            for (c, e) in centers.row(i % k).iter().zip(noise.row(i)) {
                data.push((c + e) as f32);
            }
        }
        Dataset::new(
            Matrix::from_vec(n, spec.dim, data)?,
            (0..n).map(|i| i % k).collect(),
            k,
            split,
            Provenance {
                source: spec.describe(),
                indices: (0..n).collect(),
                fine_labels: None,
            },
        )
    };
    let train = draw(spec.train_per_class, Split::Train)?;
    let test = draw(spec.test_per_class, Split::Test)?;
    Ok((train, test, centers))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: f64) -> SynthSpec {
        SynthSpec {
            num_classes: 4,
            train_per_class: 20,
            test_per_class: 50,
            dim: 6,
            center_spread: 10.0,
            noise_std: noise,
        }
    }

    #[test]
    fn zero_noise_sits_on_centres() {
        let (train, _, centers) = synth_gaussian_mixture(&mut Rng::new(3), &spec(0.0)).unwrap();
        for (i, row) in train.inputs.iter_rows().enumerate() {
            let c = centers.row(train.labels[i]);
            assert!(row.iter().zip(c).all(|(a, b)| *a == *b as f32));
        }
    }

    #[test]
    fn well_separated_nearest_centre_is_perfect() {
        let (_, test, centers) = synth_gaussian_mixture(&mut Rng::new(5), &spec(0.5)).unwrap();
        let mut correct = 0;
        for (row, &y) in test.inputs.iter_rows().zip(&test.labels) {
            let best = (0..4)
                .min_by(|&a, &b| {
                    let da: f64 = row.iter().zip(centers.row(a)).map(|(x, c)| (*x as f64 - c).powi(2)).sum();
                    let db: f64 = row.iter().zip(centers.row(b)).map(|(x, c)| (*x as f64 - c).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            correct += usize::from(best == y);
        }
        assert_eq!(correct, test.len());
    }

    #[test]
    fn seeded_and_validated() {
        let a = synth_gaussian_mixture(&mut Rng::new(8), &spec(1.0)).unwrap();
        let b = synth_gaussian_mixture(&mut Rng::new(8), &spec(1.0)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert!(synth_gaussian_mixture(&mut Rng::new(8), &spec(-1.0)).is_err());
        let mut one = spec(1.0);
        one.num_classes = 1;
        assert!(synth_gaussian_mixture(&mut Rng::new(8), &one).is_err());
    }
}
