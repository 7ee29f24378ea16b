//! Variability-collapse measurements.
//!
//! All three ratios share one shape: mean squared distance of features to
//! their assigned centre, divided by the mean squared distance of the centres
//! to their unweighted average.
//!
//! * train variance: train features, train class means
//! * strong test variance: test features, test class means
//! * weak test variance: test features, k-means centroids of the test
//!   features, each point measured to its nearest centroid
//!
//! Everything accumulates in `f64`.

mod kmeans;
mod ncf1;

pub use kmeans::{hartigan_refine, kmeans, kmeans_with_inits, lloyd, Centroids, KMeansConfig};
pub use ncf1::{read_ncf1, write_ncf1, NCF1_MAGIC};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Split;
use crate::numerics::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollapseError {
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("degenerate denominator: centres have zero spread")]
    DegenerateDenominator,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("k-means needs at least k points: n = {n}, k = {k}")]
    TooFewPoints { n: usize, k: usize },
    #[error("bad NCF1 magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("NCF1 data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("NCF1 file has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
}

pub type Result<T> = std::result::Result<T, CollapseError>;

/// Features of one split at one layer and iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `n × d`
    pub features: Matrix<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// 1-based hidden-layer index.
    pub layer: u32,
    pub iteration: u64,
    pub split: Split,
}

impl FeatureMatrix {
    pub fn new(
        features: Matrix<f32>,
        labels: Vec<usize>,
        num_classes: usize,
        layer: u32,
        iteration: u64,
        split: Split,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(CollapseError::Shape(format!(
                "{} feature rows, {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() == 0 {
            return Err(CollapseError::Shape("feature dimension is 0".into()));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(CollapseError::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            layer,
            iteration,
            split,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-class means and their unweighted average.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    /// `k × d`
    pub means: Matrix<f64>,
    pub global_mean: Vec<f64>,
    pub split: Split,
    pub iteration: u64,
}

/// CSV row of the collapse experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub iteration: u64,
    pub train_loss: f64,
    pub train_error: f64,
    pub test_error: f64,
    pub train_variance: f64,
    pub strong_test_variance: f64,
    pub weak_test_variance: f64,
    /// Train variance of every hidden layer, first to last (cascade runs).
    pub layer_variances: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &m)| (x as f64 - m).powi(2)).sum()
}

fn mean_of_rows(m: &Matrix<f64>) -> Vec<f64> {
    let mut g = vec![0.0; m.cols()];
    for r in m.iter_rows() {
        for (a, v) in g.iter_mut().zip(r) {
            *a += v;
        }
    }
    let k = m.rows() as f64;
    g.iter_mut().for_each(|v| *v /= k);
    g
}

/// Mean squared distance of the rows of `centres` to their unweighted mean.
fn spread(centres: &Matrix<f64>) -> Result<f64> {
    let g = mean_of_rows(centres);
    let s = centres
        .iter_rows()
        .map(|r| r.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum::<f64>()
        / centres.rows() as f64;
    if !(s > 0.0) || !s.is_finite() {
        return Err(CollapseError::DegenerateDenominator);
    }
    Ok(s)
}

pub fn class_means(fm: &FeatureMatrix) -> Result<ClassMeans> {
    let (k, d) = (fm.num_classes, fm.dim());
    let mut sums = Matrix::<f64>::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (row, &y) in fm.features.iter_rows().zip(&fm.labels) {
        counts[y] += 1;
        for (s, &v) in sums.row_mut(y).iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(CollapseError::MissingClass(missing));
    }
    for (i, &c) in counts.iter().enumerate() {
        sums.row_mut(i).iter_mut().for_each(|v| *v /= c as f64);
    }
    let global_mean = mean_of_rows(&sums);
    Ok(ClassMeans {
        means: sums,
        global_mean,
        split: fm.split,
        iteration: fm.iteration,
    })
}

/// Within-class variance over between-class variance.
pub fn variance_ratio(fm: &FeatureMatrix, cm: &ClassMeans) -> Result<f64> {
    if cm.means.rows() != fm.num_classes || cm.means.cols() != fm.dim() {
        return Err(CollapseError::Shape(format!(
            "class means {:?} do not fit {} classes of dimension {}",
            cm.means.shape(),
            fm.num_classes,
            fm.dim()
        )));
    }
    if fm.is_empty() {
        return Err(CollapseError::Shape("no samples".into()));
    }
    let denom = spread(&cm.means)?;
    let within = fm
        .features
        .iter_rows()
        .zip(&fm.labels)
        .map(|(row, &y)| sq_dist(row, cm.means.row(y)))
        .sum::<f64>()
        / fm.len() as f64;
    Ok(within / denom)
}

/// Mean squared distance to the nearest centroid over the centroid spread.
pub fn weak_test_variance(fm: &FeatureMatrix, cents: &Centroids) -> Result<f64> {
    if cents.centers.cols() != fm.dim() {
        return Err(CollapseError::Shape(format!(
            "centroids have dimension {}, features {}",
            cents.centers.cols(),
            fm.dim()
        )));
    }
    if fm.is_empty() || cents.centers.rows() == 0 {
        return Err(CollapseError::Shape("no samples or no centroids".into()));
    }
    let denom = spread(&cents.centers)?;
    let nearest = fm
        .features
        .iter_rows()
        .map(|row| {
            cents
                .centers
                .iter_rows()
                .map(|c| sq_dist(row, c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / fm.len() as f64;
    Ok(nearest / denom)
}

/// [`variance_ratio`] of each layer with that layer's own class means.
pub fn per_layer_variances(layers: &[FeatureMatrix]) -> Result<Vec<f64>> {
    if let Some(first) = layers.first() {
        if layers.iter().any(|l| l.labels != first.labels) {
            return Err(CollapseError::Shape(
                "layers were not computed on the same samples".into(),
            ));
        }
    }
    layers
        .iter()
        .map(|fm| variance_ratio(fm, &class_means(fm)?))
        .collect()
}

/// Accuracy of labelling each point with `label_map[nearest centroid]`.
pub fn nearest_centroid_accuracy(fm: &FeatureMatrix, cents: &Centroids, label_map: &[usize]) -> Result<f64> {
    if label_map.len() != cents.centers.rows() {
        return Err(CollapseError::Shape(format!(
            "{} labels for {} centroids",
            label_map.len(),
            cents.centers.rows()
        )));
    }
    if fm.is_empty() {
        return Ok(0.0);
    }
    let correct = fm
        .features
        .iter_rows()
        .zip(&fm.labels)
        .filter(|(row, &y)| {
            let mut best = (f64::INFINITY, 0);
            for (i, c) in cents.centers.iter_rows().enumerate() {
                let d = sq_dist(row, c);
                if d < best.0 {
                    best = (d, i);
                }
            }
            label_map[best.1] == y
        })
        .count();
    Ok(correct as f64 / fm.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn fm1d(values: &[f32], labels: &[usize], k: usize) -> FeatureMatrix {
        FeatureMatrix::new(
            Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap(),
            labels.to_vec(),
            k,
            1,
            0,
            Split::Train,
        )
        .unwrap()
    }

    #[test]
    fn singleton_classes_means_are_points() {
        let fm = FeatureMatrix::new(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap(),
            vec![1, 0],
            2,
            1,
            0,
            Split::Train,
        )
        .unwrap();
        let cm = class_means(&fm).unwrap();
        assert_eq!(cm.means.row(0), &[-3.0, 0.5]);
        assert_eq!(cm.means.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn one_dimensional_worked_example() {
        let fm = fm1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1], 2);
        let cm = class_means(&fm).unwrap();
        assert_eq!(cm.means.as_slice(), &[1.0, 5.0]);
        assert_eq!(cm.global_mean, vec![3.0]);
        assert_eq!(variance_ratio(&fm, &cm).unwrap(), 0.25);
    }

    #[test]
    fn global_mean_ignores_class_counts() {
        let mut vals = vec![2.0f32; 10];
        vals.extend(vec![8.0f32; 90]);
        let mut labels = vec![0; 10];
        labels.extend(vec![1; 90]);
        let cm = class_means(&fm1d(&vals, &labels, 2)).unwrap();
        assert_eq!(cm.global_mean, vec![5.0]);
    }

    #[test]
    fn perfect_collapse_is_zero_and_single_class_is_degenerate() {
        let fm = fm1d(&[1.0, 1.0, 7.0, 7.0, 7.0], &[0, 0, 1, 1, 1], 2);
        assert_eq!(variance_ratio(&fm, &class_means(&fm).unwrap()).unwrap(), 0.0);
        let single = fm1d(&[1.0, 2.0], &[0, 0], 1);
        assert_eq!(
            variance_ratio(&single, &class_means(&single).unwrap()),
            Err(CollapseError::DegenerateDenominator)
        );
        let missing = fm1d(&[1.0, 2.0], &[0, 0], 2);
        assert_eq!(class_means(&missing), Err(CollapseError::MissingClass(1)));
    }

    #[test]
    fn weak_variance_examples() {
        let fm = fm1d(&[0.0, 0.2, 10.0, 10.2], &[0, 0, 1, 1], 2);
        let cents = kmeans(&fm.features, 2, &mut crate::numerics::Rng::new(1), &KMeansConfig::default()).unwrap();
        let mut c: Vec<f64> = cents.centers.as_slice().to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.1).abs() < 1e-6 && (c[1] - 10.1).abs() < 1e-6);
        let w = weak_test_variance(&fm, &cents).unwrap();
        assert!((w - 0.0004).abs() < 1e-9, "{w}");

        let exact = fm1d(&[3.0, -1.0, 3.0], &[0, 1, 0], 2);
        let pinned = Centroids::from_centers(Matrix::from_vec(2, 1, vec![3.0, -1.0]).unwrap());
        assert_eq!(weak_test_variance(&exact, &pinned).unwrap(), 0.0);

        let same = Centroids::from_centers(Matrix::from_vec(2, 1, vec![3.0, 3.0]).unwrap());
        assert_eq!(weak_test_variance(&exact, &same), Err(CollapseError::DegenerateDenominator));
    }

    #[test]
    fn per_layer_identical_features_give_identical_ratios() {
        let fm = fm1d(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1], 2);
        let v = per_layer_variances(&[fm.clone(), fm]).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn probe_bounds() {
        // two collapsed points, ten balanced fine classes
        let vals: Vec<f32> = (0..100).map(|i| if i % 10 < 5 { 0.0 } else { 1.0 }).collect();
        let labels: Vec<usize> = (0..100).map(|i| i % 10).collect();
        let fm = fm1d(&vals, &labels, 10);
        let cents = Centroids::from_centers(Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap());
        for a in 0..10 {
            for b in 0..10 {
                assert!(nearest_centroid_accuracy(&fm, &cents, &[a, b]).unwrap() <= 0.2 + 1e-9);
            }
        }
        let one = Centroids::from_centers(Matrix::from_vec(1, 1, vec![0.5]).unwrap());
        let skewed = fm1d(&[0.0, 1.0, 2.0, 3.0], &[2, 2, 2, 0], 3);
        assert_eq!(nearest_centroid_accuracy(&skewed, &one, &[2]).unwrap(), 0.75);
    }
}
