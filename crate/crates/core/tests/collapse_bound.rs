use nclab::collapse::{nearest_centroid_accuracy, Centroids, FeatureMatrix};
use nclab::data::Split;
use nclab::numerics::{Matrix, Rng};
use proptest::prelude::*;

/// Balanced fine labels whose features sit exactly on one of two centroids,
/// the centroid chosen arbitrarily per sample.
fn collapsed(seed: u64, per_class: usize, dim: usize) -> (FeatureMatrix, Centroids) {
    let mut rng = Rng::new(seed);
    let centres: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.standard_normal() * 5.0).collect()).collect();
    let n = 10 * per_class;
    let mut x = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let c = rng.index(2);
        x.extend(centres[c].iter().map(|&v| v as f32));
    }
    let labels = (0..n).map(|i| i % 10).collect();
    let fm = FeatureMatrix::new(Matrix::from_vec(n, dim, x).unwrap(), labels, 10, 1, 0, Split::Test).unwrap();
    // centroids at the f32-rounded points so every sample is exactly on one
    let cm = Matrix::from_rows(
        &centres.iter().map(|c| c.iter().map(|&v| v as f32 as f64).collect()).collect::<Vec<_>>(),
    )
    .unwrap();
    (fm, Centroids::from_centers(cm))
}

proptest! {
    #[test]
    fn two_centroids_cannot_beat_twenty_percent(seed in any::<u64>(), per_class in 1usize..30, dim in 1usize..6) {
        let (fm, cents) = collapsed(seed, per_class, dim);
        for a in 0..10 {
            for b in 0..10 {
                let acc = nearest_centroid_accuracy(&fm, &cents, &[a, b]).unwrap();
                prop_assert!(acc <= 0.2 + 1e-9, "map ({}, {}) gives {}", a, b, acc);
            }
        }
    }
}
