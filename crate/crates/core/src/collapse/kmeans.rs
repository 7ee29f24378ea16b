//! k-means++ seeding, Lloyd iterations and single-point transfer refinement,
//! best of several restarts.

use serde::{Deserialize, Serialize};

use super::{CollapseError, Result};
use crate::numerics::{Matrix, Rng, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Convergence threshold on the summed squared centre shift, relative to
    /// the mean per-dimension variance of the points.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    /// `k × d`
    pub centers: Matrix<f64>,
    /// Sum of squared distances of the points to their nearest centre.
    pub inertia: f64,
    /// Which restart produced these centres.
    pub restart: usize,
    /// Nearest-centre index of every point.
    pub assignment: Vec<usize>,
    /// Inertia after every assignment step of the winning run.
    pub inertia_history: Vec<f64>,
}

impl Centroids {
    /// Fixed centres with no fitting history.
    pub fn from_centers(centers: Matrix<f64>) -> Self {
        Self {
            centers,
            inertia: f64::NAN,
            restart: 0,
            assignment: Vec::new(),
            inertia_history: Vec::new(),
        }
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Nearest centre per point (lowest index on ties), the distances, and total inertia.
fn assign(points: &Matrix<f64>, centers: &Matrix<f64>) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = Vec::with_capacity(points.rows());
    let mut dists = Vec::with_capacity(points.rows());
    for p in points.iter_rows() {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in centers.iter_rows().enumerate() {
            let d = sq(p, c);
            if d < best.0 {
                best = (d, i);
            }
        }
        labels.push(best.1);
        dists.push(best.0);
    }
    let inertia = dists.iter().sum();
    (labels, dists, inertia)
}

fn plus_plus(points: &Matrix<f64>, k: usize, rng: &mut Rng) -> Matrix<f64> {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    let first = rng.index(n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq(p, centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.index(n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (d, p) in d2.iter_mut().zip(points.iter_rows()) {
            *d = d.min(sq(p, centers.row(c)));
        }
    }
    centers
}

/// Lloyd iterations from `init` until the squared centre shift is at most
/// `tol_abs` or `max_iters` is reached. Empty clusters take the point farthest
/// from its centre.
pub fn lloyd(points: &Matrix<f64>, init: Matrix<f64>, max_iters: usize, tol_abs: f64) -> Centroids {
    let k = init.rows();
    let d = points.cols();
    let mut centers = init;
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let (labels, dists, inertia) = assign(points, &centers);
        history.push(inertia);
        let mut sums = Matrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter_rows().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = sums;
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                next.row_mut(c).iter_mut().for_each(|v| *v /= n);
            } else {
                let far = (0..points.rows())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken.push(far);
                next.row_mut(c).copy_from_slice(points.row(far));
            }
        }
        let shift: f64 = next
            .iter_rows()
            .zip(centers.iter_rows())
            .map(|(a, b)| sq(a, b))
            .sum();
        centers = next;
        if shift <= tol_abs {
            break;
        }
    }
    let (assignment, _, inertia) = assign(points, &centers);
    history.push(inertia);
    Centroids {
        centers,
        inertia,
        restart: 0,
        assignment,
        inertia_history: history,
    }
}

/// Single-point transfers (Hartigan's rule): moving `x` from cluster `a` to
/// `b` changes the inertia by `n_b/(n_b+1)·|x-μ_b|² - n_a/(n_a-1)·|x-μ_a|²`.
/// Applies improving moves until none is left. Lloyd fixed points can still
/// admit such moves; the result never has higher inertia than the input.
pub fn hartigan_refine(points: &Matrix<f64>, run: Centroids) -> Centroids {
    let k = run.centers.rows();
    let d = points.cols();
    let mut labels = run.assignment.clone();
    let mut counts = vec![0usize; k];
    let mut centers = Matrix::<f64>::zeros(k, d);
    for (p, &l) in points.iter_rows().zip(&labels) {
        counts[l] += 1;
        for (s, v) in centers.row_mut(l).iter_mut().zip(p) {
            *s += v;
        }
    }
    if counts.contains(&0) {
        return run;
    }
    for c in 0..k {
        let n = counts[c] as f64;
        centers.row_mut(c).iter_mut().for_each(|v| *v /= n);
    }
    let mut history = run.inertia_history;
    let mut moved = true;
    let mut sweeps = 0;
    while moved && sweeps < 100 {
        moved = false;
        sweeps += 1;
        for (i, p) in points.iter_rows().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let remove = na / (na - 1.0) * sq(p, centers.row(a));
            let mut best = (0.0, a);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq(p, centers.row(b)) - remove;
                // strict margin so rounding cannot cycle
                if delta < best.0 - 1e-12 * remove.max(1e-300) {
                    best = (delta, b);
                }
            }
            let b = best.1;
            if b == a {
                continue;
            }
            let nb = counts[b] as f64;
            for (m, v) in centers.row_mut(a).iter_mut().zip(p) {
                *m = (*m * na - v) / (na - 1.0);
            }
            for (m, v) in centers.row_mut(b).iter_mut().zip(p) {
                *m = (*m * nb + v) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            labels[i] = b;
            moved = true;
        }
    }
    if sweeps == 1 {
        return Centroids {
            inertia_history: history,
            ..run
        };
    }
    let (assignment, _, inertia) = assign(points, &centers);
    if inertia > run.inertia {
        return Centroids {
            inertia_history: history,
            ..run
        };
    }
    history.push(inertia);
    Centroids {
        centers,
        inertia,
        restart: run.restart,
        assignment,
        inertia_history: history,
    }
}

fn mean_variance(points: &Matrix<f64>) -> f64 {
    let n = points.rows() as f64;
    let d = points.cols();
    let mut mean = vec![0.0; d];
    for p in points.iter_rows() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / n;
        }
    }
    let total: f64 = points.iter_rows().map(|p| sq(p, &mean)).sum();
    total / n / d as f64
}

/// Best-inertia k-means over `cfg.restarts` k-means++ restarts.
pub fn kmeans<T: Scalar>(points: &Matrix<T>, k: usize, rng: &mut Rng, cfg: &KMeansConfig) -> Result<Centroids> {
    kmeans_with_inits(points, k, rng, cfg, &[])
}

/// As [`kmeans`], with extra runs started from the given centres. Those runs
/// are numbered after the random restarts.
pub fn kmeans_with_inits<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    rng: &mut Rng,
    cfg: &KMeansConfig,
    inits: &[Matrix<f64>],
) -> Result<Centroids> {
    let n = points.rows();
    if k == 0 || n < k {
        return Err(CollapseError::TooFewPoints { n, k });
    }
    if let Some(bad) = inits.iter().find(|m| m.shape() != (k, points.cols())) {
        return Err(CollapseError::Shape(format!(
            "initial centres {:?}, expected ({k}, {})",
            bad.shape(),
            points.cols()
        )));
    }
    let pts: Matrix<f64> = points.cast();
    let tol_abs = cfg.tol * mean_variance(&pts);
    let mut best: Option<Centroids> = None;
    let starts = (0..cfg.restarts.max(1))
        .map(|_| plus_plus(&pts, k, rng))
        .collect::<Vec<_>>();
    for (r, init) in starts.into_iter().chain(inits.iter().cloned()).enumerate() {
        let mut run = hartigan_refine(&pts, lloyd(&pts, init, cfg.max_iters.max(1), tol_abs));
        run.restart = r;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = pts(&[1.0, 2.0, 6.0]);
        let c = kmeans(&p, 1, &mut Rng::new(0), &KMeansConfig::default()).unwrap();
        assert!((c.centers.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((c.inertia - 14.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_values_have_zero_inertia() {
        let p = pts(&[5.0, -1.0, 5.0, 2.0, -1.0, 2.0]);
        let c = kmeans(&p, 3, &mut Rng::new(4), &KMeansConfig::default()).unwrap();
        assert_eq!(c.inertia, 0.0);
        let mut got: Vec<f64> = c.centers.as_slice().to_vec();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![-1.0, 2.0, 5.0]);
    }

    #[test]
    fn four_points_two_clusters() {
        let p = pts(&[0.0, 1.0, 9.0, 10.0]);
        let c = kmeans(&p, 2, &mut Rng::new(2), &KMeansConfig::default()).unwrap();
        let mut got: Vec<f64> = c.centers.as_slice().to_vec();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.5, 9.5]);
        assert_eq!(c.inertia, 1.0);
    }

    #[test]
    fn transfer_step_escapes_a_lloyd_fixed_point() {
        // {0,2} {3} {9}: every point is nearest its own centre, yet moving 2
        // into the middle cluster lowers the cost from 2 to 0.5
        let p = pts(&[0.0, 2.0, 3.0, 9.0]);
        let fixed = lloyd(&p, pts(&[1.0, 3.0, 9.0]), 10, 0.0);
        assert_eq!(fixed.inertia, 2.0);
        let refined = hartigan_refine(&p, fixed);
        assert_eq!(refined.inertia, 0.5);
        assert_eq!(refined.assignment, vec![0, 1, 1, 2]);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            kmeans(&pts(&[1.0]), 2, &mut Rng::new(0), &KMeansConfig::default()),
            Err(CollapseError::TooFewPoints { n: 1, k: 2 })
        ));
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // both initial centres far right: left points all go to centre 0, centre 1 is empty
        let p = pts(&[0.0, 0.1, 0.2, 10.0]);
        let init = Matrix::from_vec(2, 1, vec![100.0, 200.0]).unwrap();
        let c = lloyd(&p, init, 50, 0.0);
        let mut got: Vec<f64> = c.centers.as_slice().to_vec();
        got.sort_by(f64::total_cmp);
        assert!((got[0] - 0.1).abs() < 1e-12 && got[1] == 10.0, "{got:?}");
        assert!(c.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
