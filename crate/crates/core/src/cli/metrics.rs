use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::CliError;
use crate::collapse::{
    class_means, kmeans_with_inits, read_ncf1, variance_ratio, weak_test_variance, FeatureMatrix, KMeansConfig,
};
use crate::data::Split;
use crate::numerics::{derive_seed, Rng, Stream};

pub const METRICS_CSV_HEADER: &str = "file,layer,iteration,n,d,k,variance,weak_variance";

#[derive(Debug, Clone, PartialEq)]
pub struct FileMetrics {
    pub file: PathBuf,
    pub layer: u32,
    pub iteration: u64,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Within-class over between-class variance with the file's own class means.
    pub variance: f64,
    /// Nearest-centroid variance over k-means centroids of the file's features.
    pub weak_variance: f64,
}

/// Both variances of one feature set. k-means draws from the stream the
/// experiment drivers use for the same seed and iteration, so the numbers
/// match the logged `strong_test_variance` and `weak_test_variance`.
pub fn feature_metrics(fm: &FeatureMatrix, seed: u64, kmeans: &KMeansConfig) -> Result<(f64, f64), CliError> {
    let means = class_means(fm)?;
    let variance = variance_ratio(fm, &means)?;
    let mut rng = Rng::for_stream(derive_seed(seed, fm.iteration), Stream::KMeans);
    let cents = kmeans_with_inits(&fm.features, fm.num_classes, &mut rng, kmeans, std::slice::from_ref(&means.means))?;
    Ok((variance, weak_test_variance(fm, &cents)?))
}

/// Variances of every NCF1 file; all files must share feature dimension and class count.
pub fn cmd_metrics(files: &[PathBuf], seed: u64, kmeans: &KMeansConfig) -> Result<Vec<FileMetrics>, CliError> {
    if files.is_empty() {
        return Err(CliError::Input("no feature files given".into()));
    }
    let mut loaded = Vec::with_capacity(files.len());
    for path in files {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let fm = read_ncf1(&bytes, Split::Test).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        loaded.push((path, fm));
    }
    let (first_path, first) = &loaded[0];
    for (path, fm) in &loaded[1..] {
        if fm.dim() != first.dim() || fm.num_classes != first.num_classes {
            return Err(CliError::Input(format!(
                "{} has d = {}, k = {} but {} has d = {}, k = {}",
                path.display(),
                fm.dim(),
                fm.num_classes,
                first_path.display(),
                first.dim(),
                first.num_classes
            )));
        }
    }
    loaded
        .into_iter()
        .map(|(path, fm)| {
            let (variance, weak_variance) =
                feature_metrics(&fm, seed, kmeans).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(FileMetrics {
                file: path.clone(),
                layer: fm.layer,
                iteration: fm.iteration,
                n: fm.len(),
                d: fm.dim(),
                k: fm.num_classes,
                variance,
                weak_variance,
            })
        })
        .collect()
}

pub fn metrics_csv(rows: &[FileMetrics]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.file.display(),
            r.layer,
            r.iteration,
            r.n,
            r.d,
            r.k,
            r.variance,
            r.weak_variance
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    crate::harness::write_atomic(path, text.as_bytes()).map_err(CliError::from)
}
