//! Datasets: IDX ingestion, synthetic mixtures, standardization, subsetting
//! and super-class relabeling.

mod idx;
mod relabel;
mod standardize;
mod subset;
mod synth;

pub use idx::{
    find_idx_pair, load_image_label_pair, parse_idx, serialize_idx, IdxData, IdxTensor,
};
pub use relabel::{filter_classes, superclass_relabel};
pub use standardize::{standardize_pixelwise, StandardizationStats, STD_FLOOR};
pub use subset::{select_subset, subset_per_class, Subset};
pub use synth::{synth_gaussian_mixture, SynthSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, NumericsError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad IDX magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported IDX element type 0x{0:02x}")]
    UnsupportedType(u8),
    #[error("IDX payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("IDX has {0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("unexpected IDX layout: {0}")]
    Layout(String),
    #[error("image file has {images} items but label file has {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("class {class} has {available} samples, {requested} requested")]
    InsufficientClass {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("class {0} is absent from the train split")]
    MissingClass(usize),
    #[error("invalid grouping: {0}")]
    Grouping(String),
    #[error("invalid dataset parameters: {0}")]
    Invalid(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Where the rows came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    /// Row index of each sample within the original source split.
    pub indices: Vec<usize>,
    /// Labels before any super-class relabeling, with their class count.
    pub fine_labels: Option<(Vec<usize>, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
    pub provenance: Provenance,
}

impl Dataset {
    /// Validates shapes and label range; a train split must contain every class.
    pub fn new(
        inputs: Matrix<f32>,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
        provenance: Provenance,
    ) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(DataError::Invalid(format!(
                "{} labels for {} input rows",
                labels.len(),
                inputs.rows()
            )));
        }
        if provenance.indices.len() != labels.len() {
            return Err(DataError::Invalid("provenance indices do not match rows".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(DataError::Invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let ds = Self {
            inputs,
            labels,
            num_classes,
            split,
            provenance,
        };
        if split == Split::Train {
            if let Some(missing) = ds.class_counts().iter().position(|&c| c == 0) {
                return Err(DataError::MissingClass(missing));
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at the given positions (positions into this dataset, not the source).
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let fine_labels = self
            .provenance
            .fine_labels
            .as_ref()
            .map(|(l, k)| (positions.iter().map(|&p| l[p]).collect(), *k));
        Self::new(
            self.inputs.select_rows(positions),
            positions.iter().map(|&p| self.labels[p]).collect(),
            self.num_classes,
            self.split,
            Provenance {
                source: self.provenance.source.clone(),
                indices: positions.iter().map(|&p| self.provenance.indices[p]).collect(),
                fine_labels,
            },
        )
    }

    /// The pre-relabeling labels and class count, or the current ones.
    pub fn fine_labels(&self) -> (&[usize], usize) {
        match &self.provenance.fine_labels {
            Some((l, k)) => (l, *k),
            None => (&self.labels, self.num_classes),
        }
    }

    /// Same rows, labelled with the fine labels kept in provenance.
    pub fn with_fine_labels(&self) -> Result<Self> {
        let (labels, k) = self.fine_labels();
        Self::new(
            self.inputs.clone(),
            labels.to_vec(),
            k,
            self.split,
            Provenance {
                source: self.provenance.source.clone(),
                indices: self.provenance.indices.clone(),
                fine_labels: None,
            },
        )
    }
}
