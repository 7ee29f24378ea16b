use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};
use crate::numerics::Rng;

/// Which rows of a split to keep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Subset {
    All,
    /// The first `n` rows in source order.
    First { n: usize },
    /// Rows `offset..offset + count` in source order.
    Range { offset: usize, count: usize },
    /// `n` random rows of every class, shuffled.
    PerClass { n: usize },
}

impl Default for Subset {
    fn default() -> Self {
        Subset::All
    }
}

/// Exactly `n_per_class` rows of each class, drawn without replacement and
/// returned in shuffled order.
pub fn subset_per_class(data: &Dataset, n_per_class: usize, rng: &mut Rng) -> Result<Dataset> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes];
    for (i, &y) in data.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut picked = Vec::with_capacity(n_per_class * data.num_classes);
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.len() < n_per_class {
            return Err(DataError::InsufficientClass {
                class,
                available: rows.len(),
                requested: n_per_class,
            });
        }
        rng.shuffle(&mut rows);
        picked.extend_from_slice(&rows[..n_per_class]);
    }
    rng.shuffle(&mut picked);
    data.select(&picked)
}

pub fn select_subset(data: &Dataset, subset: &Subset, rng: &mut Rng) -> Result<Dataset> {
    match *subset {
        Subset::All => Ok(data.clone()),
        Subset::First { n } => select_range(data, 0, n),
        Subset::Range { offset, count } => select_range(data, offset, count),
        Subset::PerClass { n } => subset_per_class(data, n, rng),
    }
}

fn select_range(data: &Dataset, offset: usize, count: usize) -> Result<Dataset> {
    let end = offset
        .checked_add(count)
        .filter(|&e| e <= data.len())
        .ok_or_else(|| {
            DataError::Invalid(format!(
                "rows {offset}..{} requested from {} available",
                offset.saturating_add(count),
                data.len()
            ))
        })?;
    let rows: Vec<usize> = (offset..end).collect();
    data.select(&rows)
}
