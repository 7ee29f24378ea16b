use super::{DataError, Dataset, Provenance, Result};

/// Replaces every label `c` with `grouping[c]`. The grouping must cover every
/// class and use super-class ids `0..m` without gaps. Fine labels are kept in
/// the provenance (the earliest ones, if relabeled twice).
pub fn superclass_relabel(data: &Dataset, grouping: &[usize]) -> Result<Dataset> {
    if grouping.len() != data.num_classes {
        return Err(DataError::Grouping(format!(
            "grouping covers {} classes, dataset has {}",
            grouping.len(),
            data.num_classes
        )));
    }
    let num_super = grouping.iter().max().map_or(0, |&m| m + 1);
    if let Some(unused) = (0..num_super).find(|s| !grouping.contains(s)) {
        return Err(DataError::Grouping(format!("super-class {unused} has no members")));
    }
    let fine_labels = data
        .provenance
        .fine_labels
        .clone()
        .unwrap_or_else(|| (data.labels.clone(), data.num_classes));
    Dataset::new(
        data.inputs.clone(),
        data.labels.iter().map(|&y| grouping[y]).collect(),
        num_super,
        data.split,
        Provenance {
            source: data.provenance.source.clone(),
            indices: data.provenance.indices.clone(),
            fine_labels: Some(fine_labels),
        },
    )
}

/// Keeps only rows whose label is in `keep`, relabeling `keep[i] → i`.
pub fn filter_classes(data: &Dataset, keep: &[usize]) -> Result<Dataset> {
    let mut map = vec![None; data.num_classes];
    for (new, &old) in keep.iter().enumerate() {
        match map.get_mut(old) {
            Some(slot @ None) => *slot = Some(new),
            Some(Some(_)) => return Err(DataError::Grouping(format!("class {old} listed twice"))),
            None => {
                return Err(DataError::Grouping(format!(
                    "class {old} out of range for {} classes",
                    data.num_classes
                )))
            }
        }
    }
    let positions: Vec<usize> = (0..data.len()).filter(|&i| map[data.labels[i]].is_some()).collect();
    Dataset::new(
        data.inputs.select_rows(&positions),
        positions.iter().map(|&i| map[data.labels[i]].unwrap()).collect(),
        keep.len(),
        data.split,
        Provenance {
            source: data.provenance.source.clone(),
            indices: positions.iter().map(|&i| data.provenance.indices[i]).collect(),
            fine_labels: None,
        },
    )
}
