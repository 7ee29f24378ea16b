use super::{DataSource, DatasetConfig, ExperimentConfig, Result};
use crate::data::{
    filter_classes, find_idx_pair, load_image_label_pair, select_subset, superclass_relabel,
    synth_gaussian_mixture, Dataset, Split, StandardizationStats, Subset,
};
use crate::numerics::{derive_seed, Rng, Stream};

/// Full source splits, standardized with statistics of the whole train split.
#[derive(Debug, Clone)]
pub struct SourceSplits {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_source(cfg: &DatasetConfig, seed: u64) -> Result<SourceSplits> {
    let (train, test) = match &cfg.source {
        DataSource::Idx { dir } => {
            let (ti, tl) = find_idx_pair(dir, Split::Train)?;
            let (ei, el) = find_idx_pair(dir, Split::Test)?;
            (
                load_image_label_pair(&ti, &tl, Split::Train)?,
                load_image_label_pair(&ei, &el, Split::Test)?,
            )
        }
        DataSource::Synthetic(spec) => {
            let (train, test, _) = synth_gaussian_mixture(&mut Rng::for_stream(cfg.seed.unwrap_or(seed), Stream::Synthesis), spec)?;
            (train, test)
        }
    };
    if !cfg.standardize {
        return Ok(SourceSplits { train, test });
    }
    let stats = StandardizationStats::fit(&train);
    Ok(SourceSplits {
        train: stats.apply(&train),
        test: stats.apply(&test),
    })
}

/// Class filter, then subset, then super-class grouping. `tag` separates the
/// random streams of different subsets drawn under one seed.
pub fn prepare_split(
    source: &Dataset,
    subset: &Subset,
    keep_classes: Option<&[usize]>,
    grouping: Option<&[usize]>,
    seed: u64,
    tag: u64,
) -> Result<Dataset> {
    let filtered;
    let base = match keep_classes {
        Some(keep) => {
            filtered = filter_classes(source, keep)?;
            &filtered
        }
        None => source,
    };
    let picked = select_subset(base, subset, &mut Rng::for_stream(derive_seed(seed, tag), Stream::Subset))?;
    Ok(match grouping {
        Some(g) => superclass_relabel(&picked, g)?,
        None => picked,
    })
}

/// Train and test sets of a collapse, cascade or sweep run.
pub fn load_experiment_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let source = load_source(&cfg.dataset, cfg.seed)?;
    experiment_data(cfg, &source)
}

pub(super) fn experiment_data(cfg: &ExperimentConfig, source: &SourceSplits) -> Result<(Dataset, Dataset)> {
    let d = &cfg.dataset;
    let keep = d.keep_classes.as_deref();
    let grouping = d.grouping.as_deref();
    Ok((
        prepare_split(&source.train, &d.train, keep, grouping, cfg.seed, 0)?,
        prepare_split(&source.test, &d.test, keep, grouping, cfg.seed, 1)?,
    ))
}
