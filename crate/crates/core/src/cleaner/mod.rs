//! Label-noise detection and downsampling.
//!
//! [`clean`] embeds every text, collects stratified out-of-fold class
//! probabilities from a logistic classifier, locates probable label errors
//! with the confident joint and removes them. [`downsample`] enforces the
//! per-class and per-dataset size caps.

pub mod downsample;
pub mod embed;
pub mod folds;
pub mod issues;
pub mod logistic;

use serde::{Deserialize, Serialize};

pub use downsample::{downsample, largest_remainder, DEFAULT_PER_CLASS_CAP, DEFAULT_PER_DATASET_CAP};
pub use embed::{embed, hashed_tfidf, Embedder, FeatureMatrix, DEFAULT_DIMS};
pub use folds::{out_of_fold_probs, FoldConfig, OutOfFold, ProbabilityMatrix};
pub use issues::{find_label_issues, CleaningReport, FlaggedExample};
pub use logistic::{fit_logistic, loss_and_gradient, LogisticConfig, LogisticModel};

use crate::error::Result;
use crate::model::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub embedder: Embedder,
    pub folds: FoldConfig,
    pub max_removal_fraction: f64,
    /// Opt-out for tasks where a linear probe on embeddings is meaningless.
    pub skip: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            embedder: Embedder::default(),
            folds: FoldConfig::default(),
            max_removal_fraction: 0.5,
            skip: false,
        }
    }
}

/// Out-of-fold probabilities for a dataset, using the configured embedder.
pub fn dataset_out_of_fold(ds: &LabeledDataset, config: &CleanConfig) -> Result<OutOfFold> {
    let features = embed(&ds.texts(), &config.embedder)?;
    out_of_fold_probs(&features, &ds.labels(), ds.num_classes(), &config.folds)
}

/// Removes examples flagged as probable label errors.
///
/// Indices in the returned report refer to the input dataset.
pub fn clean(ds: &LabeledDataset, config: &CleanConfig) -> Result<(LabeledDataset, CleaningReport)> {
    if config.skip || ds.examples.is_empty() {
        let report = CleaningReport {
            skipped: config.skip,
            ..Default::default()
        };
        return Ok((ds.clone(), report));
    }
    let oof = dataset_out_of_fold(ds, config)?;
    let labels = ds.labels();
    let scored_labels: Vec<usize> = oof.scored.iter().map(|&i| labels[i]).collect();
    let mut report = find_label_issues(&oof.probs, &scored_labels, config.max_removal_fraction)?;
    for f in &mut report.flagged {
        f.index = oof.scored[f.index];
    }
    report.excluded = oof.excluded;
    report.warnings = oof.warnings;

    let mut remove = vec![false; ds.examples.len()];
    for f in &report.flagged {
        remove[f.index] = true;
    }
    let kept = ds
        .examples
        .iter()
        .zip(remove)
        .filter(|(_, r)| !r)
        .map(|(e, _)| e.clone())
        .collect();
    Ok((ds.with_examples(kept), report))
}
