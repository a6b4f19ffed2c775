//! Stratified k-fold out-of-fold class probabilities.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::FeatureMatrix;
use super::logistic::{fit_logistic, LogisticConfig};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

type ScoredRow = (usize, Vec<f64>);

/// n×K matrix of class probabilities with normalized rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: Array2<f64>,
}

impl ProbabilityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for (i, row) in values.rows().into_iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(ProbabilityMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("probability rows differ in length"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), k), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    /// One row per entry of `scored`.
    pub probs: ProbabilityMatrix,
    /// Input indices that received a probability row, ascending.
    pub scored: Vec<usize>,
    /// Input indices left out because their class has a single example.
    pub excluded: Vec<usize>,
    /// Fold of every input index (None when excluded).
    pub fold_of: Vec<Option<usize>>,
    pub k_used: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub k: usize,
    pub seed: u64,
    pub logistic: LogisticConfig,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            k: 5,
            seed: 42,
            logistic: LogisticConfig::default(),
        }
    }
}

/// Stratified fold assignment over `indices`.
///
/// Classes are visited in ascending id order; each class's members are
/// shuffled and dealt round-robin, continuing the rotation from the previous
/// class so fold sizes stay balanced.
pub fn stratified_folds(labels: &[usize], indices: &[usize], k: usize, seed: u64) -> BTreeMap<usize, usize> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut fold_of = BTreeMap::new();
    let mut offset = 0;
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        for (pos, i) in members.iter().enumerate() {
            fold_of.insert(*i, (offset + pos) % k);
        }
        offset += members.len();
    }
    fold_of
}

/// Probabilities for every example from a model that never saw it.
pub fn out_of_fold_probs(
    features: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    config: &FoldConfig,
) -> Result<OutOfFold> {
    let n = features.rows();
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if config.k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let mut class_sizes = vec![0usize; num_classes];
    for &y in labels {
        if y >= num_classes {
            return Err(Error::invalid(format!("label {y} outside [0, {num_classes})")));
        }
        class_sizes[y] += 1;
    }

    let mut warnings = Vec::new();
    let excluded: Vec<usize> = (0..n).filter(|&i| class_sizes[labels[i]] == 1).collect();
    for &i in &excluded {
        warnings.push(format!(
            "example {i} is the only member of class {}; excluded from cleaning",
            labels[i]
        ));
    }
    let scored: Vec<usize> = (0..n).filter(|&i| class_sizes[labels[i]] >= 2).collect();

    let min_size = class_sizes.iter().copied().filter(|&s| s >= 2).min();
    let mut k = config.k;
    if let Some(m) = min_size {
        if m < k {
            k = m.max(2);
            warnings.push(format!(
                "smallest class has {m} examples; using k = {k} instead of {}",
                config.k
            ));
        }
    }

    let assignment = stratified_folds(labels, &scored, k, config.seed);
    let mut fold_of = vec![None; n];
    for (&i, &f) in &assignment {
        fold_of[i] = Some(f);
    }

    let per_fold: Vec<Result<Vec<ScoredRow>>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (held, train): (Vec<usize>, Vec<usize>) = scored.iter().partition(|&&i| assignment[&i] == fold);
            if held.is_empty() {
                return Ok(Vec::new());
            }
            let x_train = features.select_rows(&train);
            let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = fit_logistic(x_train.view(), &y_train, num_classes, &config.logistic)?;
            let probs = model.predict_proba(features.select_rows(&held).view());
            Ok(held
                .into_iter()
                .zip(probs.rows())
                .map(|(i, r)| (i, r.to_vec()))
                .collect())
        })
        .collect();

    let mut by_index: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for fold in per_fold {
        by_index.extend(fold?);
    }
    let rows: Vec<Vec<f64>> = scored
        .iter()
        .map(|i| by_index.remove(i).expect("every scored index has a fold"))
        .collect();
    let probs = if rows.is_empty() {
        ProbabilityMatrix {
            values: Array2::zeros((0, num_classes)),
        }
    } else {
        ProbabilityMatrix::from_rows(&rows)?
    };

    Ok(OutOfFold {
        probs,
        scored,
        excluded,
        fold_of,
        k_used: k,
        warnings,
    })
}
