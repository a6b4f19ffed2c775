//! Confident-joint label issue detection.

use serde::{Deserialize, Serialize};

use super::folds::ProbabilityMatrix;
use crate::error::{Error, Result};

/// Slack on the `≥ threshold` test. A class mean of identical values can
/// land one ulp above them in floating point.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedExample {
    pub index: usize,
    pub given_label: usize,
    pub suggested_label: usize,
    pub self_confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    /// Per-class mean self-confidence; `null` for classes without members.
    pub thresholds: Vec<Option<f64>>,
    /// Rows: given label, columns: confidently assigned label.
    pub confident_joint: Vec<Vec<usize>>,
    /// Ascending self-confidence.
    pub flagged: Vec<FlaggedExample>,
    pub removed_fraction_per_class: Vec<f64>,
    /// Off-diagonal assignments dropped by the per-class cap.
    #[serde(default)]
    pub capped: usize,
    #[serde(default)]
    pub excluded: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub skipped: bool,
}

impl CleaningReport {
    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        crate::model::write_string(path.as_ref(), &s)
    }
}

/// Flags examples whose confidently assigned class differs from the given one.
///
/// `t[j]` is the mean of `P[i][j]` over examples labeled `j`. Example `i` is
/// assigned the most probable class among those with `P[i][j] ≥ t[j]`
/// (lowest index on ties) and counted in the confident joint. Off-diagonal
/// assignments are flagged; per given class at most
/// `⌊max_removal_fraction × class size⌋` are kept, lowest self-confidence first.
pub fn find_label_issues(
    probs: &ProbabilityMatrix,
    labels: &[usize],
    max_removal_fraction: f64,
) -> Result<CleaningReport> {
    let k = probs.num_classes();
    let n = probs.rows();
    if k < 2 {
        return Err(Error::invalid("label cleaning needs at least two classes"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} probability rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {bad} outside [0, {k})")));
    }
    if !(0.0..=1.0).contains(&max_removal_fraction) {
        return Err(Error::invalid("max_removal_fraction must lie in [0, 1]"));
    }

    let mut sums = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for (i, &y) in labels.iter().enumerate() {
        sums[y] += probs.get(i, y);
        sizes[y] += 1;
    }
    let thresholds: Vec<Option<f64>> = sums
        .iter()
        .zip(&sizes)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();

    let mut joint = vec![vec![0usize; k]; k];
    let mut candidates = Vec::new();
    for (i, &given) in labels.iter().enumerate() {
        let mut assigned: Option<usize> = None;
        for (j, t) in thresholds.iter().enumerate() {
            let Some(t) = t else { continue };
            let p = probs.get(i, j);
            if p >= t - THRESHOLD_SLACK && assigned.is_none_or(|a| p > probs.get(i, a)) {
                assigned = Some(j);
            }
        }
        if let Some(j) = assigned {
            joint[given][j] += 1;
            if j != given {
                candidates.push(FlaggedExample {
                    index: i,
                    given_label: given,
                    suggested_label: j,
                    self_confidence: probs.get(i, given),
                });
            }
        }
    }

    candidates.sort_by(|a, b| {
        a.self_confidence
            .total_cmp(&b.self_confidence)
            .then(a.index.cmp(&b.index))
    });
    let caps: Vec<usize> = sizes
        .iter()
        .map(|&s| (max_removal_fraction * s as f64).floor() as usize)
        .collect();
    let mut taken = vec![0usize; k];
    let mut flagged = Vec::new();
    let mut capped = 0;
    for c in candidates {
        if taken[c.given_label] < caps[c.given_label] {
            taken[c.given_label] += 1;
            flagged.push(c);
        } else {
            capped += 1;
        }
    }
    let removed_fraction_per_class = taken
        .iter()
        .zip(&sizes)
        .map(|(&t, &s)| if s == 0 { 0.0 } else { t as f64 / s as f64 })
        .collect();

    Ok(CleaningReport {
        thresholds,
        confident_joint: joint,
        flagged,
        removed_fraction_per_class,
        capped,
        ..Default::default()
    })
}
