//! Metrics over multiplied NLI test sets and held-out experiment planning.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, write_string, HypothesisCatalog, LabeledDataset, NliDataset, PairScore, ENTAILMENT};
use crate::nli::format_nli_testset;
use crate::zeroshot::{score_pairs, Pair, ScoringBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub n_texts: usize,
    pub num_classes: usize,
    pub balanced_accuracy: f64,
    pub accuracy: f64,
    pub f1_macro: f64,
    /// `null` for classes without support; those are left out of the
    /// balanced-accuracy mean.
    pub per_class_recall: Vec<Option<f64>>,
    pub zero_support_classes: Vec<usize>,
    /// Rows: true class, columns: predicted class.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&content)?)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_json_string())
    }
}

/// Metrics from a confusion matrix (rows true, columns predicted).
pub fn metrics_from_confusion(dataset_id: &str, confusion: Vec<Vec<usize>>) -> EvalReport {
    let k = confusion.len();
    let n: usize = confusion.iter().flatten().sum();
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted: Vec<usize> = (0..k).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();

    let per_class_recall: Vec<Option<f64>> = (0..k)
        .map(|c| (support[c] > 0).then(|| confusion[c][c] as f64 / support[c] as f64))
        .collect();
    let zero_support_classes = (0..k).filter(|&c| support[c] == 0).collect();
    let recalls: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
    let balanced_accuracy = if recalls.is_empty() {
        0.0
    } else {
        recalls.iter().sum::<f64>() / recalls.len() as f64
    };

    // classes never seen nor predicted do not enter the F1 average
    let f1s: Vec<f64> = (0..k)
        .filter(|&c| support[c] > 0 || predicted[c] > 0)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let fp = (predicted[c] - confusion[c][c]) as f64;
            let fn_ = (support[c] - confusion[c][c]) as f64;
            2.0 * tp / (2.0 * tp + fp + fn_)
        })
        .collect();
    let f1_macro = if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    };

    EvalReport {
        dataset_id: dataset_id.to_string(),
        n_texts: n,
        num_classes: k,
        balanced_accuracy,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        f1_macro,
        per_class_recall,
        zero_support_classes,
        confusion,
    }
}

/// Regroups a test set built by [`format_nli_testset`] and scores each text
/// by the class whose hypothesis has the highest entailment logit.
pub fn compute_metrics_nli_binary(dataset_id: &str, test: &NliDataset, scores: &[PairScore]) -> Result<EvalReport> {
    if scores.len() != test.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} test records",
            scores.len(),
            test.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::MalformedTestSet("no test records".into()));
    }

    let mut groups: BTreeMap<i64, Vec<(i64, u8, f64)>> = BTreeMap::new();
    for (r, s) in test.records.iter().zip(scores) {
        if r.origin_text_id < 0 || r.origin_class < 0 {
            return Err(Error::MalformedTestSet(format!(
                "record for premise {:?} has no origin text/class",
                r.premise
            )));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite(format!(
                "logits for text {} class {}",
                r.origin_text_id, r.origin_class
            )));
        }
        groups
            .entry(r.origin_text_id)
            .or_default()
            .push((r.origin_class, r.label, s.entailment_logit));
    }

    let k = groups.values().next().map_or(0, Vec::len);
    let mut confusion = vec![vec![0usize; k]; k];
    for (text_id, mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        let classes_ok = rows.len() == k && rows.iter().enumerate().all(|(i, r)| r.0 == i as i64);
        if !classes_ok {
            return Err(Error::MalformedTestSet(format!(
                "text {text_id} does not have exactly one row for each of the {k} classes"
            )));
        }
        let entailed: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.1 == ENTAILMENT)
            .map(|(c, _)| c)
            .collect();
        let [truth] = entailed[..] else {
            return Err(Error::MalformedTestSet(format!(
                "text {text_id} has {} entailment rows, expected 1",
                entailed.len()
            )));
        };
        let logits: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let predicted = argmax(&logits).expect("k >= 1");
        confusion[truth][predicted] += 1;
    }
    Ok(metrics_from_confusion(dataset_id, confusion))
}

/// Formats, scores and evaluates one test dataset.
pub fn evaluate_dataset(
    ds_test: &LabeledDataset,
    catalog: &HypothesisCatalog,
    backend: &dyn ScoringBackend,
) -> Result<EvalReport> {
    let test = format_nli_testset(ds_test, catalog)?;
    evaluate_nli_testset(&ds_test.dataset_id, &test, backend)
}

pub fn evaluate_nli_testset(dataset_id: &str, test: &NliDataset, backend: &dyn ScoringBackend) -> Result<EvalReport> {
    let pairs: Vec<Pair> = test
        .records
        .iter()
        .map(|r| Pair::new(r.premise.clone(), r.hypothesis.clone()))
        .collect();
    let scores = score_pairs(backend, &pairs)?;
    compute_metrics_nli_binary(dataset_id, test, &scores)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub train_datasets: Vec<String>,
    pub eval_datasets: Vec<String>,
}

pub const RUN_ALL: &str = "all";
pub const RUN_NLI_ONLY: &str = "nli-only";
pub const HELDOUT_PREFIX: &str = "heldout-";

/// One run on everything, one NLI-only baseline, and one run per non-NLI
/// dataset with that dataset held out of training and used for evaluation.
pub fn plan_heldout_runs(dataset_ids: &[String], nli_ids: &[String]) -> Result<Vec<RunSpec>> {
    if dataset_ids.is_empty() {
        return Err(Error::invalid("at least one non-NLI dataset id is required"));
    }
    let mut seen = BTreeSet::new();
    for id in dataset_ids.iter().chain(nli_ids) {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate dataset id `{id}`")));
        }
    }
    let everything: Vec<String> = nli_ids.iter().chain(dataset_ids).cloned().collect();

    let mut runs = vec![
        RunSpec {
            run_id: RUN_ALL.into(),
            train_datasets: everything.clone(),
            eval_datasets: dataset_ids.to_vec(),
        },
        RunSpec {
            run_id: RUN_NLI_ONLY.into(),
            train_datasets: nli_ids.to_vec(),
            eval_datasets: dataset_ids.to_vec(),
        },
    ];
    for held in dataset_ids {
        runs.push(RunSpec {
            run_id: format!("{HELDOUT_PREFIX}{held}"),
            train_datasets: everything.iter().filter(|d| *d != held).cloned().collect(),
            eval_datasets: vec![held.clone()],
        });
    }
    Ok(runs)
}

/// Writes `<run_id>.json` per run plus `plan.json` listing all of them.
pub fn write_run_specs(runs: &[RunSpec], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for run in runs {
        let mut s = serde_json::to_string_pretty(run)?;
        s.push('\n');
        write_string(&dir.join(format!("{}.json", run.run_id)), &s)?;
    }
    let mut s = serde_json::to_string_pretty(runs)?;
    s.push('\n');
    write_string(&dir.join("plan.json"), &s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset_id: String,
    /// Balanced accuracy per condition, aligned with `Summary::conditions`.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMean {
    pub condition: String,
    pub mean_balanced_accuracy: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub condition: String,
    pub baseline: String,
    /// `mean(condition) − mean(baseline)`.
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conditions: Vec<String>,
    pub rows: Vec<SummaryRow>,
    pub means: Vec<ConditionMean>,
    pub deltas: Vec<Delta>,
    /// Datasets where the held-out run trails the NLI-only baseline.
    pub negative_transfer: Vec<String>,
}

impl Summary {
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&content)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        write_string(path.as_ref(), &s)
    }

    pub fn mean_of(&self, condition: &str) -> Option<f64> {
        self.means
            .iter()
            .find(|m| m.condition == condition)
            .map(|m| m.mean_balanced_accuracy)
    }
}

const CANONICAL_CONDITIONS: [&str; 3] = [RUN_ALL, RUN_NLI_ONLY, "heldout"];

/// Equal-weight mean balanced accuracy per condition, pairwise deltas and
/// negative-transfer datasets.
///
/// Conditions are ordered `all`, `nli-only`, `heldout`, then any others in
/// first-seen order; datasets are sorted by id. When a condition reports the
/// same dataset twice, the first report wins.
pub fn aggregate_reports(reports: &[ConditionReport]) -> Summary {
    let mut conditions: Vec<String> = CANONICAL_CONDITIONS
        .iter()
        .filter(|c| reports.iter().any(|r| r.condition == **c))
        .map(|c| c.to_string())
        .collect();
    for r in reports {
        if !conditions.contains(&r.condition) {
            conditions.push(r.condition.clone());
        }
    }

    let mut cells: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in reports {
        let ci = conditions.iter().position(|c| *c == r.condition).expect("collected");
        let row = cells.entry(r.report.dataset_id.clone()).or_default();
        if row.contains_key(&ci) {
            log::warn!(
                "dataset `{}` reported twice under `{}`; keeping the first",
                r.report.dataset_id,
                r.condition
            );
            continue;
        }
        row.insert(ci, r.report.balanced_accuracy);
    }
    let rows: Vec<SummaryRow> = cells
        .iter()
        .map(|(dataset_id, row)| SummaryRow {
            dataset_id: dataset_id.clone(),
            values: (0..conditions.len()).map(|ci| row.get(&ci).copied()).collect(),
        })
        .collect();

    let means: Vec<ConditionMean> = conditions
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.values[ci]).collect();
            ConditionMean {
                condition: c.clone(),
                mean_balanced_accuracy: if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                },
                n_datasets: vals.len(),
            }
        })
        .collect();

    let mut deltas = Vec::new();
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            deltas.push(Delta {
                condition: means[i].condition.clone(),
                baseline: means[j].condition.clone(),
                delta: means[i].mean_balanced_accuracy - means[j].mean_balanced_accuracy,
            });
        }
    }

    let heldout = conditions.iter().position(|c| c == "heldout");
    let nli_only = conditions.iter().position(|c| c == RUN_NLI_ONLY);
    let negative_transfer = match (heldout, nli_only) {
        (Some(h), Some(b)) => rows
            .iter()
            .filter(|r| matches!((r.values[h], r.values[b]), (Some(x), Some(y)) if x < y))
            .map(|r| r.dataset_id.clone())
            .collect(),
        _ => Vec::new(),
    };

    Summary {
        conditions,
        rows,
        means,
        deltas,
        negative_transfer,
    }
}
