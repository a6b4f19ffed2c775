//! Labeled datasets to binary NLI pairs, and native NLI harmonization.

use rand::seq::SliceRandom;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{HypothesisCatalog, LabeledDataset, NliDataset, NliRecord, ENTAILMENT, NOT_ENTAILMENT};
use crate::rng::rng_from_seed;
use crate::verbalizer::{sample_hypothesis, sample_incorrect_hypothesis};

/// Collapses a three-way NLI label: neutral and contradiction become
/// not_entailment.
pub fn merge_nli_labels(premise: &str, hypothesis: &str, label: &str) -> Result<NliRecord> {
    let label = match label.trim() {
        "entailment" => ENTAILMENT,
        "neutral" | "contradiction" => NOT_ENTAILMENT,
        other => return Err(Error::invalid(format!("unknown NLI label `{other}`"))),
    };
    let record = NliRecord {
        premise: premise.to_string(),
        hypothesis: hypothesis.to_string(),
        label,
        origin_text_id: -1,
        origin_class: -1,
    };
    record.check()?;
    Ok(record)
}

/// Reads native NLI JSONL with `premise`, `hypothesis` and a `label` that is
/// either a binary id (0/1) or one of `entailment`, `neutral`,
/// `contradiction`, `not_entailment`.
pub fn parse_native_nli(content: &str) -> Result<NliDataset> {
    let mut records = Vec::new();
    for (idx, line) in content.split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |message: String| Error::Parse { line: idx + 1, message };
        let value: Value = serde_json::from_str(line).map_err(|e| at_line(e.to_string()))?;
        let field = |name: &str| {
            value
                .get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| at_line(format!("missing string field `{name}`")))
        };
        let (premise, hypothesis) = (field("premise")?, field("hypothesis")?);
        let record = match value.get("label") {
            Some(Value::String(l)) if l == "not_entailment" => merge_nli_labels(premise, hypothesis, "neutral"),
            Some(Value::String(l)) => merge_nli_labels(premise, hypothesis, l),
            Some(Value::Number(n)) if n.as_u64().is_some_and(|v| v <= 1) => {
                let record = NliRecord {
                    premise: premise.to_string(),
                    hypothesis: hypothesis.to_string(),
                    label: n.as_u64().unwrap_or_default() as u8,
                    origin_text_id: -1,
                    origin_class: -1,
                };
                record.check().map(|_| record)
            }
            other => Err(Error::invalid(format!("unsupported label {other:?}"))),
        }
        .map_err(|e| at_line(e.to_string()))?;
        records.push(record);
    }
    Ok(NliDataset::new(records))
}

fn check_coverage(ds: &LabeledDataset, catalog: &HypothesisCatalog) -> Result<()> {
    for class in &ds.classes {
        if !catalog.entries.contains_key(&class.id) {
            return Err(Error::invalid(format!(
                "catalog `{}` has no hypothesis for class {} (`{}`)",
                catalog.dataset_id, class.id, class.name
            )));
        }
    }
    Ok(())
}

/// Two records per example: the text with its own class hypothesis
/// (entailment) followed by the text with a random other-class hypothesis
/// (not_entailment).
pub fn format_nli_trainset(ds: &LabeledDataset, catalog: &HypothesisCatalog, seed: u64) -> Result<NliDataset> {
    check_coverage(ds, catalog)?;
    if ds.examples.is_empty() {
        return Ok(NliDataset::default());
    }
    if ds.num_classes() < 2 || catalog.num_classes() < 2 {
        return Err(Error::invalid("training pairs need at least two classes"));
    }
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::with_capacity(ds.examples.len() * 2);
    for (i, e) in ds.examples.iter().enumerate() {
        let correct = sample_hypothesis(catalog, e.label_standard, &mut rng)?;
        records.push(NliRecord {
            premise: e.text.clone(),
            hypothesis: correct.to_string(),
            label: ENTAILMENT,
            origin_text_id: i as i64,
            origin_class: e.label_standard as i64,
        });
        let (wrong, class) = sample_incorrect_hypothesis(catalog, e.label_standard, &mut rng)?;
        records.push(NliRecord {
            premise: e.text.clone(),
            hypothesis: wrong.to_string(),
            label: NOT_ENTAILMENT,
            origin_text_id: i as i64,
            origin_class: class as i64,
        });
    }
    Ok(NliDataset::new(records))
}

/// K records per example, one per class in ascending id order, each with the
/// class's first hypothesis. Only the true class row is labeled entailment.
pub fn format_nli_testset(ds: &LabeledDataset, catalog: &HypothesisCatalog) -> Result<NliDataset> {
    check_coverage(ds, catalog)?;
    let mut class_ids: Vec<usize> = ds.classes.iter().map(|c| c.id).collect();
    class_ids.sort_unstable();
    let mut records = Vec::with_capacity(ds.examples.len() * class_ids.len());
    for (i, e) in ds.examples.iter().enumerate() {
        for &class in &class_ids {
            let hypothesis = catalog.first_hypothesis(class).expect("coverage checked");
            records.push(NliRecord {
                premise: e.text.clone(),
                hypothesis: hypothesis.to_string(),
                label: if class == e.label_standard {
                    ENTAILMENT
                } else {
                    NOT_ENTAILMENT
                },
                origin_text_id: i as i64,
                origin_class: class as i64,
            });
        }
    }
    Ok(NliDataset::new(records))
}

/// Native NLI data followed by every reformatted set, then shuffled.
pub fn concat_train(native: &NliDataset, reformatted: &[NliDataset], shuffle_seed: u64) -> NliDataset {
    let mut records = native.records.clone();
    for ds in reformatted {
        records.extend(ds.records.iter().cloned());
    }
    records.shuffle(&mut rng_from_seed(shuffle_seed));
    NliDataset::new(records)
}
