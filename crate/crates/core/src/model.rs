//! Shared domain types and their on-disk formats.
//!
//! Labeled datasets are stored as JSONL: the first line is a header object
//! `{"dataset_id": …, "classes": [{"id": …, "name": …}, …]}` and every
//! following line is one example. NLI pair sets are plain JSONL with one
//! record per line. Files are UTF-8 with `\n` line endings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Test => f.write_str("test"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label_text: String,
    pub label_standard: usize,
    pub dataset_id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub dataset_id: String,
    pub classes: Vec<ClassInfo>,
    pub examples: Vec<LabeledExample>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    dataset_id: String,
    classes: Vec<ClassInfo>,
}

const EXAMPLE_FIELDS: &[&str] = &["text", "label_text", "label_standard", "dataset_id", "split"];
const NLI_FIELDS: &[&str] = &["premise", "hypothesis", "label", "origin_text_id", "origin_class"];

impl LabeledDataset {
    pub fn new(dataset_id: impl Into<String>, classes: Vec<ClassInfo>) -> Self {
        LabeledDataset {
            dataset_id: dataset_id.into(),
            classes,
            examples: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_name(&self, id: usize) -> Option<&str> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label_standard).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.text.as_str()).collect()
    }

    /// Same header, examples replaced.
    pub fn with_examples(&self, examples: Vec<LabeledExample>) -> Self {
        LabeledDataset {
            dataset_id: self.dataset_id.clone(),
            classes: self.classes.clone(),
            examples,
        }
    }

    pub fn filter_split(&self, split: Split) -> Self {
        self.with_examples(self.examples.iter().filter(|e| e.split == split).cloned().collect())
    }

    /// Per-class example counts indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let k = self.classes.iter().map(|c| c.id + 1).max().unwrap_or(0);
        let mut counts = vec![0; k];
        for e in &self.examples {
            if e.label_standard < k {
                counts[e.label_standard] += 1;
            }
        }
        counts
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl_str(&content)
    }

    pub fn from_jsonl_str(content: &str) -> Result<Self> {
        let mut lines = content.split('\n').enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header line with dataset_id and classes".into(),
        })?;
        let header: DatasetHeader = serde_json::from_str(header_line).map_err(|e| Error::Parse {
            line: 1,
            message: format!("invalid header: {e}"),
        })?;

        let mut examples = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let mut obj = parse_object(line, line_no, EXAMPLE_FIELDS)?;
            obj.entry("dataset_id")
                .or_insert_with(|| Value::String(header.dataset_id.clone()));
            examples.push(from_object::<LabeledExample>(obj, line_no)?);
        }
        Ok(LabeledDataset {
            dataset_id: header.dataset_id,
            classes: header.classes,
            examples,
        })
    }

    pub fn to_jsonl_string(&self) -> String {
        let header = DatasetHeader {
            dataset_id: self.dataset_id.clone(),
            classes: self.classes.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_jsonl_string())
    }
}

/// Checks every dataset invariant and describes each violation.
///
/// An empty result means the dataset is well formed.
pub fn validate_dataset(ds: &LabeledDataset) -> Vec<String> {
    let mut violations = Vec::new();
    let k = ds.classes.len();

    let mut ids = HashSet::new();
    let mut names = HashSet::new();
    for (pos, class) in ds.classes.iter().enumerate() {
        if !ids.insert(class.id) {
            violations.push(format!("class {pos}: duplicate class id {}", class.id));
        }
        if !names.insert(class.name.as_str()) {
            violations.push(format!("class {pos}: duplicate class name `{}`", class.name));
        }
        if class.id >= k {
            violations.push(format!("class {pos}: id {} outside dense range [0, {k})", class.id));
        }
    }
    let by_id: HashMap<usize, &str> = ds.classes.iter().map(|c| (c.id, c.name.as_str())).collect();

    let mut seen: HashMap<(Split, &str), usize> = HashMap::new();
    for (i, e) in ds.examples.iter().enumerate() {
        let trimmed = e.text.trim();
        if trimmed.is_empty() {
            violations.push(format!("example {i}: text is empty after trimming"));
        }
        if e.label_standard >= k {
            violations.push(format!(
                "example {i}: label_standard {} outside [0, {k})",
                e.label_standard
            ));
        } else {
            match by_id.get(&e.label_standard) {
                None => violations.push(format!(
                    "example {i}: label_standard {} is not a listed class",
                    e.label_standard
                )),
                Some(name) if *name != e.label_text => violations.push(format!(
                    "example {i}: label_text `{}` does not match class {} (`{name}`)",
                    e.label_text, e.label_standard
                )),
                Some(_) => {}
            }
        }
        if e.dataset_id != ds.dataset_id {
            violations.push(format!(
                "example {i}: dataset_id `{}` differs from `{}`",
                e.dataset_id, ds.dataset_id
            ));
        }
        if let Some(first) = seen.insert((e.split, trimmed), i) {
            violations.push(format!(
                "example {i}: duplicate text in {} split (first seen at example {first})",
                e.split
            ));
            seen.insert((e.split, trimmed), first);
        }
    }
    violations
}

/// Per-task mapping from class id to one or more hypothesis sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisCatalog {
    pub dataset_id: String,
    pub entries: BTreeMap<usize, Vec<String>>,
}

impl HypothesisCatalog {
    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    /// Canonical hypothesis used at test time.
    pub fn first_hypothesis(&self, class: usize) -> Option<&str> {
        self.entries.get(&class).and_then(|h| h.first()).map(String::as_str)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::invalid("catalog has no classes"));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (class, hyps) in &self.entries {
            if hyps.is_empty() {
                return Err(Error::invalid(format!("class {class} has no hypothesis")));
            }
            for h in hyps {
                if h.trim().is_empty() {
                    return Err(Error::invalid(format!("class {class} has an empty hypothesis")));
                }
                if let Some(other) = seen.insert(h.as_str(), *class) {
                    return Err(Error::invalid(format!(
                        "hypothesis `{h}` is listed for both class {other} and class {class}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let catalog: HypothesisCatalog = serde_json::from_str(&content)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        write_string(path.as_ref(), &s)
    }
}

/// Binary entailment label: 0 = entailment, 1 = not_entailment.
pub const ENTAILMENT: u8 = 0;
pub const NOT_ENTAILMENT: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliRecord {
    pub premise: String,
    pub hypothesis: String,
    pub label: u8,
    /// Index of the source text, −1 for native NLI data.
    pub origin_text_id: i64,
    /// Class verbalized by the hypothesis, −1 for native NLI data.
    pub origin_class: i64,
}

impl NliRecord {
    pub fn check(&self) -> Result<()> {
        if self.label > 1 {
            return Err(Error::invalid(format!("label {} not in {{0,1}}", self.label)));
        }
        if self.premise.trim().is_empty() || self.hypothesis.trim().is_empty() {
            return Err(Error::invalid("premise and hypothesis must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NliDataset {
    pub records: Vec<NliRecord>,
}

impl NliDataset {
    pub fn new(records: Vec<NliRecord>) -> Self {
        NliDataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_histogram(&self) -> [usize; 2] {
        let mut h = [0; 2];
        for r in &self.records {
            h[r.label as usize] += 1;
        }
        h
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl_str(&content)
    }

    pub fn from_jsonl_str(content: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in content.split('\n').enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let obj = parse_object(line, idx + 1, NLI_FIELDS)?;
            let record: NliRecord = from_object(obj, idx + 1)?;
            record.check().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(NliDataset { records })
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_jsonl_string())
    }
}

/// Raw scores for one premise/hypothesis pair, kept as logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    #[serde(rename = "entailment")]
    pub entailment_logit: f64,
    #[serde(rename = "not_entailment")]
    pub not_entailment_logit: f64,
}

impl PairScore {
    pub fn new(entailment_logit: f64, not_entailment_logit: f64) -> Self {
        PairScore {
            entailment_logit,
            not_entailment_logit,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entailment_logit.is_finite() && self.not_entailment_logit.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub text_id: usize,
    /// Indexed by candidate class position.
    pub class_probs: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    /// Class indices ordered by descending probability, lowest index first on ties.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.class_probs.len()).collect();
        order.sort_by(|&a, &b| {
            self.class_probs[b]
                .partial_cmp(&self.class_probs[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if *v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

pub(crate) fn write_string(path: &Path, content: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes()).map_err(|e| Error::io(path, e))
}

fn parse_object(line: &str, line_no: usize, allowed: &[&str]) -> Result<Map<String, Value>> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(Error::Parse {
            line: line_no,
            message: "expected a JSON object".into(),
        });
    };
    if let Some(field) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::UnknownField {
            line: line_no,
            field: field.clone(),
        });
    }
    Ok(obj)
}

fn from_object<T: DeserializeOwned>(obj: Map<String, Value>, line_no: usize) -> Result<T> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })
}
