//! Ingest raw CSV/JSONL classification data into a [`LabeledDataset`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{ClassInfo, LabeledDataset, LabeledExample, Split};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    pub source_path: PathBuf,
    pub format: SourceFormat,
    /// Merged in order with a single space.
    pub text_columns: Vec<String>,
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_mapping: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_labels: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_column: Option<String>,
    /// Defaults to the header id of a canonical file, else the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
}

impl IngestSpec {
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: IngestSpec = serde_json::from_str(&content)?;
        // relative source paths resolve against the spec file
        if spec.source_path.is_relative() {
            if let Some(dir) = path.parent() {
                spec.source_path = dir.join(&spec.source_path);
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_in: usize,
    pub rows_dropped_na: usize,
    pub rows_dropped_label: usize,
    pub rows_dropped_dup: usize,
    pub rows_out: usize,
}

/// Field values read as missing, following the usual dataframe NA set.
const NA_VALUES: &[&str] = &[
    "", "#N/A", "#N/A N/A", "#NA", "-1.#IND", "-1.#QNAN", "-NaN", "-nan", "1.#IND", "1.#QNAN", "<NA>", "N/A", "NA",
    "NULL", "NaN", "None", "n/a", "nan", "null",
];

fn is_na(value: &str) -> bool {
    NA_VALUES.contains(&value.trim())
}

/// One source row with cells as optional strings (None = absent/null).
struct RawRow {
    cells: HashMap<String, Option<String>>,
}

struct RawTable {
    columns: Vec<String>,
    rows: Vec<RawRow>,
    header_dataset_id: Option<String>,
}

fn read_csv(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Invalid(format!("{other:?}")),
        })?;
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let cells = columns
            .iter()
            .zip(record.iter())
            .map(|(c, v)| (c.clone(), Some(v.to_string())))
            .collect();
        rows.push(RawRow { cells });
    }
    Ok(RawTable {
        columns,
        rows,
        header_dataset_id: None,
    })
}

fn cell_string(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

fn read_jsonl_rows(path: &Path) -> Result<RawTable> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut columns: Vec<String> = Vec::new();
    let mut seen_cols = HashSet::new();
    let mut rows = Vec::new();
    let mut header_dataset_id = None;
    let mut first = true;
    for (idx, line) in content.split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(Error::Parse {
                line: idx + 1,
                message: "expected a JSON object".into(),
            });
        };
        // canonical files start with a dataset header; skip it
        if first && obj.contains_key("classes") && obj.contains_key("dataset_id") {
            header_dataset_id = obj.get("dataset_id").and_then(cell_string);
            first = false;
            continue;
        }
        first = false;
        for key in obj.keys() {
            if seen_cols.insert(key.clone()) {
                columns.push(key.clone());
            }
        }
        let cells = obj.iter().map(|(k, v)| (k.clone(), cell_string(v))).collect();
        rows.push(RawRow { cells });
    }
    Ok(RawTable {
        columns,
        rows,
        header_dataset_id,
    })
}

/// Reads a raw source and produces a canonical dataset.
///
/// Rows with a missing text or label are dropped, rows whose raw label is in
/// `drop_labels` are dropped, and exact duplicates of the trimmed text are
/// removed keeping the first occurrence. Class ids are assigned densely in
/// first-seen order of `label_text`.
pub fn ingest(spec: &IngestSpec) -> Result<(LabeledDataset, IngestReport)> {
    if spec.text_columns.is_empty() {
        return Err(Error::invalid("text_columns must not be empty"));
    }
    let path = spec.source_path.as_path();
    let table = match spec.format {
        SourceFormat::Csv => read_csv(path)?,
        SourceFormat::Jsonl => read_jsonl_rows(path)?,
    };

    let mut required: Vec<&str> = spec.text_columns.iter().map(String::as_str).collect();
    required.push(&spec.label_column);
    if let Some(col) = &spec.split_column {
        required.push(col);
    }
    if !table.rows.is_empty() || matches!(spec.format, SourceFormat::Csv) {
        for col in required {
            if !table.columns.iter().any(|c| c == col) {
                return Err(Error::MissingColumn(col.to_string()));
            }
        }
    }

    let dataset_id = spec
        .dataset_id
        .clone()
        .or(table.header_dataset_id.clone())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        });

    let mut report = IngestReport {
        rows_in: table.rows.len(),
        ..Default::default()
    };
    let mut classes: Vec<ClassInfo> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut seen_texts: HashSet<String> = HashSet::new();
    let mut examples = Vec::new();

    for (row_idx, row) in table.rows.iter().enumerate() {
        let get = |col: &str| row.cells.get(col).cloned().flatten();

        let parts: Vec<String> = spec
            .text_columns
            .iter()
            .filter_map(|c| get(c))
            .filter(|v| !is_na(v))
            .map(|v| v.trim().to_string())
            .collect();
        let text = parts.join(" ");
        let raw_label = get(&spec.label_column).filter(|l| !is_na(l));
        let Some(raw_label) = raw_label.filter(|_| !text.is_empty()) else {
            report.rows_dropped_na += 1;
            continue;
        };
        let raw_label = raw_label.trim().to_string();

        if spec.drop_labels.as_ref().is_some_and(|d| d.contains(&raw_label)) {
            report.rows_dropped_label += 1;
            continue;
        }
        let label_text = match &spec.label_mapping {
            Some(mapping) => match mapping.get(&raw_label) {
                Some(mapped) => mapped.clone(),
                None => {
                    return Err(Error::UnmappedLabel {
                        row: row_idx + 1,
                        label: raw_label,
                    })
                }
            },
            None => raw_label,
        };

        let split = match &spec.split_column {
            None => Split::Train,
            Some(col) => match get(col).as_deref().map(str::trim) {
                Some("train") | Some("training") => Split::Train,
                Some("test") | Some("testing") => Split::Test,
                other => {
                    return Err(Error::invalid(format!(
                        "row {}: split value {other:?} is neither train nor test",
                        row_idx + 1
                    )))
                }
            },
        };

        if !seen_texts.insert(text.clone()) {
            report.rows_dropped_dup += 1;
            continue;
        }

        let next_id = classes.len();
        let id = *class_ids.entry(label_text.clone()).or_insert_with(|| {
            classes.push(ClassInfo {
                id: next_id,
                name: label_text.clone(),
            });
            next_id
        });
        examples.push(LabeledExample {
            text,
            label_text,
            label_standard: id,
            dataset_id: dataset_id.clone(),
            split,
        });
    }
    report.rows_out = examples.len();

    Ok((
        LabeledDataset {
            dataset_id,
            classes,
            examples,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub warnings: Vec<String>,
}

/// Stratified train/test split.
///
/// Each class's index list is Fisher–Yates shuffled from one seeded stream
/// (classes visited in id order). The first `round(fraction × size)` shuffled
/// indices go to test, at least one when the class has two or more examples
/// and never the whole class. Both outputs keep the input order.
pub fn train_test_split(ds: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<SplitOutcome> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in ds.examples.iter().enumerate() {
        by_class.entry(e.label_standard).or_default().push(i);
    }

    let mut rng = rng_from_seed(seed);
    let mut is_test = vec![false; ds.examples.len()];
    let mut warnings = Vec::new();
    for (class, mut indices) in by_class {
        let size = indices.len();
        if size == 1 {
            warnings.push(format!(
                "class {class} has a single example (index {}); kept in train",
                indices[0]
            ));
            continue;
        }
        let n_test = ((test_fraction * size as f64).round() as usize).clamp(1, size - 1);
        indices.shuffle(&mut rng);
        for &i in &indices[..n_test] {
            is_test[i] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (e, t) in ds.examples.iter().zip(is_test) {
        let mut e = e.clone();
        if t {
            e.split = Split::Test;
            test.push(e);
        } else {
            e.split = Split::Train;
            train.push(e);
        }
    }
    Ok(SplitOutcome {
        train: ds.with_examples(train),
        test: ds.with_examples(test),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_dataset;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(content.as_bytes()).unwrap();
        path
    }

    fn csv_spec(path: PathBuf, text_columns: &[&str]) -> IngestSpec {
        IngestSpec {
            source_path: path,
            format: SourceFormat::Csv,
            text_columns: text_columns.iter().map(|s| s.to_string()).collect(),
            label_column: "label".into(),
            label_mapping: None,
            drop_labels: None,
            split_column: None,
            dataset_id: Some("fixture".into()),
        }
    }

    #[test]
    fn ingest_counts_duplicates_and_nas() {
        let dir = tempfile::tempdir().unwrap();
        // 10 rows: "alpha" and "beta" each repeated once more, one empty text
        let csv = "text,label\n\
                   alpha,a\nbeta,b\ngamma,a\nalpha,a\ndelta,b\n  ,a\nepsilon,b\nbeta,a\nzeta,a\neta,b\n";
        let path = write_file(dir.path(), "raw.csv", csv);
        let (ds, report) = ingest(&csv_spec(path, &["text"])).unwrap();
        assert_eq!(ds.examples.len(), 7);
        assert_eq!(report.rows_in, 10);
        assert_eq!(report.rows_dropped_dup, 2);
        assert_eq!(report.rows_dropped_na, 1);
        assert_eq!(report.rows_out, 7);
        assert_eq!(
            ds.classes,
            vec![
                ClassInfo {
                    id: 0,
                    name: "a".into()
                },
                ClassInfo {
                    id: 1,
                    name: "b".into()
                }
            ]
        );
        assert!(validate_dataset(&ds).is_empty());
    }

    #[test]
    fn text_columns_are_joined_with_space() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "raw.csv", "title,body,label\nA,B,x\n");
        let (ds, _) = ingest(&csv_spec(path, &["title", "body"])).unwrap();
        assert_eq!(ds.examples[0].text, "A B");
    }

    #[test]
    fn dropped_labels_are_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "raw.csv", "text,label\nkeep me,good\nskip me,other\n");
        let mut spec = csv_spec(path, &["text"]);
        spec.drop_labels = Some(["other".to_string()].into_iter().collect());
        let (ds, report) = ingest(&spec).unwrap();
        assert_eq!(ds.texts(), vec!["keep me"]);
        assert_eq!(report.rows_dropped_label, 1);
    }

    #[test]
    fn star_ratings_map_to_sentiment() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "raw.csv",
            "review,stars\nawful,1\nmeh,3\nsuperb,5\nokay-ish,2\n",
        );
        let mut spec = csv_spec(path, &["review"]);
        spec.label_column = "stars".into();
        spec.label_mapping = Some(
            [("1", "negative"), ("2", "negative"), ("5", "positive")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        spec.drop_labels = Some(["3".to_string()].into_iter().collect());
        let (ds, _) = ingest(&spec).unwrap();
        assert_eq!(ds.labels(), vec![0, 1, 0]);
        assert_eq!(ds.class_name(1), Some("positive"));
    }

    #[test]
    fn unmapped_label_names_label_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "raw.csv", "text,label\nx,1\ny,9\n");
        let mut spec = csv_spec(path, &["text"]);
        spec.label_mapping = Some([("1".to_string(), "one".to_string())].into_iter().collect());
        match ingest(&spec) {
            Err(Error::UnmappedLabel { row, label }) => assert_eq!((row, label.as_str()), (2, "9")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "raw.csv", "text,label\nx,1\n");
        match ingest(&csv_spec(path, &["body"])) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "body"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_is_idempotent_on_its_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "raw.csv",
            "text,label,part\n b ,y,test\na,x,train\nc,x,train\na,y,train\n",
        );
        let mut spec = csv_spec(path, &["text"]);
        spec.split_column = Some("part".into());
        let (first, _) = ingest(&spec).unwrap();
        let out = dir.path().join("out.jsonl");
        first.write_jsonl(&out).unwrap();

        let again = IngestSpec {
            source_path: out,
            format: SourceFormat::Jsonl,
            text_columns: vec!["text".into()],
            label_column: "label_text".into(),
            label_mapping: None,
            drop_labels: None,
            split_column: Some("split".into()),
            dataset_id: None,
        };
        let (second, report) = ingest(&again).unwrap();
        assert_eq!(second, first);
        assert_eq!(report.rows_dropped_dup + report.rows_dropped_na, 0);
    }

    fn balanced(n_per_class: usize, k: usize) -> LabeledDataset {
        let classes = (0..k)
            .map(|id| ClassInfo {
                id,
                name: format!("c{id}"),
            })
            .collect();
        let mut ds = LabeledDataset::new("bal", classes);
        for i in 0..n_per_class * k {
            let label = i % k;
            ds.examples.push(LabeledExample {
                text: format!("text {i}"),
                label_text: format!("c{label}"),
                label_standard: label,
                dataset_id: "bal".into(),
                split: Split::Train,
            });
        }
        ds
    }

    #[test]
    fn split_is_stratified_80_20() {
        let ds = balanced(50, 2);
        let out = train_test_split(&ds, 0.2, 42).unwrap();
        assert_eq!(out.train.examples.len(), 80);
        assert_eq!(out.test.examples.len(), 20);
        assert_eq!(out.test.class_counts(), vec![10, 10]);
        assert!(out.warnings.is_empty());
        assert!(out.test.examples.iter().all(|e| e.split == Split::Test));
    }

    #[test]
    fn singleton_class_stays_in_train_with_warning() {
        let mut ds = balanced(5, 2);
        ds.classes.push(ClassInfo {
            id: 2,
            name: "rare".into(),
        });
        ds.examples.push(LabeledExample {
            text: "lonely".into(),
            label_text: "rare".into(),
            label_standard: 2,
            dataset_id: "bal".into(),
            split: Split::Train,
        });
        let out = train_test_split(&ds, 0.2, 1).unwrap();
        assert!(out.train.texts().contains(&"lonely"));
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn small_classes_get_one_test_example() {
        let ds = balanced(2, 3);
        let out = train_test_split(&ds, 0.2, 3).unwrap();
        assert_eq!(out.test.class_counts(), vec![1, 1, 1]);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(train_test_split(&balanced(3, 2), 1.0, 0).is_err());
        assert!(train_test_split(&balanced(3, 2), 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_deterministic_partition(
            sizes in proptest::collection::vec(1usize..30, 1..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let classes = (0..sizes.len()).map(|id| ClassInfo { id, name: format!("c{id}") }).collect();
            let mut ds = LabeledDataset::new("p", classes);
            for (class, &size) in sizes.iter().enumerate() {
                for j in 0..size {
                    ds.examples.push(LabeledExample {
                        text: format!("{class}-{j}"),
                        label_text: format!("c{class}"),
                        label_standard: class,
                        dataset_id: "p".into(),
                        split: Split::Train,
                    });
                }
            }
            let a = train_test_split(&ds, fraction, seed).unwrap();
            let b = train_test_split(&ds, fraction, seed).unwrap();
            prop_assert_eq!(&a, &b);

            let mut all: Vec<&str> = a.train.texts();
            all.extend(a.test.texts());
            all.sort();
            let mut expected = ds.texts();
            expected.sort();
            prop_assert_eq!(all, expected);

            let test_counts = a.test.class_counts();
            for (class, &size) in sizes.iter().enumerate() {
                let got = test_counts.get(class).copied().unwrap_or(0);
                let want = if size == 1 { 0 } else {
                    ((fraction * size as f64).round() as usize).clamp(1, size - 1)
                };
                prop_assert_eq!(got, want);
            }
        }
    }
}
