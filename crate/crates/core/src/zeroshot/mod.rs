//! Zero-shot classification through an entailment-scoring backend.
//!
//! Every candidate label is rendered into a hypothesis, every
//! (text, hypothesis) pair is scored by a [`ScoringBackend`], and the
//! entailment logits are turned into class probabilities:
//!
//! * single-label: softmax over the entailment logits of a text's labels;
//! * multi-label: each pair on its own, `exp(e) / (exp(e) + exp(ne))`.
//!
//! Both modes share the same argmax (lowest index on ties).

mod file;
mod http;
mod mock;

use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use file::{FileBackend, RecordingBackend, ScoreFile};
pub use http::{HealthStatus, HttpBackend};
pub use mock::{MockBackend, MockMode};

use crate::error::{Error, Result};
use crate::model::{argmax, LabeledDataset, PairScore, Prediction};
use crate::verbalizer::render_template;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: usize },

    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },

    #[error("malformed backend response: {0}")]
    Malformed(String),

    #[error("backend returned {got} scores for {expected} pairs")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no score for pair (premise {premise:?}, hypothesis {hypothesis:?})")]
    Missing { premise: String, hypothesis: String },
}

impl BackendError {
    pub(crate) fn from_transport(e: impl std::fmt::Display) -> Self {
        BackendError::Transport {
            message: e.to_string(),
            attempts: 1,
        }
    }

    /// Transport failures may succeed on retry; every other failure is final.
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub premise: String,
    pub hypothesis: String,
}

impl Pair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Pair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }

    /// Hex SHA-256 over the length-prefixed premise followed by the hypothesis.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.premise.len() as u64).to_le_bytes());
        hasher.update(self.premise.as_bytes());
        hasher.update(self.hypothesis.as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    /// Largest number of pairs per `score` call; `None` for unbounded.
    pub max_batch_size: Option<usize>,
    /// Whether `score` may be called from several threads at once.
    pub concurrent: bool,
}

/// Anything that maps premise/hypothesis pairs to entailment logits.
///
/// For a fixed backend identical pairs must yield identical scores.
pub trait ScoringBackend: Send + Sync {
    fn identity(&self) -> String;

    fn capabilities(&self) -> Capabilities;

    /// Scores in the same order as `pairs`.
    fn score(&self, pairs: &[Pair]) -> std::result::Result<Vec<PairScore>, BackendError>;
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn score(&self, pairs: &[Pair]) -> std::result::Result<Vec<PairScore>, BackendError> {
        (**self).score(pairs)
    }
}

/// Scores `pairs` in backend-sized batches, preserving order.
///
/// Batches run in parallel only when the backend declares itself concurrent.
pub fn score_pairs(backend: &dyn ScoringBackend, pairs: &[Pair]) -> Result<Vec<PairScore>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let caps = backend.capabilities();
    let batch = caps.max_batch_size.unwrap_or(pairs.len()).max(1);
    let run = |chunk: &[Pair]| -> std::result::Result<Vec<PairScore>, BackendError> {
        let scores = backend.score(chunk)?;
        if scores.len() != chunk.len() {
            return Err(BackendError::LengthMismatch {
                expected: chunk.len(),
                got: scores.len(),
            });
        }
        Ok(scores)
    };
    let batches: Vec<std::result::Result<Vec<PairScore>, BackendError>> = if caps.concurrent {
        pairs.par_chunks(batch).map(run).collect()
    } else {
        pairs.chunks(batch).map(run).collect()
    };
    let mut scores = Vec::with_capacity(pairs.len());
    for b in batches {
        scores.extend(b?);
    }
    for (pair, s) in pairs.iter().zip(&scores) {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!(
                "logits ({}, {}) for premise {:?} / hypothesis {:?}",
                s.entailment_logit, s.not_entailment_logit, pair.premise, pair.hypothesis
            )));
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRequest {
    pub texts: Vec<String>,
    pub candidate_labels: Vec<String>,
    pub hypothesis_template: String,
    #[serde(default)]
    pub multi_label: bool,
}

pub const DEFAULT_TEMPLATE: &str = "This text is about {}";

impl ClassificationRequest {
    pub fn new(texts: Vec<String>, candidate_labels: Vec<String>) -> Self {
        ClassificationRequest {
            texts,
            candidate_labels,
            hypothesis_template: DEFAULT_TEMPLATE.to_string(),
            multi_label: false,
        }
    }

    pub fn hypotheses(&self) -> Result<Vec<String>> {
        self.candidate_labels
            .iter()
            .map(|l| render_template(&self.hypothesis_template, l))
            .collect()
    }
}

/// Softmax over entailment logits.
pub fn single_label_probs(entailment_logits: &[f64]) -> Vec<f64> {
    let m = entailment_logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = entailment_logits.iter().map(|e| (e - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-pair entailment probability, `exp(e) / (exp(e) + exp(ne))`.
pub fn multi_label_probs(scores: &[PairScore]) -> Vec<f64> {
    scores
        .iter()
        .map(|s| 1.0 / (1.0 + (s.not_entailment_logit - s.entailment_logit).exp()))
        .collect()
}

pub fn classify(req: &ClassificationRequest, backend: &dyn ScoringBackend) -> Result<Vec<Prediction>> {
    if req.texts.is_empty() {
        return Err(Error::invalid("classification needs at least one text"));
    }
    if req.candidate_labels.is_empty() {
        return Err(Error::invalid("classification needs at least one candidate label"));
    }
    let hypotheses = req.hypotheses()?;
    let pairs: Vec<Pair> = req
        .texts
        .iter()
        .flat_map(|t| hypotheses.iter().map(move |h| Pair::new(t.clone(), h.clone())))
        .collect();
    let scores = score_pairs(backend, &pairs)?;

    let k = hypotheses.len();
    Ok(scores
        .chunks(k)
        .enumerate()
        .map(|(text_id, per_text)| {
            let class_probs = if req.multi_label {
                multi_label_probs(per_text)
            } else {
                let logits: Vec<f64> = per_text.iter().map(|s| s.entailment_logit).collect();
                single_label_probs(&logits)
            };
            let predicted_class = argmax(&class_probs).expect("at least one label");
            Prediction {
                text_id,
                class_probs,
                predicted_class,
            }
        })
        .collect())
}

/// Backend selected by a short spec string.
///
/// * `mock`: hash-derived logits
/// * `mock:planted=<dataset.jsonl>` / `mock:inverted=<dataset.jsonl>`: truth
///   taken from a labeled dataset
/// * `mock:table=<scores.json>`: explicit lookup table
/// * `file:<scores.json>`: replay of recorded scores
/// * `http://…` / `https://…`: remote scoring service
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    MockHash,
    MockPlanted { dataset: PathBuf, inverted: bool },
    MockTable(PathBuf),
    File(PathBuf),
    Http(String),
}

impl std::str::FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mock" {
            return Ok(BackendSpec::MockHash);
        }
        if let Some(rest) = s.strip_prefix("mock:") {
            let (kind, path) = rest
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("mock backend `{s}` needs kind=path")))?;
            return match kind {
                "planted" => Ok(BackendSpec::MockPlanted {
                    dataset: path.into(),
                    inverted: false,
                }),
                "inverted" => Ok(BackendSpec::MockPlanted {
                    dataset: path.into(),
                    inverted: true,
                }),
                "table" => Ok(BackendSpec::MockTable(path.into())),
                other => Err(Error::invalid(format!("unknown mock kind `{other}`"))),
            };
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(BackendSpec::File(path.into()));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(BackendSpec::Http(s.to_string()));
        }
        Err(Error::invalid(format!("unrecognized backend `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HttpOptions {
    pub batch_size: usize,
    pub timeout: Duration,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            batch_size: 32,
            timeout: Duration::from_secs(60),
        }
    }
}

impl BackendSpec {
    pub fn open(&self, http: HttpOptions) -> Result<Box<dyn ScoringBackend>> {
        Ok(match self {
            BackendSpec::MockHash => Box::new(MockBackend::hashed()),
            BackendSpec::MockPlanted { dataset, inverted } => {
                let ds = LabeledDataset::read_jsonl(dataset)?;
                let backend = MockBackend::planted_from_dataset(&ds);
                Box::new(if *inverted { backend.inverted() } else { backend })
            }
            BackendSpec::MockTable(path) => Box::new(MockBackend::table(ScoreFile::read_json(path)?.into_table())),
            BackendSpec::File(path) => Box::new(FileBackend::open(path)?),
            BackendSpec::Http(url) => Box::new(HttpBackend::new(url.clone(), http.batch_size, http.timeout)),
        })
    }
}
