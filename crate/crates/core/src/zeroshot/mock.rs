use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::{BackendError, Capabilities, Pair, ScoringBackend};
use crate::cleaner::embed::tokenize;
use crate::model::{LabeledDataset, PairScore};

/// Logit magnitude used by the planted-truth rule.
const PLANTED_MARGIN: f64 = 4.0;

#[derive(Debug, Clone)]
pub enum MockMode {
    /// Logits derived from a SHA-256 of the pair, uniform in [-5, 5).
    Hash,
    Table(HashMap<Pair, PairScore>),
    /// Entailment is high iff the hypothesis contains the premise's true
    /// label (as a run of whole words); `inverted` flips that.
    Planted {
        truth: HashMap<String, String>,
        inverted: bool,
    },
}

/// Deterministic offline backend for tests and pipelines.
#[derive(Debug)]
pub struct MockBackend {
    mode: MockMode,
    max_batch_size: Option<usize>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(mode: MockMode) -> Self {
        MockBackend {
            mode,
            max_batch_size: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn hashed() -> Self {
        Self::new(MockMode::Hash)
    }

    pub fn table(table: HashMap<Pair, PairScore>) -> Self {
        Self::new(MockMode::Table(table))
    }

    pub fn planted(truth: HashMap<String, String>) -> Self {
        Self::new(MockMode::Planted { truth, inverted: false })
    }

    /// Truth is each example's `label_text`.
    pub fn planted_from_dataset(ds: &LabeledDataset) -> Self {
        Self::planted(
            ds.examples
                .iter()
                .map(|e| (e.text.clone(), e.label_text.clone()))
                .collect(),
        )
    }

    pub fn inverted(self) -> Self {
        let mode = match self.mode {
            MockMode::Planted { truth, inverted } => MockMode::Planted {
                truth,
                inverted: !inverted,
            },
            other => other,
        };
        MockBackend { mode, ..self }
    }

    pub fn with_max_batch_size(mut self, size: usize) -> Self {
        self.max_batch_size = Some(size);
        self
    }

    /// Number of `score` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn score_one(&self, pair: &Pair) -> Result<PairScore, BackendError> {
        match &self.mode {
            MockMode::Hash => {
                let digest = Sha256::digest(pair.digest().as_bytes());
                let unit = |b: &[u8]| {
                    let v = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                    v as f64 / (u32::MAX as f64 + 1.0) * 10.0 - 5.0
                };
                Ok(PairScore::new(unit(&digest[..4]), unit(&digest[4..8])))
            }
            MockMode::Table(table) => table.get(pair).copied().ok_or_else(|| BackendError::Missing {
                premise: pair.premise.clone(),
                hypothesis: pair.hypothesis.clone(),
            }),
            MockMode::Planted { truth, inverted } => {
                let label = truth.get(&pair.premise).ok_or_else(|| BackendError::Missing {
                    premise: pair.premise.clone(),
                    hypothesis: pair.hypothesis.clone(),
                })?;
                let entailed = contains_words(&pair.hypothesis, label) != *inverted;
                let e = if entailed { PLANTED_MARGIN } else { -PLANTED_MARGIN };
                Ok(PairScore::new(e, -e))
            }
        }
    }
}

fn contains_words(haystack: &str, needle: &str) -> bool {
    let hay = tokenize(haystack);
    let words = tokenize(needle);
    !words.is_empty() && hay.windows(words.len()).any(|w| w == words.as_slice())
}

impl ScoringBackend for MockBackend {
    fn identity(&self) -> String {
        match &self.mode {
            MockMode::Hash => "mock:hash".into(),
            MockMode::Table(_) => "mock:table".into(),
            MockMode::Planted { inverted: false, .. } => "mock:planted".into(),
            MockMode::Planted { inverted: true, .. } => "mock:inverted".into(),
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_batch_size: self.max_batch_size,
            concurrent: true,
        }
    }

    fn score(&self, pairs: &[Pair]) -> Result<Vec<PairScore>, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        pairs.iter().map(|p| self.score_one(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeroshot::{classify, ClassificationRequest};

    #[test]
    fn same_pair_same_score() {
        let b = MockBackend::hashed();
        let p = [Pair::new("x", "y"), Pair::new("x", "y")];
        let s = b.score(&p).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[0], MockBackend::hashed().score(&p[..1]).unwrap()[0]);
        assert!(s[0].entailment_logit >= -5.0 && s[0].entailment_logit < 5.0);
    }

    #[test]
    fn planted_truth_is_recovered() {
        let truth: HashMap<String, String> = [
            ("The match ended two nil", "sports"),
            ("Parliament passed the budget", "politics"),
            ("Shares fell sharply today", "economy"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let labels = vec!["politics".to_string(), "economy".to_string(), "sports".to_string()];
        let texts: Vec<String> = truth.keys().cloned().collect();
        let req = ClassificationRequest::new(texts.clone(), labels.clone());
        let preds = classify(&req, &MockBackend::planted(truth.clone())).unwrap();
        for (p, t) in preds.iter().zip(&texts) {
            assert_eq!(labels[p.predicted_class], truth[t]);
        }
    }

    #[test]
    fn table_miss_names_pair() {
        let b = MockBackend::table(HashMap::new());
        let err = b.score(&[Pair::new("prem", "hyp")]).unwrap_err();
        assert!(err.to_string().contains("prem") && err.to_string().contains("hyp"));
    }

    #[test]
    fn word_containment_is_whole_word() {
        assert!(contains_words("This text is about public health", "public health"));
        assert!(!contains_words("This text is about publicity", "public"));
    }
}
