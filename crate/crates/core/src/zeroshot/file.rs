use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, Pair, ScoringBackend};
use crate::error::{Error, Result};
use crate::model::PairScore;

/// Recorded scores keyed by [`Pair::digest`].
///
/// Optionally carries the pairs themselves so the file can back a lookup
/// table as well as a replay.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    #[serde(default)]
    pub backend: String,
    pub scores: BTreeMap<String, PairScore>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pairs: BTreeMap<String, Pair>,
}

impl ScoreFile {
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if content.trim().is_empty() {
            return Ok(ScoreFile::default());
        }
        Ok(serde_json::from_str(&content)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        crate::model::write_string(path.as_ref(), &s)
    }

    pub fn insert(&mut self, pair: &Pair, score: PairScore) {
        let digest = pair.digest();
        self.scores.insert(digest.clone(), score);
        self.pairs.insert(digest, pair.clone());
    }

    /// Pair-keyed table; entries without a stored pair are dropped.
    pub fn into_table(self) -> HashMap<Pair, PairScore> {
        let ScoreFile { scores, pairs, .. } = self;
        pairs
            .into_iter()
            .filter_map(|(d, p)| scores.get(&d).map(|s| (p, *s)))
            .collect()
    }
}

/// Exact replay of a [`ScoreFile`].
#[derive(Debug, Clone)]
pub struct FileBackend {
    file: ScoreFile,
    source: String,
}

impl FileBackend {
    pub fn new(file: ScoreFile) -> Self {
        FileBackend {
            file,
            source: "memory".into(),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(FileBackend {
            file: ScoreFile::read_json(path)?,
            source: path.display().to_string(),
        })
    }
}

impl ScoringBackend for FileBackend {
    fn identity(&self) -> String {
        format!("file:{}", self.source)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_batch_size: None,
            concurrent: true,
        }
    }

    fn score(&self, pairs: &[Pair]) -> std::result::Result<Vec<PairScore>, BackendError> {
        pairs
            .iter()
            .map(|p| {
                self.file
                    .scores
                    .get(&p.digest())
                    .copied()
                    .ok_or_else(|| BackendError::Missing {
                        premise: p.premise.clone(),
                        hypothesis: p.hypothesis.clone(),
                    })
            })
            .collect()
    }
}

/// Wraps a backend and records every score it returns.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<ScoreFile>,
}

impl<B: ScoringBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        let backend = inner.identity();
        RecordingBackend {
            inner,
            recorded: Mutex::new(ScoreFile {
                backend,
                ..Default::default()
            }),
        }
    }

    pub fn score_file(&self) -> ScoreFile {
        self.recorded.lock().expect("recording lock").clone()
    }
}

impl<B: ScoringBackend> ScoringBackend for RecordingBackend<B> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn score(&self, pairs: &[Pair]) -> std::result::Result<Vec<PairScore>, BackendError> {
        let scores = self.inner.score(pairs)?;
        let mut file = self.recorded.lock().expect("recording lock");
        for (p, s) in pairs.iter().zip(&scores) {
            file.insert(p, *s);
        }
        Ok(scores)
    }
}
