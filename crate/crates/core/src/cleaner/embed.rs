//! Text embeddings for the noise classifier.

use std::collections::HashMap;
use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zeroshot::BackendError;

pub const DEFAULT_DIMS: usize = 256;

/// Dense n×d feature rows, one per text.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let d = values.ncols().max(1);
            return Err(Error::NonFinite(format!("feature ({}, {})", pos / d, pos % d)));
        }
        Ok(FeatureMatrix { values })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(ndarray::Axis(0), rows),
        }
    }
}

/// Lowercased alphanumeric words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bucket of a token: 64-bit FNV-1a of its UTF-8 bytes, modulo `dims`.
pub fn feature_index(token: &str, dims: usize) -> usize {
    let mut hasher = FnvHasher::default();
    hasher.write(token.as_bytes());
    (hasher.finish() % dims as u64) as usize
}

/// Hashed TF-IDF with log-scaled term frequency and smoothed IDF.
///
/// `tf = 1 + ln(count)`, `idf = ln((1 + n) / (1 + df)) + 1`, counted per
/// hash bucket; each row is L2-normalized (all-zero rows stay zero).
pub fn hashed_tfidf(texts: &[&str], dims: usize) -> Result<FeatureMatrix> {
    if texts.is_empty() {
        return Err(Error::invalid("cannot embed an empty list of texts"));
    }
    if dims == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let n = texts.len();
    let counts: Vec<HashMap<usize, usize>> = texts
        .iter()
        .map(|t| {
            let mut c = HashMap::new();
            for tok in tokenize(t) {
                *c.entry(feature_index(&tok, dims)).or_insert(0) += 1;
            }
            c
        })
        .collect();
    let mut df = vec![0usize; dims];
    for doc in &counts {
        for &j in doc.keys() {
            df[j] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let mut values = Array2::<f64>::zeros((n, dims));
    for (i, doc) in counts.iter().enumerate() {
        for (&j, &c) in doc {
            values[[i, j]] = (1.0 + (c as f64).ln()) * idf[j];
        }
        let norm = values.row(i).dot(&values.row(i)).sqrt();
        if norm > 0.0 {
            values.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }
    FeatureMatrix::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedder {
    HashedTfIdf {
        dims: usize,
    },
    /// Remote `POST /embed` on the inference sidecar.
    Sidecar {
        url: String,
        timeout_secs: u64,
    },
}

impl Default for Embedder {
    fn default() -> Self {
        Embedder::HashedTfIdf { dims: DEFAULT_DIMS }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

pub fn embed(texts: &[&str], embedder: &Embedder) -> Result<FeatureMatrix> {
    match embedder {
        Embedder::HashedTfIdf { dims } => hashed_tfidf(texts, *dims),
        Embedder::Sidecar { url, timeout_secs } => {
            if texts.is_empty() {
                return Err(Error::invalid("cannot embed an empty list of texts"));
            }
            let rows = sidecar_embed(url, texts, Duration::from_secs(*timeout_secs))?;
            let d = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != d) || d == 0 {
                return Err(BackendError::Malformed("embedding rows differ in length".into()).into());
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let values =
                Array2::from_shape_vec((texts.len(), d), flat).map_err(|e| BackendError::Malformed(e.to_string()))?;
            FeatureMatrix::new(values)
        }
    }
}

fn sidecar_embed(url: &str, texts: &[&str], timeout: Duration) -> std::result::Result<Vec<Vec<f64>>, BackendError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let endpoint = format!("{}/embed", url.trim_end_matches('/'));
    let mut resp = agent
        .post(&endpoint)
        .send_json(EmbedRequest { texts })
        .map_err(BackendError::from_transport)?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(BackendError::from_transport)?;
    if status != 200 {
        return Err(BackendError::Status { status, body });
    }
    let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    if parsed.embeddings.len() != texts.len() {
        return Err(BackendError::LengthMismatch {
            expected: texts.len(),
            got: parsed.embeddings.len(),
        });
    }
    Ok(parsed.embeddings)
}
