use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, Pair, ScoringBackend};
use crate::model::PairScore;

const MAX_RETRIES: usize = 2;

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: &'a [Pair],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub model: String,
}

/// Client for a remote scorer speaking `POST /score` and `GET /health`.
///
/// Pairs are sent in batches of at most `batch_size`. Transport failures
/// (connection errors, timeouts) are retried up to twice; HTTP errors,
/// malformed bodies and length mismatches are not.
#[derive(Debug)]
pub struct HttpBackend {
    base_url: String,
    batch_size: usize,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, batch_size: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            batch_size: batch_size.max(1),
            agent,
        }
    }

    pub fn health(&self) -> Result<HealthStatus, BackendError> {
        let url = format!("{}/health", self.base_url);
        let mut resp = self.agent.get(&url).call().map_err(BackendError::from_transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(BackendError::from_transport)?;
        if status != 200 {
            return Err(BackendError::Status { status, body });
        }
        serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))
    }

    fn post_batch(&self, pairs: &[Pair]) -> Result<Vec<PairScore>, BackendError> {
        let url = format!("{}/score", self.base_url);
        let payload =
            serde_json::to_vec(&ScoreRequest { pairs }).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(&payload[..])
            .map_err(BackendError::from_transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(BackendError::from_transport)?;
        if status != 200 {
            return Err(BackendError::Status { status, body });
        }
        let parsed: ScoreResponse = serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if parsed.scores.len() != pairs.len() {
            return Err(BackendError::LengthMismatch {
                expected: pairs.len(),
                got: parsed.scores.len(),
            });
        }
        Ok(parsed.scores)
    }

    fn post_with_retry(&self, pairs: &[Pair]) -> Result<Vec<PairScore>, BackendError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.post_batch(pairs) {
                Err(BackendError::Transport { message, .. }) => {
                    if attempts > MAX_RETRIES {
                        return Err(BackendError::Transport { message, attempts });
                    }
                    log::warn!("scoring request failed ({message}); retrying");
                }
                other => return other,
            }
        }
    }
}

impl ScoringBackend for HttpBackend {
    fn identity(&self) -> String {
        self.base_url.clone()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_batch_size: Some(self.batch_size),
            concurrent: false,
        }
    }

    fn score(&self, pairs: &[Pair]) -> Result<Vec<PairScore>, BackendError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.batch_size) {
            out.extend(self.post_with_retry(chunk)?);
        }
        Ok(out)
    }
}
