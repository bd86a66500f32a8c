//! HTTP embedding client.
//!
//! `POST {endpoint}/embed` with `{"model": ..., "texts": [...]}`; the reply is
//! `{"vectors": [[...], ...]}` aligned with `texts`. A bearer token is taken
//! from `EMBED_API_TOKEN` when set. Failed attempts are retried with
//! exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingVector;

use super::{EmbedError, EmbeddingBackend, ModelConfig};

pub const TOKEN_ENV: &str = "EMBED_API_TOKEN";

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    token: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

impl RemoteBackend {
    pub fn from_config(config: &ModelConfig) -> Result<Self, EmbedError> {
        let endpoint = config.endpoint.as_deref().ok_or_else(|| {
            EmbedError::InvalidConfig(format!("{}: missing endpoint", config.model_id))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::BackendUnavailable(format!("building HTTP client: {e}")))?;
        Ok(Self {
            client,
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            model: config.model_id.clone(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
        })
    }

    fn attempt(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let mut req = self.client.post(&self.url).json(&EmbedRequest {
            model: &self.model,
            texts,
        });
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| format!("request to {} failed: {e}", self.url))?;
        let status = resp.status();
        if status != reqwest::StatusCode::OK {
            return Err(format!("{} returned HTTP {status}", self.url));
        }
        let body: EmbedResponse = resp
            .json()
            .map_err(|e| format!("malformed response from {}: {e}", self.url))?;
        if body.vectors.len() != texts.len() {
            return Err(format!(
                "malformed response from {}: {} vectors for {} texts",
                self.url,
                body.vectors.len(),
                texts.len()
            ));
        }
        Ok(body.vectors)
    }
}

impl EmbeddingBackend for RemoteBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        let vectors = loop {
            match self.attempt(texts) {
                Ok(v) => break v,
                Err(msg) if attempt >= self.max_retries => {
                    return Err(EmbedError::BackendUnavailable(format!(
                        "{msg} (after {} attempts)",
                        attempt + 1
                    )))
                }
                Err(msg) => {
                    log::warn!("{msg}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        };
        vectors
            .into_iter()
            .map(|v| {
                EmbeddingVector::new(v)
                    .map_err(|e| EmbedError::BackendUnavailable(format!("malformed vector: {e}")))
            })
            .collect()
    }
}
