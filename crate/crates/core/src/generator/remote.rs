use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GeneratorError, ProofGenerator, SamplingParams};
use crate::dataset::TokenSeq;

/// Body of `POST /generate`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub input_text: String,
    pub n_samples: u32,
    pub temperature: f64,
    pub top_k: u32,
    pub max_new_tokens: u32,
    pub seed: u64,
}

impl GenerateRequest {
    pub fn new(input: &TokenSeq, params: &SamplingParams) -> Self {
        GenerateRequest {
            input_text: input.text.clone(),
            n_samples: params.n_samples,
            temperature: params.temperature.as_f64(),
            top_k: params.top_k,
            max_new_tokens: params.max_new_tokens,
            seed: params.seed,
        }
    }
}

/// `200` body: `{"samples": [...]}`; error bodies carry `{"error": ...}`.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct GenerateResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// HTTP client for a remote generator. Connections are pooled per agent and
/// the client can be shared across threads.
#[derive(Clone, Debug)]
pub struct RemoteGenerator {
    base_url: String,
    agent: ureq::Agent,
    max_input_tokens: Option<usize>,
}

impl RemoteGenerator {
    pub fn new(base_url: impl Into<String>, timeout: Duration, max_connections: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_idle_connections(max_connections.max(1))
            .max_idle_connections_per_host(max_connections.max(1))
            .build()
            .into();
        RemoteGenerator { base_url: base_url.into().trim_end_matches('/').to_string(), agent, max_input_tokens: None }
    }

    /// Refuse inputs longer than `max` tokens before sending them.
    pub fn with_max_input(mut self, max: usize) -> Self {
        self.max_input_tokens = Some(max);
        self
    }

    pub fn url(&self) -> &str {
        &self.base_url
    }
}

impl ProofGenerator for RemoteGenerator {
    fn id(&self) -> String {
        format!("remote({})", self.base_url)
    }

    fn generate(&self, input: &TokenSeq, params: &SamplingParams) -> Result<Vec<String>, GeneratorError> {
        if let Some(max) = self.max_input_tokens {
            if input.len() > max {
                return Err(GeneratorError::Oversized { len: input.len(), max });
            }
        }
        let url = format!("{}/generate", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(GenerateRequest::new(input, params))
            .map_err(|e| GeneratorError::BackendUnavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let body: GenerateResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| GeneratorError::Protocol(format!("status {status}, unreadable body: {e}")))?;
        if status != 200 {
            return Err(GeneratorError::BackendRejected(body.error.unwrap_or_else(|| format!("HTTP {status}"))));
        }
        let samples = body.samples.ok_or_else(|| GeneratorError::Protocol("response without `samples`".into()))?;
        if samples.len() != params.n_samples as usize {
            return Err(GeneratorError::Protocol(format!(
                "expected {} samples, got {}",
                params.n_samples,
                samples.len()
            )));
        }
        Ok(samples)
    }
}
