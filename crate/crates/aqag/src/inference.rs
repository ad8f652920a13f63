//! HTTP client for a completions-style inference service: text generation,
//! echo-mode per-token log-probability scoring, and text embeddings, with
//! bounded retries and a bounded in-flight request limit.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Decoding parameters for one generation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 512,
            temperature: 0.7,
            stop_sequences: Vec::new(),
            seed: None,
        }
    }
}

impl GenerationParams {
    fn validate(&self) -> Result<(), ClientError> {
        if self.max_new_tokens == 0 {
            return Err(ClientError::InvalidParams(
                "max_new_tokens must be at least 1".into(),
            ));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ClientError::InvalidParams(
                "temperature must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One completed generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: TokenUsage,
}

/// One scored token of an echoed text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredToken {
    pub text: String,
    pub logprob: f64,
}

/// An ordered sequence of (token, log-probability) pairs. Construction
/// enforces that every log-probability is <= 0 and the sequence is
/// non-empty, so downstream perplexity is always >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScoreSequence {
    entries: Vec<ScoredToken>,
}

impl TokenScoreSequence {
    pub fn new(entries: Vec<ScoredToken>) -> Result<Self, ClientError> {
        if entries.is_empty() {
            return Err(ClientError::InvalidResponse(
                "empty token score sequence".into(),
            ));
        }
        for (i, entry) in entries.iter().enumerate() {
            if !entry.logprob.is_finite() || entry.logprob > 0.0 {
                return Err(ClientError::InvalidResponse(format!(
                    "logprob {} at position {i} is not a valid log-probability",
                    entry.logprob
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ScoredToken] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn logprobs(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.logprob)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("prompt text is empty")]
    EmptyPrompt,
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("endpoint returned status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("endpoint does not support {capability}")]
    CapabilityMissing { capability: &'static str },
    #[error("embedding dimension changed from {expected} to {got} within one session")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
}

/// Connection settings for [`InferenceClient`].
#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Maximum simultaneous in-flight requests.
    pub max_inflight: usize,
    /// Total send attempts on timeout/5xx before giving up.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_millis(60_000),
            max_inflight: 4,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Client for a completions-style HTTP service. Shareable across threads;
/// each call independently acquires an in-flight permit.
pub struct InferenceClient {
    agent: ureq::Agent,
    config: ClientConfig,
    inflight: Semaphore,
    embed_dim: Mutex<Option<usize>>,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    echo: Option<bool>,
}

#[derive(Deserialize)]
struct CompletionWire {
    choices: Vec<ChoiceWire>,
    usage: Option<UsageWire>,
}

#[derive(Deserialize)]
struct ChoiceWire {
    #[serde(default)]
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
    #[serde(default)]
    logprobs: Option<LogprobsWire>,
}

#[derive(Deserialize)]
struct LogprobsWire {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct UsageWire {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingWire {
    data: Vec<EmbeddingEntryWire>,
}

#[derive(Deserialize)]
struct EmbeddingEntryWire {
    embedding: Vec<f64>,
}

impl InferenceClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            inflight: Semaphore::new(config.max_inflight.max(1)),
            embed_dim: Mutex::new(None),
            config,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    /// Requests a completion for `prompt_text`. Stop sequences are honored
    /// by truncating the returned text at the first match.
    pub fn generate(
        &self,
        prompt_text: &str,
        params: &GenerationParams,
    ) -> Result<GenerationResponse, ClientError> {
        if prompt_text.is_empty() {
            return Err(ClientError::EmptyPrompt);
        }
        params.validate()?;
        let stop: Option<&[String]> = if params.stop_sequences.is_empty() {
            None
        } else {
            Some(&params.stop_sequences)
        };
        let request = CompletionRequest {
            prompt: prompt_text,
            max_tokens: params.max_new_tokens,
            temperature: params.temperature,
            stop,
            seed: params.seed,
            logprobs: None,
            echo: None,
        };
        let body = self.post_json("completions", &request)?;
        let wire: CompletionWire = parse_json(&body)?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::InvalidResponse("response has no choices".into()))?;
        let usage = wire
            .usage
            .ok_or_else(|| ClientError::InvalidResponse("response has no usage".into()))?;

        let mut text = choice.text;
        let mut finish_reason = match choice.finish_reason.as_deref() {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            _ => FinishReason::Error,
        };
        if let Some(cut) = params
            .stop_sequences
            .iter()
            .filter_map(|s| text.find(s.as_str()))
            .min()
        {
            text.truncate(cut);
            finish_reason = FinishReason::Stop;
        }
        if finish_reason == FinishReason::Length
            && usage.completion_tokens != u64::from(params.max_new_tokens)
        {
            return Err(ClientError::InvalidResponse(format!(
                "finish_reason=length but completion_tokens {} != max_new_tokens {}",
                usage.completion_tokens, params.max_new_tokens
            )));
        }
        Ok(GenerationResponse {
            text,
            finish_reason,
            usage: TokenUsage {
                prompt_tokens: usage.prompt_tokens,
                completion_tokens: usage.completion_tokens,
            },
        })
    }

    /// Scores `text` in echo mode, returning one entry per model token.
    /// A null first-token logprob (the undefined P(x1|..) sentinel) is
    /// excluded from the sequence and from the downstream token count.
    pub fn score_tokens(&self, text: &str) -> Result<TokenScoreSequence, ClientError> {
        if text.is_empty() {
            return Err(ClientError::EmptyPrompt);
        }
        let request = CompletionRequest {
            prompt: text,
            max_tokens: 0,
            temperature: 0.0,
            stop: None,
            seed: None,
            logprobs: Some(0),
            echo: Some(true),
        };
        let body = match self.post_json("completions", &request) {
            Err(ClientError::Http { status: 404, .. }) => {
                return Err(ClientError::CapabilityMissing {
                    capability: "token scoring",
                })
            }
            other => other?,
        };
        let wire: CompletionWire = parse_json(&body)?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::InvalidResponse("response has no choices".into()))?;
        let logprobs = choice.logprobs.ok_or(ClientError::CapabilityMissing {
            capability: "token scoring",
        })?;
        if logprobs.tokens.len() != logprobs.token_logprobs.len() {
            return Err(ClientError::InvalidResponse(format!(
                "tokens/token_logprobs length mismatch: {} vs {}",
                logprobs.tokens.len(),
                logprobs.token_logprobs.len()
            )));
        }
        let mut entries = Vec::with_capacity(logprobs.tokens.len());
        for (i, (token, logprob)) in logprobs
            .tokens
            .into_iter()
            .zip(logprobs.token_logprobs)
            .enumerate()
        {
            match logprob {
                Some(value) => entries.push(ScoredToken {
                    text: token,
                    logprob: value,
                }),
                None if i == 0 => {} // first-token sentinel
                None => {
                    return Err(ClientError::InvalidResponse(format!(
                        "null logprob at non-initial position {i}"
                    )))
                }
            }
        }
        TokenScoreSequence::new(entries)
    }

    /// Requests an embedding vector for `text`. The dimension is pinned on
    /// first use; a later change within the session is an error.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>, ClientError> {
        if text.is_empty() {
            return Err(ClientError::EmptyPrompt);
        }
        let body = match self.post_json("embeddings", &EmbeddingRequest { input: text }) {
            Err(ClientError::Http { status: 404, .. }) => {
                return Err(ClientError::CapabilityMissing {
                    capability: "embeddings",
                })
            }
            other => other?,
        };
        let wire: EmbeddingWire = match parse_json::<EmbeddingWire>(&body) {
            Err(_) => {
                return Err(ClientError::CapabilityMissing {
                    capability: "embeddings",
                })
            }
            Ok(wire) => wire,
        };
        let embedding = wire
            .data
            .into_iter()
            .next()
            .ok_or(ClientError::CapabilityMissing {
                capability: "embeddings",
            })?
            .embedding;
        let mut dim = self.embed_dim.lock().expect("embed_dim lock");
        match *dim {
            None => *dim = Some(embedding.len()),
            Some(expected) if expected != embedding.len() => {
                return Err(ClientError::DimensionMismatch {
                    expected,
                    got: embedding.len(),
                })
            }
            Some(_) => {}
        }
        Ok(embedding)
    }

    /// POSTs `request` to `{endpoint}/{path}`, retrying on timeout and 5xx
    /// with exponential backoff. 4xx statuses fail immediately with the
    /// body surfaced. Returns the 2xx response body.
    fn post_json<T: Serialize>(&self, path: &str, request: &T) -> Result<String, ClientError> {
        let _permit = self.inflight.acquire();
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            if attempt > 1 {
                let factor = 2u32.saturating_pow(attempt - 2);
                std::thread::sleep(self.config.initial_backoff * factor);
            }
            let mut builder = self.agent.post(&url);
            if let Some(key) = &self.config.api_key {
                builder = builder.header("authorization", format!("Bearer {key}"));
            }
            match builder.send_json(request) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let body = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| ClientError::Network(e.to_string()))?;
                    if (200..300).contains(&status) {
                        return Ok(body);
                    }
                    let error = ClientError::Http { status, body };
                    if (500..600).contains(&status) {
                        last = error.to_string();
                        continue;
                    }
                    return Err(error);
                }
                Err(e) if is_retryable(&e) => {
                    last = e.to_string();
                    continue;
                }
                Err(e) => return Err(ClientError::Network(e.to_string())),
            }
        }
        Err(ClientError::RetriesExhausted {
            attempts: self.config.max_attempts,
            last,
        })
    }
}

fn is_retryable(error: &ureq::Error) -> bool {
    matches!(
        error,
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed
    )
}

fn parse_json<'a, T: Deserialize<'a>>(body: &'a str) -> Result<T, ClientError> {
    serde_json::from_str(body)
        .map_err(|e| ClientError::InvalidResponse(format!("{e}; body: {body:.200}")))
}

/// Counting semaphore bounding concurrent requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

struct SemaphorePermit<'a> {
    semaphore: &'a Semaphore,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphorePermit<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphorePermit { semaphore: self }
    }
}

impl Drop for SemaphorePermit<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

impl crate::metrics::TokenScorer for InferenceClient {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreSequence, crate::metrics::MetricsError> {
        InferenceClient::score_tokens(self, text).map_err(|e| match e {
            ClientError::CapabilityMissing { capability } => {
                crate::metrics::MetricsError::CapabilityMissing { capability }
            }
            other => crate::metrics::MetricsError::Scoring(other.to_string()),
        })
    }
}

impl crate::metrics::Embedder for InferenceClient {
    fn embed(&self, text: &str) -> Result<Vec<f64>, crate::metrics::MetricsError> {
        InferenceClient::embed(self, text).map_err(|e| match e {
            ClientError::CapabilityMissing { capability } => {
                crate::metrics::MetricsError::CapabilityMissing { capability }
            }
            other => crate::metrics::MetricsError::Embedding(other.to_string()),
        })
    }
}
