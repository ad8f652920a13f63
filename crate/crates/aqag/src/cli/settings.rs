//! Endpoint and decoding-parameter resolution with the precedence
//! flags > environment variables > config file > built-in default.

use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use serde::Deserialize;

use super::{CliError, CliResult};
use crate::inference::{ClientConfig, GenerationParams, InferenceClient};

pub const ENDPOINT_ENV: &str = "AQAG_ENDPOINT";
pub const API_KEY_ENV: &str = "AQAG_API_KEY";

/// Optional JSON settings file: `{"endpoint", "api_key", "timeout_ms",
/// "temperature", "max_new_tokens"}`, all keys optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub timeout_ms: Option<u64>,
    pub temperature: Option<f64>,
    pub max_new_tokens: Option<u32>,
}

pub fn load_file_settings(path: Option<&PathBuf>) -> Result<FileSettings, CliError> {
    let Some(path) = path else {
        return Ok(FileSettings::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Environment(format!("cannot read config file {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config file {}: {e}", path.display())))
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// Inference service base URL (or AQAG_ENDPOINT)
    #[arg(long, env = ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    /// Bearer token (or AQAG_API_KEY)
    #[arg(long, env = API_KEY_ENV, hide_env_values = true)]
    pub api_key: Option<String>,
    /// Request timeout in milliseconds
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// JSON settings file consulted for values not given as flags or env
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl EndpointArgs {
    pub fn client(&self) -> Result<InferenceClient, CliError> {
        self.client_with_limit(None)
    }

    pub fn client_with_limit(
        &self,
        max_inflight: Option<usize>,
    ) -> Result<InferenceClient, CliError> {
        let file = load_file_settings(self.config.as_ref())?;
        let endpoint = self
            .endpoint
            .clone()
            .or(file.endpoint)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "no endpoint: pass --endpoint, set {ENDPOINT_ENV}, or put \"endpoint\" in the config file"
                ))
            })?;
        let mut config = ClientConfig::new(endpoint);
        config.api_key = self.api_key.clone().or(file.api_key);
        if let Some(ms) = self.timeout_ms.or(file.timeout_ms) {
            config.timeout = Duration::from_millis(ms);
        }
        if let Some(limit) = max_inflight {
            config.max_inflight = limit;
        }
        Ok(InferenceClient::new(config))
    }

    pub fn is_configured(&self) -> Result<bool, CliError> {
        let file = load_file_settings(self.config.as_ref())?;
        Ok(self.endpoint.is_some() || file.endpoint.is_some())
    }
}

#[derive(Debug, Args)]
pub struct GenerationArgs {
    /// Upper bound on generated tokens
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    /// Sampling temperature (0 disables sampling variance)
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Stop sequence; repeatable
    #[arg(long = "stop")]
    pub stop_sequences: Vec<String>,
    /// Decoding seed forwarded to the service
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenerationArgs {
    pub fn resolve(&self, file: &FileSettings) -> Result<GenerationParams, CliError> {
        let defaults = GenerationParams::default();
        let params = GenerationParams {
            max_new_tokens: self
                .max_new_tokens
                .or(file.max_new_tokens)
                .unwrap_or(defaults.max_new_tokens),
            temperature: self
                .temperature
                .or(file.temperature)
                .unwrap_or(defaults.temperature),
            stop_sequences: self.stop_sequences.clone(),
            seed: self.seed,
        };
        validate_params(&params)?;
        Ok(params)
    }
}

fn validate_params(params: &GenerationParams) -> CliResult {
    if params.max_new_tokens == 0 {
        return Err(CliError::Usage(
            "--max-new-tokens must be at least 1".into(),
        ));
    }
    if !params.temperature.is_finite() || params.temperature < 0.0 {
        return Err(CliError::Usage(
            "--temperature must be finite and >= 0".into(),
        ));
    }
    Ok(())
}
