//! Fine-tuning configuration: capture, validate, and emit the trainer
//! hyperparameter and quantization bundle as a flat JSON file for external
//! training stacks. This tool never executes training itself.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::QuantizationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp16,
    Fp32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Cosine,
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingTokenPolicy {
    EosAsPad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingSide {
    Right,
    Left,
}

/// Weight quantization settings for the emitted config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationConfig {
    #[serde(flatten)]
    pub spec: QuantizationSpec,
    pub quant_type: String,
    pub compute_dtype: String,
}

/// Optional low-rank adapter settings, emitted only when supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    #[serde(rename = "adapter_method")]
    pub method: String,
    #[serde(rename = "adapter_rank")]
    pub rank: u32,
    #[serde(rename = "adapter_alpha")]
    pub alpha: f64,
}

/// The full hyperparameter bundle handed to an external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub base_model_id: String,
    pub batch_size: u32,
    pub gradient_accumulation: u32,
    pub max_grad_norm: f64,
    pub precision: Precision,
    pub max_seq_len: u32,
    pub epochs: u32,
    pub eval_interval_steps: u32,
    pub lr_schedule: LrSchedule,
    pub optimizer: String,
    #[serde(flatten)]
    pub quantization: QuantizationConfig,
    pub padding_token_policy: PaddingTokenPolicy,
    pub padding_side: PaddingSide,
    /// Deliberately optional: emitting an invented learning rate would
    /// masquerade as a known-good value. Absence is a validation warning.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(flatten)]
    pub adapter: Option<AdapterConfig>,
}

impl TrainConfig {
    pub fn effective_batch(&self) -> u32 {
        self.batch_size * self.gradient_accumulation
    }
}

/// The default configuration: 4-bit nf4/float16 quantization, batch 2 with
/// gradient accumulation 8, gradient clipping 0.3, fp16, sequence length
/// 1024, 2 epochs evaluated every 175 steps under a cosine schedule with
/// the paged AdamW optimizer, EOS used as the padding token on the right.
pub fn paper_default_config() -> TrainConfig {
    TrainConfig {
        base_model_id: "meta-llama/Llama-2-7b-hf".into(),
        batch_size: 2,
        gradient_accumulation: 8,
        max_grad_norm: 0.3,
        precision: Precision::Fp16,
        max_seq_len: 1024,
        epochs: 2,
        eval_interval_steps: 175,
        lr_schedule: LrSchedule::Cosine,
        optimizer: "paged_adamw".into(),
        quantization: QuantizationConfig {
            spec: QuantizationSpec {
                quantized_bits: 4,
                full_bits: 32,
            },
            quant_type: "nf4".into(),
            compute_dtype: "float16".into(),
        },
        padding_token_policy: PaddingTokenPolicy::EosAsPad,
        padding_side: PaddingSide::Right,
        learning_rate: None,
        adapter: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl ConfigIssue {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("configuration has {} error(s): {}", .0.len(), format_issues(.0))]
    Invalid(Vec<ConfigIssue>),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every invariant; returns one issue per violation plus a warning
/// when the learning rate is absent.
pub fn validate_config(cfg: &TrainConfig) -> Vec<ConfigIssue> {
    let mut issues = Vec::new();
    if cfg.base_model_id.trim().is_empty() {
        issues.push(ConfigIssue::error("base_model_id", "must not be empty"));
    }
    if cfg.batch_size == 0 {
        issues.push(ConfigIssue::error("batch_size", "must be at least 1"));
    }
    if cfg.gradient_accumulation == 0 {
        issues.push(ConfigIssue::error(
            "gradient_accumulation",
            "must be at least 1",
        ));
    }
    if !cfg.max_grad_norm.is_finite() || cfg.max_grad_norm <= 0.0 {
        issues.push(ConfigIssue::error(
            "max_grad_norm",
            "must be finite and > 0",
        ));
    }
    if cfg.max_seq_len == 0 {
        issues.push(ConfigIssue::error("max_seq_len", "must be at least 1"));
    }
    if cfg.epochs == 0 {
        issues.push(ConfigIssue::error("epochs", "must be at least 1"));
    }
    if cfg.eval_interval_steps == 0 {
        issues.push(ConfigIssue::error(
            "eval_interval_steps",
            "must be at least 1",
        ));
    }
    if cfg.optimizer.trim().is_empty() {
        issues.push(ConfigIssue::error("optimizer", "must not be empty"));
    }
    if let Err(e) = cfg.quantization.spec.validate() {
        issues.push(ConfigIssue::error("quantized_bits", e.to_string()));
    }
    if cfg.quantization.quant_type.trim().is_empty() {
        issues.push(ConfigIssue::error("quant_type", "must not be empty"));
    }
    if cfg.quantization.compute_dtype.trim().is_empty() {
        issues.push(ConfigIssue::error("compute_dtype", "must not be empty"));
    }
    match cfg.learning_rate {
        None => issues.push(ConfigIssue::warning(
            "learning_rate",
            "not set; the external trainer must choose one",
        )),
        Some(lr) if !lr.is_finite() || lr <= 0.0 => {
            issues.push(ConfigIssue::error(
                "learning_rate",
                "must be finite and > 0",
            ));
        }
        Some(_) => {}
    }
    if let Some(adapter) = &cfg.adapter {
        if adapter.method.trim().is_empty() {
            issues.push(ConfigIssue::error("adapter_method", "must not be empty"));
        }
        if adapter.rank == 0 {
            issues.push(ConfigIssue::error("adapter_rank", "must be at least 1"));
        }
        if !adapter.alpha.is_finite() || adapter.alpha <= 0.0 {
            issues.push(ConfigIssue::error(
                "adapter_alpha",
                "must be finite and > 0",
            ));
        }
    }
    issues
}

/// Serializes to the flat sorted-key JSON document (optional fields omitted
/// when absent).
pub fn config_to_json(cfg: &TrainConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("value prints");
    text.push('\n');
    text
}

/// Writes the config after validation; any error-severity issue blocks
/// emission.
pub fn emit_config(cfg: &TrainConfig, path: &Path) -> Result<(), ConfigError> {
    let errors: Vec<ConfigIssue> = validate_config(cfg)
        .into_iter()
        .filter(|i| i.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    fs::write(path, config_to_json(cfg)).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a config emitted by [`emit_config`]; the round trip is identity.
pub fn load_config(path: &Path) -> Result<TrainConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|message| ConfigError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_config(text: &str) -> Result<TrainConfig, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

/// Flat field overrides applied on top of a base config (CLI flags).
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub base_model_id: Option<String>,
    pub batch_size: Option<u32>,
    pub gradient_accumulation: Option<u32>,
    pub max_grad_norm: Option<f64>,
    pub precision: Option<Precision>,
    pub max_seq_len: Option<u32>,
    pub epochs: Option<u32>,
    pub eval_interval_steps: Option<u32>,
    pub lr_schedule: Option<LrSchedule>,
    pub optimizer: Option<String>,
    pub quantized_bits: Option<u32>,
    pub full_bits: Option<u32>,
    pub quant_type: Option<String>,
    pub compute_dtype: Option<String>,
    pub padding_side: Option<PaddingSide>,
    pub learning_rate: Option<f64>,
    pub adapter: Option<AdapterConfig>,
}

impl ConfigOverrides {
    pub fn apply(self, mut cfg: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            base_model_id => cfg.base_model_id,
            batch_size => cfg.batch_size,
            gradient_accumulation => cfg.gradient_accumulation,
            max_grad_norm => cfg.max_grad_norm,
            precision => cfg.precision,
            max_seq_len => cfg.max_seq_len,
            epochs => cfg.epochs,
            eval_interval_steps => cfg.eval_interval_steps,
            lr_schedule => cfg.lr_schedule,
            optimizer => cfg.optimizer,
            quantized_bits => cfg.quantization.spec.quantized_bits,
            full_bits => cfg.quantization.spec.full_bits,
            quant_type => cfg.quantization.quant_type,
            compute_dtype => cfg.quantization.compute_dtype,
            padding_side => cfg.padding_side,
        }
        if self.learning_rate.is_some() {
            cfg.learning_rate = self.learning_rate;
        }
        if self.adapter.is_some() {
            cfg.adapter = self.adapter;
        }
        cfg
    }
}

/// Keys of the flat JSON document, for downstream consumers that want to
/// check for unexpected fields.
pub fn flat_keys(cfg: &TrainConfig) -> Vec<String> {
    let value = serde_json::to_value(cfg).expect("config serializes");
    match value {
        serde_json::Value::Object(map) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Convenience: the emitted document as a sorted map for report embedding.
pub fn config_flat_map(cfg: &TrainConfig) -> BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(cfg).expect("config serializes") {
        serde_json::Value::Object(map) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}
