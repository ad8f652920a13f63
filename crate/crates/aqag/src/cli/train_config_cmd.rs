//! `train-config emit` command.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use super::{CliError, CliResult};
use crate::train_config::{
    self, AdapterConfig, ConfigOverrides, LrSchedule, PaddingSide, Precision, Severity,
};

#[derive(Debug, Subcommand)]
pub enum TrainConfigCommand {
    /// Validate and write the fine-tuning configuration file
    Emit(EmitArgs),
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    /// Output path for the JSON config
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    base_model_id: Option<String>,
    #[arg(long)]
    batch_size: Option<u32>,
    #[arg(long)]
    gradient_accumulation: Option<u32>,
    #[arg(long)]
    max_grad_norm: Option<f64>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    #[arg(long)]
    max_seq_len: Option<u32>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    eval_interval_steps: Option<u32>,
    #[arg(long, value_enum)]
    lr_schedule: Option<LrScheduleArg>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    quantized_bits: Option<u32>,
    #[arg(long)]
    full_bits: Option<u32>,
    #[arg(long)]
    quant_type: Option<String>,
    #[arg(long)]
    compute_dtype: Option<String>,
    #[arg(long, value_enum)]
    padding_side: Option<PaddingSideArg>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Adapter method tag; requires --adapter-rank and --adapter-alpha
    #[arg(long, requires = "adapter_rank", requires = "adapter_alpha")]
    adapter_method: Option<String>,
    #[arg(long, requires = "adapter_method")]
    adapter_rank: Option<u32>,
    #[arg(long, requires = "adapter_method")]
    adapter_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PrecisionArg {
    Fp16,
    Fp32,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum LrScheduleArg {
    Cosine,
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PaddingSideArg {
    Right,
    Left,
}

pub fn cmd_train_config(command: TrainConfigCommand) -> CliResult {
    let TrainConfigCommand::Emit(args) = command;
    let adapter = match (args.adapter_method, args.adapter_rank, args.adapter_alpha) {
        (Some(method), Some(rank), Some(alpha)) => Some(AdapterConfig {
            method,
            rank,
            alpha,
        }),
        _ => None,
    };
    let overrides = ConfigOverrides {
        base_model_id: args.base_model_id,
        batch_size: args.batch_size,
        gradient_accumulation: args.gradient_accumulation,
        max_grad_norm: args.max_grad_norm,
        precision: args.precision.map(|p| match p {
            PrecisionArg::Fp16 => Precision::Fp16,
            PrecisionArg::Fp32 => Precision::Fp32,
        }),
        max_seq_len: args.max_seq_len,
        epochs: args.epochs,
        eval_interval_steps: args.eval_interval_steps,
        lr_schedule: args.lr_schedule.map(|s| match s {
            LrScheduleArg::Cosine => LrSchedule::Cosine,
            LrScheduleArg::Constant => LrSchedule::Constant,
            LrScheduleArg::Linear => LrSchedule::Linear,
        }),
        optimizer: args.optimizer,
        quantized_bits: args.quantized_bits,
        full_bits: args.full_bits,
        quant_type: args.quant_type,
        compute_dtype: args.compute_dtype,
        padding_side: args.padding_side.map(|s| match s {
            PaddingSideArg::Right => PaddingSide::Right,
            PaddingSideArg::Left => PaddingSide::Left,
        }),
        learning_rate: args.learning_rate,
        adapter,
    };
    let cfg = overrides.apply(train_config::paper_default_config());

    for issue in train_config::validate_config(&cfg) {
        if issue.severity == Severity::Warning {
            eprintln!("warning: {}: {}", issue.field, issue.message);
        }
    }
    train_config::emit_config(&cfg, &args.out).map_err(|e| match e {
        train_config::ConfigError::Io { .. } => CliError::Environment(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    println!("wrote {}", args.out.display());
    Ok(())
}
