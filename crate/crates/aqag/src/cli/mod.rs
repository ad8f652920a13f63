//! Command-line orchestration: preprocess, stats, prompt building,
//! generation, parsing, evaluation, perplexity, and train-config emission.
//!
//! Exit-code contract: 0 success (possibly with recorded per-item
//! failures), 1 environmental failure (I/O, unreachable endpoint),
//! 2 usage or validation error.

mod evaluate;
mod generate;
mod preprocess;
mod prompt_cmd;
mod settings;
mod train_config_cmd;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, CorpusError, CorpusFormat, RaceRecord};
use crate::metrics::MetricsError;
use crate::prompting::PromptStyle;

pub use settings::{EndpointArgs, GenerationArgs};

#[derive(Debug, Parser)]
#[command(
    name = "aqag",
    version,
    about = "Question and answer generation pipeline: preprocess a corpus, build prompts, generate and parse MCQs, and evaluate them"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a corpus: expand contractions, drop incomplete rows, derive
    /// the correct-answer column, and split by question type
    Preprocess(preprocess::PreprocessArgs),
    /// Print corpus statistics (word counts, option lengths, correct-label
    /// distribution) after preprocessing
    Stats(preprocess::StatsArgs),
    /// Prompt utilities
    Prompt {
        #[command(subcommand)]
        command: prompt_cmd::PromptCommand,
    },
    /// Generate questions for every article in a corpus via the inference
    /// service, parse them, and write item files plus a run manifest
    Generate(generate::GenerateArgs),
    /// Parse a generated text block into structured items
    Parse(ParseArgs),
    /// Evaluate generated items: relevance, option similarity, and
    /// correct-option distribution
    Evaluate(evaluate::EvaluateArgs),
    /// Sliding-window perplexity of a text file against a scoring-capable
    /// endpoint
    Ppl(PplArgs),
    /// Fine-tuning configuration files
    TrainConfig {
        #[command(subcommand)]
        command: train_config_cmd::TrainConfigCommand,
    },
}

/// Errors mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: bad arguments or invalid/malformed input data.
    Usage(String),
    /// Exit 1: environmental failure (I/O, network).
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Environment(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Environment(m) => m,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Environment(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { .. } => CliError::Environment(e.to_string()),
            MetricsError::CapabilityMissing { .. }
            | MetricsError::Scoring(_)
            | MetricsError::Embedding(_) => CliError::Environment(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Environment(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

/// Parses arguments and runs; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Preprocess(args) => preprocess::cmd_preprocess(args),
        Command::Stats(args) => preprocess::cmd_stats(args),
        Command::Prompt { command } => prompt_cmd::cmd_prompt(command),
        Command::Generate(args) => generate::cmd_generate(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Evaluate(args) => evaluate::cmd_evaluate(args),
        Command::Ppl(args) => cmd_ppl(args),
        Command::TrainConfig { command } => train_config_cmd::cmd_train_config(command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => CorpusFormat::Csv,
            FormatArg::Json => CorpusFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StyleArg {
    /// Fill-in-the-blank questions
    Fib,
    /// Open-ended multiple choice questions
    Open,
}

impl From<StyleArg> for PromptStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Fib => PromptStyle::FillInBlank,
            StyleArg::Open => PromptStyle::OpenEnded,
        }
    }
}

/// Full preprocessing pipeline shared by the commands: load, expand
/// contractions in articles and questions, filter, derive the correct
/// column. Returns the kept records and the dropped count.
pub(crate) fn load_preprocessed(
    path: &std::path::Path,
    format: CorpusFormat,
) -> Result<(Vec<RaceRecord>, usize), CliError> {
    let records = corpus::load_corpus(path, format)?;
    let expanded: Vec<RaceRecord> = records
        .into_iter()
        .map(|mut r| {
            r.article = corpus::expand_contractions(&r.article);
            r.question = corpus::expand_contractions(&r.question);
            r
        })
        .collect();
    let (kept, dropped) = corpus::filter_complete(expanded);
    let derived = kept
        .into_iter()
        .map(corpus::derive_correct_text)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((derived, dropped))
}

pub(crate) fn write_json_value(path: &std::path::Path, value: &serde_json::Value) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("value prints");
    text.push('\n');
    crate::manifest::write_atomic_text(path, &text)?;
    Ok(())
}

pub(crate) fn to_sorted_value<T: serde::Serialize>(data: &T) -> serde_json::Value {
    serde_json::to_value(data).expect("data serializes")
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Text file holding a generated block
    #[arg(long)]
    input: PathBuf,
    /// Also run the validation gate against this expected question count
    #[arg(long)]
    expected_count: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_parse(args: ParseArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.input)?;
    let mut report = crate::mcq::parse_mcq_block(&text);
    if let Some(expected) = args.expected_count {
        let extra = crate::mcq::validate_items(&report, expected);
        report.issues.extend(extra);
    }
    let value = to_sorted_value(&report);
    match args.out {
        Some(path) => write_json_value(&path, &value)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("report prints")
        ),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PplArgs {
    /// Text file to score
    #[arg(long)]
    input: PathBuf,
    /// Window size in tokens
    #[arg(long, default_value_t = 1024)]
    window: usize,
    /// Window step in tokens (at most the window size)
    #[arg(long, default_value_t = 512)]
    stride: usize,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

fn cmd_ppl(args: PplArgs) -> CliResult {
    let params = crate::metrics::PerplexityParams {
        window: args.window,
        stride: args.stride,
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let client = args.endpoint.client()?;
    let text = std::fs::read_to_string(&args.input)?;
    let ppl = crate::metrics::corpus_perplexity(&client, &text, &params)?;
    println!("{ppl}");
    Ok(())
}
