//! `prompt build` command.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use super::{load_preprocessed, CliError, CliResult, FormatArg, StyleArg};
use crate::corpus::CorpusFormat;
use crate::prompting::{self, FewShotExample, PromptStyle};

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    /// Build the generation prompt for one article and print it in the
    /// chat wire format
    Build(BuildArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// File holding the target article text
    #[arg(long)]
    article_file: PathBuf,
    /// Question style
    #[arg(long, value_enum)]
    style: StyleArg,
    /// Questions to request
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    count: u32,
    /// Corpus file supplying few-shot examples
    #[arg(long)]
    shots: Option<PathBuf>,
    /// Layout of the few-shot corpus file
    #[arg(long, value_enum, default_value = "csv")]
    shots_format: FormatArg,
    /// How many few-shot examples to embed
    #[arg(long, default_value_t = 2)]
    shots_count: usize,
    /// Replace the shipped system prompt with this file's text
    #[arg(long)]
    system_prompt_file: Option<PathBuf>,
    /// Print the structured prompt as JSON instead of the rendered chat text
    #[arg(long)]
    json: bool,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// The first `count` corpus records whose question type matches the
/// requested style, as few-shot examples (sample questions shown to the
/// model look like the questions being asked for).
pub(crate) fn select_shot_records(
    records: &[crate::corpus::RaceRecord],
    style: PromptStyle,
    count: usize,
) -> Vec<&crate::corpus::RaceRecord> {
    let wanted = match style {
        PromptStyle::FillInBlank => crate::corpus::QuestionType::FillInBlank,
        PromptStyle::OpenEnded => crate::corpus::QuestionType::Interrogative,
    };
    records
        .iter()
        .filter(|r| crate::corpus::detect_question_type(&r.question) == wanted)
        .take(count)
        .collect()
}

pub(crate) fn load_shots(
    path: &Path,
    format: CorpusFormat,
    style: PromptStyle,
    count: usize,
) -> Result<Vec<FewShotExample>, CliError> {
    let (records, _) = load_preprocessed(path, format)?;
    select_shot_records(&records, style, count)
        .into_iter()
        .map(|r| FewShotExample::from_record(r).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

pub(crate) fn read_system_override(path: Option<&PathBuf>) -> Result<Option<String>, CliError> {
    match path {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Environment(format!("cannot read system prompt {}: {e}", path.display()))
            })?;
            Ok(Some(text.trim_end().to_string()))
        }
    }
}

pub fn cmd_prompt(command: PromptCommand) -> CliResult {
    let PromptCommand::Build(args) = command;
    let article = std::fs::read_to_string(&args.article_file)?;
    let style = PromptStyle::from(args.style);
    let shots = match &args.shots {
        Some(path) => load_shots(path, args.shots_format.into(), style, args.shots_count)?,
        None => Vec::new(),
    };
    let mut prompt =
        prompting::build_generation_prompt(article.trim_end(), style, &shots, args.count as usize)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(system) = read_system_override(args.system_prompt_file.as_ref())? {
        prompt = prompt.with_system_text(system);
    }
    let output = if args.json {
        let mut text =
            serde_json::to_string_pretty(&super::to_sorted_value(&prompt)).expect("prompt prints");
        text.push('\n');
        text
    } else {
        let mut text = prompting::render_llama_chat(&prompt);
        text.push('\n');
        text
    };
    match args.out {
        Some(path) => crate::manifest::write_atomic_text(&path, &output)?,
        None => print!("{output}"),
    }
    Ok(())
}
