//! `generate` command: per-article prompt building, generation, parsing
//! and validation, with bounded-concurrency requests and per-article
//! failure recording.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::settings::load_file_settings;
use super::{
    load_preprocessed, write_json_value, CliError, CliResult, EndpointArgs, FormatArg,
    GenerationArgs, StyleArg,
};
use crate::corpus::RaceRecord;
use crate::inference::{FinishReason, InferenceClient};
use crate::manifest::RunManifest;
use crate::mcq::{self, McqItem, ParseIssue};
use crate::prompting::{self, FewShotExample, PromptStyle};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Corpus file providing articles and few-shot examples
    #[arg(long)]
    corpus: PathBuf,
    /// Corpus layout
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Question style to request
    #[arg(long, value_enum)]
    style: StyleArg,
    /// Questions to request per article
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    count: u32,
    /// Leading corpus records used as few-shot examples (their articles
    /// are not generation targets)
    #[arg(long, default_value_t = 2)]
    shots: usize,
    /// Cap on the number of articles to generate for
    #[arg(long)]
    limit: Option<usize>,
    /// Replace the shipped system prompt with this file's text
    #[arg(long)]
    system_prompt_file: Option<PathBuf>,
    /// Simultaneous in-flight requests
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    concurrency: u32,
    /// Directory for item files, failures.json and manifest.json
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[command(flatten)]
    generation: GenerationArgs,
}

/// One article's parsed output, written as `items_<id>.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ItemsFile {
    pub article_id: String,
    pub style: PromptStyle,
    pub finish_reason: FinishReason,
    pub items: Vec<McqItem>,
    pub issues: Vec<ParseIssue>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordedFailure {
    pub article_id: String,
    pub error: String,
}

struct Target {
    id: String,
    article: String,
}

/// Unique generation targets: the first record of each article id, skipping
/// ids consumed by the few-shot examples.
fn collect_targets(
    records: &[RaceRecord],
    shot_ids: &[String],
    limit: Option<usize>,
) -> Vec<Target> {
    let mut seen: Vec<&str> = shot_ids.iter().map(String::as_str).collect();
    let mut targets = Vec::new();
    for record in records {
        if seen.contains(&record.id.as_str()) {
            continue;
        }
        seen.push(&record.id);
        targets.push(Target {
            id: record.id.clone(),
            article: record.article.clone(),
        });
        if limit.is_some_and(|cap| targets.len() >= cap) {
            break;
        }
    }
    targets
}

fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

pub fn cmd_generate(args: GenerateArgs) -> CliResult {
    let style = PromptStyle::from(args.style);
    let question_count = args.count as usize;
    let file_settings = load_file_settings(args.endpoint.config.as_ref())?;
    let params = args.generation.resolve(&file_settings)?;
    let client = args
        .endpoint
        .client_with_limit(Some(args.concurrency as usize))?;

    let (records, _) = load_preprocessed(&args.corpus, args.format.into())?;
    let shot_records = super::prompt_cmd::select_shot_records(&records, style, args.shots);
    let shots: Vec<FewShotExample> = shot_records
        .iter()
        .map(|r| FewShotExample::from_record(r).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    let shot_ids: Vec<String> = shot_records.iter().map(|r| r.id.clone()).collect();
    let targets = collect_targets(&records, &shot_ids, args.limit);

    let system_override =
        super::prompt_cmd::read_system_override(args.system_prompt_file.as_ref())?;
    let system_text = system_override
        .clone()
        .unwrap_or_else(|| prompting::default_system_prompt(style).to_string());

    std::fs::create_dir_all(&args.out_dir)?;

    let results: Vec<Option<Result<ItemsFile, String>>> = run_bounded(
        &client,
        &targets,
        &shots,
        style,
        question_count,
        &params,
        system_override.as_deref(),
        args.concurrency as usize,
    );

    let mut failures = Vec::new();
    let mut succeeded = 0usize;
    for (target, result) in targets.iter().zip(results) {
        match result.expect("every target produces a result") {
            Ok(items_file) => {
                let path = args
                    .out_dir
                    .join(format!("items_{}.json", safe_file_stem(&target.id)));
                write_json_value(&path, &super::to_sorted_value(&items_file))?;
                succeeded += 1;
            }
            Err(error) => failures.push(RecordedFailure {
                article_id: target.id.clone(),
                error,
            }),
        }
    }

    write_json_value(
        &args.out_dir.join("failures.json"),
        &super::to_sorted_value(&failures),
    )?;

    let mut manifest = RunManifest::new();
    manifest.endpoint = Some(client.endpoint().to_string());
    manifest.generation_params = Some(params);
    manifest.record_input("corpus", &args.corpus)?;
    manifest.record_prompt("system", &system_text);
    manifest.write_atomic(&args.out_dir.join("manifest.json"))?;

    println!(
        "generated items for {succeeded} of {} articles, {} failures",
        targets.len(),
        failures.len(),
    );
    // Partial success keeps exit 0; a run where every article failed means
    // the endpoint was effectively unusable.
    if succeeded == 0 && !failures.is_empty() {
        return Err(CliError::Environment(format!(
            "all {} articles failed; first error: {}",
            failures.len(),
            failures[0].error
        )));
    }
    Ok(())
}

/// Generates for every target with at most the client's in-flight limit
/// outstanding. Results are collected by target index so output files are
/// written in deterministic order.
#[allow(clippy::too_many_arguments)]
fn run_bounded(
    client: &InferenceClient,
    targets: &[Target],
    shots: &[FewShotExample],
    style: PromptStyle,
    question_count: usize,
    params: &crate::inference::GenerationParams,
    system_override: Option<&str>,
    concurrency: usize,
) -> Vec<Option<Result<ItemsFile, String>>> {
    let results: Mutex<Vec<Option<Result<ItemsFile, String>>>> =
        Mutex::new((0..targets.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = targets.len().clamp(1, concurrency.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= targets.len() {
                    break;
                }
                let target = &targets[index];
                let outcome = generate_one(
                    client,
                    target,
                    shots,
                    style,
                    question_count,
                    params,
                    system_override,
                );
                results.lock().expect("results lock")[index] = Some(outcome);
            });
        }
    });
    results.into_inner().expect("results lock")
}

fn generate_one(
    client: &InferenceClient,
    target: &Target,
    shots: &[FewShotExample],
    style: PromptStyle,
    question_count: usize,
    params: &crate::inference::GenerationParams,
    system_override: Option<&str>,
) -> Result<ItemsFile, String> {
    let mut prompt =
        prompting::build_generation_prompt(&target.article, style, shots, question_count)
            .map_err(|e| e.to_string())?;
    if let Some(system) = system_override {
        prompt = prompt.with_system_text(system);
    }
    let rendered = prompting::render_llama_chat(&prompt);
    let response = client
        .generate(&rendered, params)
        .map_err(|e| e.to_string())?;
    let mut report = mcq::parse_mcq_block(&response.text);
    let extra = mcq::validate_items(&report, question_count);
    report.issues.extend(extra);
    Ok(ItemsFile {
        article_id: target.id.clone(),
        style,
        finish_reason: response.finish_reason,
        items: report.items,
        issues: report.issues,
    })
}
