//! `evaluate` command: TF-IDF relevance per question, optional option
//! similarity against an embedder, and the correct-option distribution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::generate::ItemsFile;
use super::{load_preprocessed, write_json_value, CliError, CliResult, EndpointArgs, FormatArg};
use crate::corpus::AnswerLabel;
use crate::manifest::{hash_file, RunManifest};
use crate::metrics::{self, Embedder, WordVectorTable};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// An `items_*.json` file or a directory of them (generate output)
    #[arg(long)]
    items: PathBuf,
    /// Corpus file the articles come from
    #[arg(long)]
    corpus: PathBuf,
    /// Corpus layout
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Also score each option against the correct answer
    #[arg(long)]
    options_similarity: bool,
    /// Word-vector text file backing option similarity
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Write the report here instead of stdout (a manifest is written
    /// alongside)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

#[derive(Serialize)]
struct QuestionReport {
    article_id: String,
    item_index: usize,
    stem: String,
    complete: bool,
    relevance: Option<f64>,
    option_similarity: Option<BTreeMap<AnswerLabel, f64>>,
    similarity_issues: Vec<String>,
}

#[derive(Serialize)]
struct EvaluationReport {
    question_count: usize,
    questions: Vec<QuestionReport>,
    distribution: Option<metrics::DistributionReport>,
    metadata: BTreeMap<String, String>,
}

fn load_items_files(path: &Path) -> Result<Vec<ItemsFile>, CliError> {
    let mut paths = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with("items_") && name.ends_with(".json") {
                paths.push(entry.path());
            }
        }
        paths.sort();
    } else {
        paths.push(path.to_path_buf());
    }
    let mut files = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let parsed: ItemsFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad items file {}: {e}", p.display())))?;
        files.push(parsed);
    }
    Ok(files)
}

pub fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let embedder: Option<Box<dyn Embedder>> = if args.options_similarity {
        match (&args.embeddings, args.endpoint.is_configured()?) {
            (Some(path), _) => Some(Box::new(
                WordVectorTable::load(path).map_err(CliError::from)?,
            )),
            (None, true) => Some(Box::new(args.endpoint.client()?)),
            (None, false) => {
                return Err(CliError::Usage(
                    "--options-similarity needs --embeddings <file> or an endpoint".into(),
                ))
            }
        }
    } else {
        None
    };

    let items_files = load_items_files(&args.items)?;
    let (records, _) = load_preprocessed(&args.corpus, args.format.into())?;
    let mut articles: BTreeMap<&str, &str> = BTreeMap::new();
    for record in &records {
        articles.entry(&record.id).or_insert(&record.article);
    }

    // Background model for relevance: all distinct articles plus every
    // evaluated stem, so idf reflects the texts actually scored.
    let mut background_docs: Vec<String> = articles.values().map(|a| a.to_string()).collect();
    for file in &items_files {
        for item in &file.items {
            if !item.stem.is_empty() {
                background_docs.push(item.stem.clone());
            }
        }
    }

    let mut questions = Vec::new();
    let mut labels = Vec::new();
    if !background_docs.is_empty() {
        let background = metrics::tfidf_fit(&background_docs).map_err(CliError::from)?;
        for file in &items_files {
            let article = articles.get(file.article_id.as_str()).copied();
            for item in &file.items {
                let relevance = match (article, item.stem.is_empty()) {
                    (Some(article), false) => {
                        Some(metrics::relevance_score(article, &item.stem, &background))
                    }
                    _ => None,
                };
                let (option_similarity, similarity_issues) = match (&embedder, item.complete) {
                    (Some(embedder), true) => {
                        let scored = metrics::option_similarity(item, embedder.as_ref())
                            .map_err(CliError::from)?;
                        (Some(scored.scores), scored.issues)
                    }
                    (Some(_), false) => (
                        None,
                        vec!["incomplete item: option similarity skipped".into()],
                    ),
                    (None, _) => (None, Vec::new()),
                };
                if let Some(label) = item.answer_label {
                    if item.complete {
                        labels.push(label);
                    }
                }
                questions.push(QuestionReport {
                    article_id: file.article_id.clone(),
                    item_index: item.index,
                    stem: item.stem.clone(),
                    complete: item.complete,
                    relevance,
                    option_similarity,
                    similarity_issues,
                });
            }
        }
    }

    let distribution = if labels.is_empty() {
        None
    } else {
        Some(metrics::distribution_report(&labels).map_err(CliError::from)?)
    };

    let mut metadata = BTreeMap::new();
    metadata.insert("corpus_sha256".to_string(), hash_file(&args.corpus)?);
    if args.items.is_file() {
        metadata.insert("items_sha256".to_string(), hash_file(&args.items)?);
    }
    if let Some(path) = &args.embeddings {
        metadata.insert("embeddings_sha256".to_string(), hash_file(path)?);
    }
    if let Some(endpoint) = &args.endpoint.endpoint {
        metadata.insert("endpoint".to_string(), endpoint.clone());
    }

    let report = EvaluationReport {
        question_count: questions.len(),
        questions,
        distribution,
        metadata,
    };
    let value = super::to_sorted_value(&report);
    match &args.out {
        Some(path) => {
            write_json_value(path, &value)?;
            let mut manifest = RunManifest::new();
            manifest.endpoint = args.endpoint.endpoint.clone();
            manifest.record_input("corpus", &args.corpus)?;
            if args.items.is_file() {
                manifest.record_input("items", &args.items)?;
            }
            if let Some(embeddings) = &args.embeddings {
                manifest.record_input("embeddings", embeddings)?;
            }
            let manifest_path = manifest_path_for(path);
            manifest.write_atomic(&manifest_path)?;
        }
        None => println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("report prints")
        ),
    }
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}
