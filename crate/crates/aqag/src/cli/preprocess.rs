//! `preprocess` and `stats` commands.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use super::{load_preprocessed, write_json_value, CliError, CliResult, FormatArg};
use crate::corpus::{self, CorpusFormat};

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus file to clean
    #[arg(long)]
    input: PathBuf,
    /// Input layout
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Directory for the two split CSVs and the drop report
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct DropReport {
    input_rows: usize,
    kept_rows: usize,
    dropped_rows: usize,
    interrogative_rows: usize,
    fill_in_blank_rows: usize,
}

pub fn cmd_preprocess(args: PreprocessArgs) -> CliResult {
    let format = CorpusFormat::from(args.format);
    let (records, dropped) = load_preprocessed(&args.input, format)?;
    let kept = records.len();
    let (interrogative, fill_in_blank) = corpus::split_by_question_type(records);

    std::fs::create_dir_all(&args.out_dir)?;
    corpus::write_csv(&args.out_dir.join("interrogative.csv"), &interrogative)?;
    corpus::write_csv(&args.out_dir.join("fill_in_blank.csv"), &fill_in_blank)?;

    let report = DropReport {
        input_rows: kept + dropped,
        kept_rows: kept,
        dropped_rows: dropped,
        interrogative_rows: interrogative.len(),
        fill_in_blank_rows: fill_in_blank.len(),
    };
    write_json_value(
        &args.out_dir.join("drop_report.json"),
        &super::to_sorted_value(&report),
    )?;
    println!(
        "kept {kept} of {} rows ({} interrogative, {} fill-in-blank), dropped {dropped}",
        kept + dropped,
        interrogative.len(),
        fill_in_blank.len(),
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus file to analyze (preprocessing is applied first)
    #[arg(long)]
    input: PathBuf,
    /// Input layout
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn cmd_stats(args: StatsArgs) -> CliResult {
    let format = CorpusFormat::from(args.format);
    let (records, _) = load_preprocessed(&args.input, format)?;
    let report = corpus::corpus_stats(&records).map_err(|e| CliError::Usage(e.to_string()))?;
    let value = report.to_flat_json();
    match args.out {
        Some(path) => write_json_value(&path, &value)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("report prints")
        ),
    }
    Ok(())
}
