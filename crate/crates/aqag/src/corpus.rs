//! Corpus ingestion and preprocessing for RACE-style reading-comprehension
//! data: CSV/JSON loading, contraction expansion, completeness filtering,
//! derived-column computation, question-type splitting, and EDA statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Answer option label of a four-option multiple-choice question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnswerLabel {
    A,
    B,
    C,
    D,
}

impl AnswerLabel {
    pub const ALL: [AnswerLabel; 4] = [
        AnswerLabel::A,
        AnswerLabel::B,
        AnswerLabel::C,
        AnswerLabel::D,
    ];

    /// Zero-based index into an option list.
    pub fn index(self) -> usize {
        match self {
            AnswerLabel::A => 0,
            AnswerLabel::B => 1,
            AnswerLabel::C => 2,
            AnswerLabel::D => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Parses a single label letter, accepting lowercase.
    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(AnswerLabel::A),
            'B' => Some(AnswerLabel::B),
            'C' => Some(AnswerLabel::C),
            'D' => Some(AnswerLabel::D),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            AnswerLabel::A => 'A',
            AnswerLabel::B => 'B',
            AnswerLabel::C => 'C',
            AnswerLabel::D => 'D',
        }
    }
}

impl fmt::Display for AnswerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl std::str::FromStr for AnswerLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => AnswerLabel::from_char(c).ok_or(()),
            _ => Err(()),
        }
    }
}

/// Whether a question stem is interrogative or contains a blank placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionType {
    Interrogative,
    FillInBlank,
}

/// One article/question/options/answer row of the corpus.
///
/// `correct_text` and `question_type` are derived columns: they start out
/// unset after [`load_corpus`] and are filled in by [`derive_correct_text`]
/// and [`split_by_question_type`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceRecord {
    pub id: String,
    pub article: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_label: Option<AnswerLabel>,
    pub correct_text: Option<String>,
    pub question_type: Option<QuestionType>,
}

impl RaceRecord {
    /// True when the record has a non-null article, question and answer and
    /// exactly four non-empty options. Whitespace-only text counts as null.
    pub fn is_complete(&self) -> bool {
        !is_null(&self.article)
            && !is_null(&self.question)
            && self.answer_label.is_some()
            && self.options.len() == 4
            && self.options.iter().all(|o| !is_null(o))
    }
}

fn is_null(text: &str) -> bool {
    text.trim().is_empty()
}

/// Aggregate statistics over a preprocessed corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaReport {
    pub record_count: usize,
    pub avg_article_words: f64,
    pub avg_question_words: f64,
    /// Average option length in characters, per label (indexed by `AnswerLabel::index`).
    pub avg_option_chars: [f64; 4],
    pub avg_option_chars_overall: f64,
    /// Fraction of records whose correct answer is each label. Sums to 1.
    pub correct_label_proportions: BTreeMap<AnswerLabel, f64>,
}

impl EdaReport {
    /// Flat key/value JSON form with sorted keys.
    pub fn to_flat_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("record_count".into(), self.record_count.into());
        map.insert("avg_article_words".into(), json_f64(self.avg_article_words));
        map.insert(
            "avg_question_words".into(),
            json_f64(self.avg_question_words),
        );
        for label in AnswerLabel::ALL {
            let key = format!("avg_option_chars_{}", label.as_char().to_ascii_lowercase());
            map.insert(key, json_f64(self.avg_option_chars[label.index()]));
            let key = format!("proportion_{}", label.as_char().to_ascii_lowercase());
            map.insert(key, json_f64(self.correct_label_proportions[&label]));
        }
        map.insert(
            "avg_option_chars_overall".into(),
            json_f64(self.avg_option_chars_overall),
        );
        serde_json::Value::Object(map)
    }
}

fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Source file layout for [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("unknown answer label {label:?} in row {row}")]
    UnknownAnswerLabel { row: usize, label: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("record {id:?} is missing a derived or required field: {what}")]
    IncompleteRecord { id: String, what: String },
}

const CSV_HEADER: [&str; 8] = [
    "id", "article", "question", "optionA", "optionB", "optionC", "optionD", "answer",
];

/// Loads a corpus from a CSV or JSON file.
///
/// CSV layout: header `id,article,question,optionA,optionB,optionC,optionD,answer`.
/// JSON layout: an array of passage objects `{id, article, questions, options,
/// answers}` flattened to one record per question index.
///
/// Derived fields are left unset; records are not yet validated for
/// completeness (see [`filter_complete`]).
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RaceRecord>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Csv => load_csv(BufReader::new(file)),
        CorpusFormat::Json => load_json(BufReader::new(file)),
    }
}

fn load_csv<R: std::io::Read>(reader: R) -> Result<Vec<RaceRecord>, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    // Column lookup is by header name so extra columns (e.g. a derived
    // `correct` column written by preprocess) are tolerated on re-load.
    let mut column_index = [0usize; 8];
    for (slot, name) in column_index.iter_mut().zip(CSV_HEADER) {
        *slot =
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CorpusError::MalformedRow {
                    row: 1,
                    message: format!("missing column {name:?} in header"),
                })?;
    }

    let mut records = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        // Row numbering counts the header as row 1.
        let row_number = i + 2;
        let row = row.map_err(|e| CorpusError::MalformedRow {
            row: row_number,
            message: e.to_string(),
        })?;
        let field = |slot: usize| -> Result<&str, CorpusError> {
            row.get(column_index[slot])
                .ok_or(CorpusError::MalformedRow {
                    row: row_number,
                    message: format!("missing field {:?}", CSV_HEADER[slot]),
                })
        };
        let answer = parse_answer(field(7)?, row_number)?;
        records.push(RaceRecord {
            id: field(0)?.to_string(),
            article: field(1)?.to_string(),
            question: field(2)?.to_string(),
            options: vec![
                field(3)?.to_string(),
                field(4)?.to_string(),
                field(5)?.to_string(),
                field(6)?.to_string(),
            ],
            answer_label: answer,
            correct_text: None,
            question_type: None,
        });
    }
    Ok(records)
}

#[derive(Deserialize)]
struct JsonPassage {
    id: String,
    article: Option<String>,
    questions: Vec<Option<String>>,
    options: Vec<Vec<String>>,
    answers: Vec<Option<String>>,
}

fn load_json<R: std::io::Read>(reader: R) -> Result<Vec<RaceRecord>, CorpusError> {
    let passages: Vec<JsonPassage> =
        serde_json::from_reader(reader).map_err(|e| CorpusError::MalformedRow {
            row: e.line(),
            message: e.to_string(),
        })?;
    let mut records = Vec::new();
    for (i, passage) in passages.iter().enumerate() {
        let row_number = i + 1;
        let n = passage.questions.len();
        if passage.options.len() != n || passage.answers.len() != n {
            return Err(CorpusError::MalformedRow {
                row: row_number,
                message: format!(
                    "questions/options/answers lengths differ: {}/{}/{}",
                    n,
                    passage.options.len(),
                    passage.answers.len()
                ),
            });
        }
        for q in 0..n {
            let answer = match &passage.answers[q] {
                Some(text) => parse_answer(text, row_number)?,
                None => None,
            };
            records.push(RaceRecord {
                id: passage.id.clone(),
                article: passage.article.clone().unwrap_or_default(),
                question: passage.questions[q].clone().unwrap_or_default(),
                options: passage.options[q].clone(),
                answer_label: answer,
                correct_text: None,
                question_type: None,
            });
        }
    }
    Ok(records)
}

/// Empty answer cells decode as `None` (eliminated later by the filter);
/// any other text must be a single letter A-D.
fn parse_answer(text: &str, row: usize) -> Result<Option<AnswerLabel>, CorpusError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse::<AnswerLabel>()
        .map(Some)
        .map_err(|()| CorpusError::UnknownAnswerLabel {
            row,
            label: trimmed.to_string(),
        })
}

/// Writes records in the CSV layout accepted by [`load_corpus`], plus a
/// trailing derived `correct` column when present.
pub fn write_csv(path: &Path, records: &[RaceRecord]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let io_err = |e: csv::Error| CorpusError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.push("correct");
    writer.write_record(&header).map_err(io_err)?;
    for record in records {
        let answer = record
            .answer_label
            .map(|l| l.to_string())
            .unwrap_or_default();
        let correct = record.correct_text.clone().unwrap_or_default();
        let empty = String::new();
        let option = |i: usize| record.options.get(i).unwrap_or(&empty).as_str();
        writer
            .write_record([
                record.id.as_str(),
                record.article.as_str(),
                record.question.as_str(),
                option(0),
                option(1),
                option(2),
                option(3),
                answer.as_str(),
                correct.as_str(),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

static CONTRACTIONS: OnceLock<Vec<(String, String)>> = OnceLock::new();

/// The shipped contraction table as (key, expansion) pairs; keys lowercase.
pub fn contraction_table() -> &'static [(String, String)] {
    CONTRACTIONS.get_or_init(|| {
        include_str!("../data/contractions.tsv")
            .lines()
            .filter(|line| !line.trim().is_empty())
            .map(|line| {
                let (key, expansion) = line
                    .split_once('\t')
                    .expect("contraction table line must be key<TAB>expansion");
                (key.to_ascii_lowercase(), expansion.to_string())
            })
            .collect()
    })
}

fn lookup_contraction(token: &str) -> Option<&'static str> {
    let normalized = token.replace('\u{2019}', "'").to_lowercase();
    contraction_table()
        .iter()
        .find(|(key, _)| *key == normalized)
        .map(|(_, expansion)| expansion.as_str())
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Replaces every contraction-table key, matched case-insensitively on word
/// boundaries, with its expansion. The expansion's first letter mirrors the
/// case of the matched token's first letter. Text without contractions
/// passes through unchanged, so the function is idempotent.
pub fn expand_contractions(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if !is_word_char(c) {
            out.push(c);
            chars.next();
            continue;
        }
        let mut end = start;
        while let Some(&(i, c)) = chars.peek() {
            if is_word_char(c) {
                end = i + c.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        let token = &text[start..end];
        match expand_token(token) {
            Some(expanded) => out.push_str(&expanded),
            None => out.push_str(token),
        }
    }
    out
}

fn expand_token(token: &str) -> Option<String> {
    if let Some(expansion) = lookup_contraction(token) {
        return Some(mirror_case(token, expansion));
    }
    // Tokens picked up with surrounding quote characters ('cause aside,
    // keys never start or end with an apostrophe): retry on the core.
    let trimmed = token.trim_end_matches(['\'', '\u{2019}']);
    let (prefix, core) = match trimmed.strip_prefix(['\'', '\u{2019}']) {
        Some(stripped) if lookup_contraction(trimmed).is_none() => {
            (&trimmed[..trimmed.len() - stripped.len()], stripped)
        }
        _ => ("", trimmed),
    };
    if core.len() == token.len() {
        return None;
    }
    let expansion = lookup_contraction(core)?;
    let suffix = &token[prefix.len() + core.len()..];
    Some(format!("{prefix}{}{suffix}", mirror_case(core, expansion)))
}

fn mirror_case(token: &str, expansion: &str) -> String {
    // The case signal is the token's first letter, not a leading quote
    // character ("'Cause" capitalizes like "Cause").
    let first_upper = token
        .chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(|c| c.is_uppercase());
    if !first_upper {
        return expansion.to_string();
    }
    let mut chars = expansion.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Drops records that fail the completeness invariants (four non-empty
/// options; non-null article, question and answer). Returns the kept
/// records and the number dropped.
pub fn filter_complete(records: Vec<RaceRecord>) -> (Vec<RaceRecord>, usize) {
    let input_len = records.len();
    let kept: Vec<RaceRecord> = records
        .into_iter()
        .filter(RaceRecord::is_complete)
        .collect();
    let dropped = input_len - kept.len();
    (kept, dropped)
}

/// Fills the derived `correct_text` column from the answer label.
///
/// The record must have passed [`filter_complete`].
pub fn derive_correct_text(mut record: RaceRecord) -> Result<RaceRecord, CorpusError> {
    let label = record
        .answer_label
        .ok_or_else(|| CorpusError::IncompleteRecord {
            id: record.id.clone(),
            what: "answer_label".into(),
        })?;
    let text = record
        .options
        .get(label.index())
        .ok_or_else(|| CorpusError::IncompleteRecord {
            id: record.id.clone(),
            what: format!("option {label}"),
        })?;
    record.correct_text = Some(text.clone());
    Ok(record)
}

/// A question is fill-in-blank iff it contains an underscore (underscores
/// never occur in ordinary prose, and corpora mark blanks with a single
/// `_` token) or a run of two or more `-` characters; single hyphens inside
/// ordinary words do not count.
pub fn detect_question_type(question: &str) -> QuestionType {
    if question.contains('_') || question.contains("--") {
        QuestionType::FillInBlank
    } else {
        QuestionType::Interrogative
    }
}

/// Partitions records into (interrogative, fill-in-blank) lists, setting
/// `question_type` on each record. The partition is exhaustive and disjoint.
pub fn split_by_question_type(records: Vec<RaceRecord>) -> (Vec<RaceRecord>, Vec<RaceRecord>) {
    let mut interrogative = Vec::new();
    let mut fill_in_blank = Vec::new();
    for mut record in records {
        let question_type = detect_question_type(&record.question);
        record.question_type = Some(question_type);
        match question_type {
            QuestionType::Interrogative => interrogative.push(record),
            QuestionType::FillInBlank => fill_in_blank.push(record),
        }
    }
    (interrogative, fill_in_blank)
}

/// Word count rule for EDA averages: split on Unicode whitespace.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Computes the EDA statistics over a non-empty list of filtered records.
pub fn corpus_stats(records: &[RaceRecord]) -> Result<EdaReport, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = records.len() as f64;
    let mut article_words = 0usize;
    let mut question_words = 0usize;
    let mut option_chars = [0usize; 4];
    let mut label_counts: BTreeMap<AnswerLabel, usize> =
        AnswerLabel::ALL.iter().map(|&l| (l, 0)).collect();

    for record in records {
        article_words += word_count(&record.article);
        question_words += word_count(&record.question);
        for (slot, option) in option_chars.iter_mut().zip(&record.options) {
            *slot += option.chars().count();
        }
        let label = record
            .answer_label
            .ok_or_else(|| CorpusError::IncompleteRecord {
                id: record.id.clone(),
                what: "answer_label".into(),
            })?;
        *label_counts.get_mut(&label).expect("all labels present") += 1;
    }

    let total_option_chars: usize = option_chars.iter().sum();
    let avg_option_chars = option_chars.map(|sum| sum as f64 / n);
    Ok(EdaReport {
        record_count: records.len(),
        avg_article_words: article_words as f64 / n,
        avg_question_words: question_words as f64 / n,
        avg_option_chars,
        avg_option_chars_overall: total_option_chars as f64 / (4.0 * n),
        correct_label_proportions: label_counts
            .into_iter()
            .map(|(label, count)| (label, count as f64 / n))
            .collect(),
    })
}
