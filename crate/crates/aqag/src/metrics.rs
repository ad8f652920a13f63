//! Evaluation metrics: perplexity over scored token sequences (plain and
//! sliding-window), TF-IDF article/question relevance, option-vs-answer
//! embedding similarity, correct-option distribution, quantization memory
//! savings, and training-loss log summarization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerLabel;
use crate::inference::TokenScoreSequence;
use crate::mcq::McqItem;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("token score sequence is empty")]
    EmptyScores,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("endpoint does not support {capability}")]
    CapabilityMissing { capability: &'static str },
    #[error("scoring failed: {0}")]
    Scoring(String),
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("item {index} is incomplete")]
    IncompleteItem { index: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Anything that can score a text into per-token log-probabilities.
pub trait TokenScorer {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreSequence, MetricsError>;
}

/// Anything that can embed a text into a fixed-dimension vector.
pub trait Embedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MetricsError>;
}

// ---------------------------------------------------------------------------
// Perplexity
// ---------------------------------------------------------------------------

/// exp of the negative mean token log-probability. Always >= 1 because
/// every log-probability is <= 0.
pub fn perplexity(scores: &TokenScoreSequence) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyScores);
    }
    let sum: f64 = scores.logprobs().sum();
    Ok((-sum / scores.len() as f64).exp())
}

/// Window/stride for sliding-window corpus perplexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerplexityParams {
    pub window: usize,
    pub stride: usize,
}

impl Default for PerplexityParams {
    fn default() -> Self {
        Self {
            window: 1024,
            stride: 512,
        }
    }
}

impl PerplexityParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.stride == 0 || self.stride > self.window {
            return Err(MetricsError::InvalidParams(format!(
                "stride must satisfy 1 <= stride ({}) <= window ({})",
                self.stride, self.window
            )));
        }
        Ok(())
    }
}

/// Sliding-window perplexity of a corpus text.
///
/// The full text is scored once to fix the token segmentation; each window
/// of `window` tokens advancing by `stride` is then re-scored, and only the
/// tokens not covered by an earlier window (the non-overlapping tail, at
/// most `stride` per window, the whole first window) contribute. Windows
/// are aggregated in order by token-weighted mean before exponentiation,
/// so the result is deterministic for a deterministic endpoint.
pub fn corpus_perplexity(
    scorer: &dyn TokenScorer,
    corpus_text: &str,
    params: &PerplexityParams,
) -> Result<f64, MetricsError> {
    params.validate()?;
    if corpus_text.trim().is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let full = scorer.score_tokens(corpus_text)?;
    let tokens: Vec<&str> = full.entries().iter().map(|t| t.text.as_str()).collect();
    let total = tokens.len();

    let mut logprob_sum = 0.0;
    let mut scored_tokens = 0usize;
    let mut covered = 0usize;
    let mut begin = 0usize;
    while covered < total {
        let end = (begin + params.window).min(total);
        let tail = end - covered;
        let window_text: String = tokens[begin..end].concat();
        let scores = scorer.score_tokens(&window_text)?;
        let take = tail.min(scores.len());
        let tail_entries = &scores.entries()[scores.len() - take..];
        logprob_sum += tail_entries.iter().map(|t| t.logprob).sum::<f64>();
        scored_tokens += take;
        covered = end;
        begin += params.stride;
    }
    if scored_tokens == 0 {
        return Err(MetricsError::EmptyScores);
    }
    Ok((-logprob_sum / scored_tokens as f64).exp())
}

// ---------------------------------------------------------------------------
// TF-IDF and cosine similarity
// ---------------------------------------------------------------------------

/// Sparse term-weight vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightedVector {
    entries: BTreeMap<u32, f64>,
}

impl WeightedVector {
    /// Builds a vector, dropping explicit zeros and non-finite weights.
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .filter(|(_, w)| w.is_finite() && *w != 0.0)
                .collect(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<u32, f64> {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        // Iterate the smaller map against the larger.
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (&self.entries, &other.entries)
        } else {
            (&other.entries, &self.entries)
        };
        small
            .iter()
            .filter_map(|(term, w)| large.get(term).map(|v| w * v))
            .sum()
    }

    fn scale(&mut self, factor: f64) {
        for weight in self.entries.values_mut() {
            *weight *= factor;
        }
    }
}

/// Fitted TF-IDF vocabulary and inverse document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, u32>,
    idf: BTreeMap<u32, f64>,
    doc_count: usize,
}

impl TfidfModel {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u32> {
        &self.vocabulary
    }

    pub fn idf(&self, term_id: u32) -> Option<f64> {
        self.idf.get(&term_id).copied()
    }
}

/// Lowercase alphanumeric word tokenizer shared by fit and vectorize.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Fits vocabulary and smoothed idf: `idf(t) = ln((1 + N) / (1 + df_t)) + 1`.
pub fn tfidf_fit<S: AsRef<str>>(documents: &[S]) -> Result<TfidfModel, MetricsError> {
    if documents.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut document_frequency: BTreeMap<String, usize> = BTreeMap::new();
    for document in documents {
        let mut seen: Vec<String> = tokenize(document.as_ref());
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *document_frequency.entry(term).or_insert(0) += 1;
        }
    }
    let n = documents.len() as f64;
    // Term ids follow sorted term order, so fitting is deterministic.
    let mut vocabulary = BTreeMap::new();
    let mut idf = BTreeMap::new();
    for (id, (term, df)) in document_frequency.into_iter().enumerate() {
        let id = id as u32;
        vocabulary.insert(term, id);
        idf.insert(id, ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0);
    }
    Ok(TfidfModel {
        vocabulary,
        idf,
        doc_count: documents.len(),
    })
}

/// Vectorizes a text: raw term count times idf, L2-normalized.
/// Out-of-vocabulary terms are ignored; an all-OOV text yields the zero
/// vector.
pub fn tfidf_vector(model: &TfidfModel, text: &str) -> WeightedVector {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for term in tokenize(text) {
        if let Some(&id) = model.vocabulary.get(&term) {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    let mut vector = WeightedVector::from_entries(
        counts
            .into_iter()
            .map(|(id, count)| (id, count * model.idf[&id])),
    );
    let norm = vector.norm();
    if norm > 0.0 {
        vector.scale(1.0 / norm);
    }
    vector
}

/// `A . B / (|A| |B|)`, clamped to [-1, 1]; zero or empty vectors score 0.
pub fn cosine_similarity(a: &WeightedVector, b: &WeightedVector) -> f64 {
    let denominator = a.norm() * b.norm();
    if denominator == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denominator).clamp(-1.0, 1.0)
}

fn cosine_dense(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// TF-IDF cosine relevance of a question to its article, in [0, 1].
pub fn relevance_score(article: &str, question: &str, background: &TfidfModel) -> f64 {
    let article_vector = tfidf_vector(background, article);
    let question_vector = tfidf_vector(background, question);
    cosine_similarity(&article_vector, &question_vector).max(0.0)
}

// ---------------------------------------------------------------------------
// Option similarity
// ---------------------------------------------------------------------------

/// Per-option cosine similarity against the correct option's embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSimilarity {
    pub scores: BTreeMap<AnswerLabel, f64>,
    /// Options that could not be embedded meaningfully (for example every
    /// word out-of-vocabulary under a static table) are flagged here and
    /// scored 0.0.
    pub issues: Vec<String>,
}

/// Embeds each option and scores it against the correct option. The
/// correct option scores 1.0 against itself (clamped from above).
pub fn option_similarity(
    item: &McqItem,
    embedder: &dyn Embedder,
) -> Result<OptionSimilarity, MetricsError> {
    if !item.complete {
        return Err(MetricsError::IncompleteItem { index: item.index });
    }
    let answer = item.answer_label.expect("complete item has an answer");
    let correct_text = &item.options[&answer];
    let correct_vector = embedder.embed(correct_text)?;

    let mut scores = BTreeMap::new();
    let mut issues = Vec::new();
    let correct_is_zero = correct_vector.iter().all(|&x| x == 0.0);
    if correct_is_zero {
        issues.push(format!(
            "correct option {answer} text {correct_text:?} has no embedding; scores are 0.0"
        ));
    }
    for (&label, text) in &item.options {
        let vector = embedder.embed(text)?;
        if vector.iter().all(|&x| x == 0.0) && !correct_is_zero {
            issues.push(format!(
                "option {label} text {text:?} has no embedding; scored 0.0"
            ));
        }
        scores.insert(label, cosine_dense(&vector, &correct_vector));
    }
    Ok(OptionSimilarity { scores, issues })
}

/// Static word-vector table loaded from a text file, one
/// `word v1 ... vd` line per word with a fixed dimension `d`.
/// Texts embed as the unweighted mean of their in-vocabulary word vectors;
/// an all-OOV text embeds as the zero vector.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    vectors: BTreeMap<String, Vec<f64>>,
    dimension: usize,
}

impl WordVectorTable {
    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let file = File::open(path).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse<R: std::io::Read>(reader: BufReader<R>) -> Result<Self, MetricsError> {
        let mut vectors = BTreeMap::new();
        let mut dimension = None;
        for (i, line) in reader.lines().enumerate() {
            let line_number = i + 1;
            let line = line.map_err(|source| MetricsError::Io {
                path: format!("line {line_number}"),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line").to_string();
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>().map_err(|e| MetricsError::Malformed {
                        line: line_number,
                        message: format!("bad vector component {p:?}: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if values.is_empty() {
                return Err(MetricsError::Malformed {
                    line: line_number,
                    message: format!("word {word:?} has no vector components"),
                });
            }
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(MetricsError::Malformed {
                        line: line_number,
                        message: format!("dimension {} differs from {d}", values.len()),
                    });
                }
                Some(_) => {}
            }
            vectors.insert(word, values);
        }
        let dimension = dimension.ok_or(MetricsError::EmptyCorpus)?;
        Ok(Self { vectors, dimension })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

impl Embedder for WordVectorTable {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MetricsError> {
        let mut sum = vec![0.0; self.dimension];
        let mut found = 0usize;
        for word in tokenize(text) {
            if let Some(vector) = self.vectors.get(&word) {
                for (slot, value) in sum.iter_mut().zip(vector) {
                    *slot += value;
                }
                found += 1;
            }
        }
        if found > 0 {
            for slot in &mut sum {
                *slot /= found as f64;
            }
        }
        Ok(sum)
    }
}

// ---------------------------------------------------------------------------
// Correct-option distribution
// ---------------------------------------------------------------------------

/// Fractions per answer label plus the largest deviation from the fair
/// quarter share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub fractions: BTreeMap<AnswerLabel, f64>,
    pub max_abs_deviation: f64,
}

pub fn distribution_report(labels: &[AnswerLabel]) -> Result<DistributionReport, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = labels.len() as f64;
    let mut counts: BTreeMap<AnswerLabel, usize> =
        AnswerLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for &label in labels {
        *counts.get_mut(&label).expect("all labels present") += 1;
    }
    let fractions: BTreeMap<AnswerLabel, f64> = counts
        .into_iter()
        .map(|(label, count)| (label, count as f64 / n))
        .collect();
    let max_abs_deviation = fractions
        .values()
        .map(|f| (f - 0.25).abs())
        .fold(0.0, f64::max);
    Ok(DistributionReport {
        fractions,
        max_abs_deviation,
    })
}

// ---------------------------------------------------------------------------
// Quantization arithmetic
// ---------------------------------------------------------------------------

/// Bit widths compared by [`memory_saved`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub quantized_bits: u32,
    pub full_bits: u32,
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        Self {
            quantized_bits: 4,
            full_bits: 32,
        }
    }
}

impl QuantizationSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if ![4, 8, 16].contains(&self.quantized_bits) {
            return Err(MetricsError::InvalidParams(format!(
                "quantized_bits must be 4, 8 or 16, got {}",
                self.quantized_bits
            )));
        }
        if self.quantized_bits > self.full_bits {
            return Err(MetricsError::InvalidParams(format!(
                "quantized_bits {} exceeds full_bits {}",
                self.quantized_bits, self.full_bits
            )));
        }
        Ok(())
    }
}

/// Percent of memory saved: `(1 - quantized/full) * 100`.
pub fn memory_saved(spec: &QuantizationSpec) -> Result<f64, MetricsError> {
    spec.validate()?;
    Ok((1.0 - f64::from(spec.quantized_bits) / f64::from(spec.full_bits)) * 100.0)
}

// ---------------------------------------------------------------------------
// Training-loss log summarization
// ---------------------------------------------------------------------------

/// An ordered training-loss curve with strictly increasing steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLog {
    entries: Vec<(i64, f64)>,
}

impl LossLog {
    pub fn new(entries: Vec<(i64, f64)>) -> Result<Self, MetricsError> {
        for (i, window) in entries.windows(2).enumerate() {
            if window[1].0 <= window[0].0 {
                return Err(MetricsError::Malformed {
                    line: i + 2,
                    message: format!(
                        "steps must strictly increase: {} then {}",
                        window[0].0, window[1].0
                    ),
                });
            }
        }
        for (i, &(step, loss)) in entries.iter().enumerate() {
            if !loss.is_finite() || loss < 0.0 {
                return Err(MetricsError::Malformed {
                    line: i + 1,
                    message: format!("loss at step {step} must be finite and >= 0, got {loss}"),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Reads a two-column `step,loss` CSV.
    pub fn load_csv(path: &Path) -> Result<Self, MetricsError> {
        let file = File::open(path).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().from_reader(BufReader::new(file));
        let mut entries = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| MetricsError::Malformed {
                line,
                message: e.to_string(),
            })?;
            let parse = |idx: usize, what: &str| -> Result<f64, MetricsError> {
                row.get(idx)
                    .ok_or_else(|| MetricsError::Malformed {
                        line,
                        message: format!("missing {what}"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| MetricsError::Malformed {
                        line,
                        message: format!("bad {what}: {e}"),
                    })
            };
            let step = parse(0, "step")? as i64;
            let loss = parse(1, "loss")?;
            entries.push((step, loss));
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(i64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Trailing moving-average summary of a loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub smoothed: LossLog,
    pub decreased: bool,
    pub first: f64,
    pub last: f64,
}

/// Smooths the log with a trailing moving average of `window` points
/// (emitted from the first full window) and reports whether the smoothed
/// curve ends below where it started.
pub fn loss_summary(log: &LossLog, window: usize) -> Result<LossSummary, MetricsError> {
    if window == 0 {
        return Err(MetricsError::InvalidParams(
            "window must be at least 1".into(),
        ));
    }
    if log.len() < window {
        return Err(MetricsError::InvalidParams(format!(
            "log has {} entries, fewer than window {window}",
            log.len()
        )));
    }
    let entries = log.entries();
    let smoothed: Vec<(i64, f64)> = entries
        .windows(window)
        .map(|chunk| {
            let step = chunk.last().expect("non-empty window").0;
            let mean = chunk.iter().map(|&(_, loss)| loss).sum::<f64>() / window as f64;
            (step, mean)
        })
        .collect();
    let first = smoothed.first().expect("at least one window").1;
    let last = smoothed.last().expect("at least one window").1;
    Ok(LossSummary {
        smoothed: LossLog::new(smoothed).expect("steps inherited from a valid log"),
        decreased: last < first,
        first,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::ScoredToken;

    fn scores(logprobs: &[f64]) -> TokenScoreSequence {
        TokenScoreSequence::new(
            logprobs
                .iter()
                .map(|&lp| ScoredToken {
                    text: "t".into(),
                    logprob: lp,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perplexity_uniform_over_ten_symbols_is_ten() {
        let uniform = scores(&[-(10.0f64.ln()); 5]);
        let ppl = perplexity(&uniform).unwrap();
        assert!((ppl - 10.0).abs() < 1e-12 * 10.0);
    }

    #[test]
    fn perplexity_of_certainty_is_one() {
        assert_eq!(perplexity(&scores(&[0.0, 0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn perplexity_hand_computed() {
        let ppl = perplexity(&scores(&[-0.5, -1.5])).unwrap();
        assert!((ppl - 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn tfidf_fit_hand_computed_idf() {
        let model = tfidf_fit(&["a b", "a c"]).unwrap();
        assert_eq!(model.doc_count(), 2);
        let id_a = model.vocabulary()["a"];
        let id_b = model.vocabulary()["b"];
        assert_eq!(model.idf(id_a).unwrap(), (3.0f64 / 3.0).ln() + 1.0);
        assert_eq!(model.idf(id_a).unwrap(), 1.0);
        assert!((model.idf(id_b).unwrap() - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn tfidf_single_document_idf_is_one() {
        let model = tfidf_fit(&["only one document here"]).unwrap();
        for &id in model.vocabulary().values() {
            assert_eq!(model.idf(id).unwrap(), 1.0);
        }
    }

    #[test]
    fn tfidf_rejects_empty_corpus() {
        assert!(matches!(
            tfidf_fit::<&str>(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
    }

    #[test]
    fn tfidf_vector_hand_computed() {
        let model = tfidf_fit(&["a b", "a c"]).unwrap();
        let vector = tfidf_vector(&model, "a a b");
        // Raw weights: a -> 2 * 1.0 = 2.0, b -> 1 * (ln(1.5) + 1).
        let w_a = 2.0;
        let w_b = 1.5f64.ln() + 1.0;
        let norm = (w_a * w_a + w_b * w_b).sqrt();
        let id_a = model.vocabulary()["a"];
        let id_b = model.vocabulary()["b"];
        assert!((vector.entries()[&id_a] - w_a / norm).abs() < 1e-12);
        assert!((vector.entries()[&id_b] - w_b / norm).abs() < 1e-12);
        assert!((vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tfidf_vector_of_oov_text_is_zero() {
        let model = tfidf_fit(&["a b", "a c"]).unwrap();
        assert!(tfidf_vector(&model, "zebra quagga").is_zero());
    }

    #[test]
    fn cosine_identity_orthogonality_and_hand_value() {
        let v = WeightedVector::from_entries([(0, 0.3), (7, 1.2)]);
        assert!((cosine_similarity(&v, &v) - 1.0).abs() < 1e-9);
        let disjoint = WeightedVector::from_entries([(1, 2.0)]);
        assert_eq!(cosine_similarity(&v, &disjoint), 0.0);
        let x = WeightedVector::from_entries([(0, 1.0)]);
        let xy = WeightedVector::from_entries([(0, 1.0), (1, 1.0)]);
        assert!((cosine_similarity(&x, &xy) - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity(&v, &WeightedVector::default()), 0.0);
    }

    #[test]
    fn relevance_identity_and_orthogonality() {
        let model = tfidf_fit(&["the cat sat", "a dog ran"]).unwrap();
        assert!((relevance_score("the cat sat", "the cat sat", &model) - 1.0).abs() < 1e-9);
        assert_eq!(relevance_score("the cat sat", "dog ran", &model), 0.0);
    }

    #[test]
    fn distribution_trivial_cases() {
        let all_a = vec![AnswerLabel::A; 5];
        let report = distribution_report(&all_a).unwrap();
        assert_eq!(report.fractions[&AnswerLabel::A], 1.0);
        assert_eq!(report.fractions[&AnswerLabel::B], 0.0);
        assert_eq!(report.max_abs_deviation, 0.75);

        let balanced: Vec<AnswerLabel> = AnswerLabel::ALL.repeat(1000);
        let report = distribution_report(&balanced).unwrap();
        assert_eq!(report.max_abs_deviation, 0.0);
        let sum: f64 = report.fractions.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        assert!(distribution_report(&[]).is_err());
    }

    #[test]
    fn memory_saved_paper_values() {
        assert_eq!(
            memory_saved(&QuantizationSpec {
                quantized_bits: 4,
                full_bits: 32
            })
            .unwrap(),
            87.5
        );
        assert_eq!(
            memory_saved(&QuantizationSpec {
                quantized_bits: 8,
                full_bits: 32
            })
            .unwrap(),
            75.0
        );
        assert_eq!(
            memory_saved(&QuantizationSpec {
                quantized_bits: 16,
                full_bits: 16
            })
            .unwrap(),
            0.0
        );
        assert!(memory_saved(&QuantizationSpec {
            quantized_bits: 5,
            full_bits: 32
        })
        .is_err());
        assert!(memory_saved(&QuantizationSpec {
            quantized_bits: 16,
            full_bits: 8
        })
        .is_err());
    }

    #[test]
    fn memory_saved_is_antitone_in_quantized_bits() {
        let saved: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&q| {
                memory_saved(&QuantizationSpec {
                    quantized_bits: q,
                    full_bits: 32,
                })
                .unwrap()
            })
            .collect();
        assert!(saved[0] > saved[1] && saved[1] > saved[2]);
    }

    #[test]
    fn loss_summary_trivial_and_hand_computed() {
        let decreasing = LossLog::new(vec![(1, 4.0), (2, 3.0), (3, 2.0), (4, 1.0)]).unwrap();
        let summary = loss_summary(&decreasing, 1).unwrap();
        assert!(summary.decreased);
        assert_eq!(summary.smoothed, decreasing);

        let constant = LossLog::new(vec![(1, 2.0), (2, 2.0), (3, 2.0)]).unwrap();
        assert!(!loss_summary(&constant, 2).unwrap().decreased);

        let noisy = LossLog::new(vec![
            (1, 3.0),
            (2, 3.4),
            (3, 2.8),
            (4, 3.1),
            (5, 2.5),
            (6, 2.6),
        ])
        .unwrap();
        let summary = loss_summary(&noisy, 3).unwrap();
        let expected = [
            (3, (3.0 + 3.4 + 2.8) / 3.0),
            (4, (3.4 + 2.8 + 3.1) / 3.0),
            (5, (2.8 + 3.1 + 2.5) / 3.0),
            (6, (3.1 + 2.5 + 2.6) / 3.0),
        ];
        assert_eq!(summary.smoothed.entries(), &expected);
        assert!(summary.decreased);
        assert_eq!(summary.first, expected[0].1);
        assert_eq!(summary.last, expected[3].1);

        assert!(loss_summary(&constant, 4).is_err());
        assert!(loss_summary(&constant, 0).is_err());
    }

    #[test]
    fn loss_log_rejects_unordered_steps_and_negative_loss() {
        assert!(LossLog::new(vec![(2, 1.0), (1, 1.0)]).is_err());
        assert!(LossLog::new(vec![(1, 1.0), (1, 1.0)]).is_err());
        assert!(LossLog::new(vec![(1, -0.5)]).is_err());
    }

    struct ScriptedScorer {
        /// Per-token logprob assigned by token text length.
        per_char: f64,
    }

    impl ScriptedScorer {
        fn token_logprob(&self, token: &str) -> f64 {
            self.per_char * token.trim().chars().count() as f64
        }
    }

    impl TokenScorer for ScriptedScorer {
        fn score_tokens(&self, text: &str) -> Result<TokenScoreSequence, MetricsError> {
            let entries: Vec<ScoredToken> = split_tokens(text)
                .into_iter()
                .map(|tok| ScoredToken {
                    logprob: self.token_logprob(&tok),
                    text: tok,
                })
                .collect();
            TokenScoreSequence::new(entries).map_err(|e| MetricsError::Scoring(e.to_string()))
        }
    }

    /// Whitespace-attached tokens whose concatenation reproduces the text.
    fn split_tokens(text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for word in text.split(' ') {
            if tokens.is_empty() {
                tokens.push(word.to_string());
            } else {
                tokens.push(format!(" {word}"));
            }
        }
        tokens
    }

    struct ConstantScorer;

    impl TokenScorer for ConstantScorer {
        fn score_tokens(&self, text: &str) -> Result<TokenScoreSequence, MetricsError> {
            let entries: Vec<ScoredToken> = split_tokens(text)
                .into_iter()
                .map(|tok| ScoredToken {
                    text: tok,
                    logprob: -1.0,
                })
                .collect();
            TokenScoreSequence::new(entries).map_err(|e| MetricsError::Scoring(e.to_string()))
        }
    }

    #[test]
    fn corpus_perplexity_constant_scores_make_windowing_irrelevant() {
        let text = "one two three four five six seven eight nine ten";
        for (window, stride) in [(3, 1), (4, 2), (10, 10), (4, 4), (1, 1)] {
            let ppl =
                corpus_perplexity(&ConstantScorer, text, &PerplexityParams { window, stride })
                    .unwrap();
            assert!(
                (ppl - 1.0f64.exp()).abs() < 1e-12,
                "window {window} stride {stride}"
            );
        }
    }

    #[test]
    fn corpus_perplexity_matches_brute_force_window_enumeration() {
        let scorer = ScriptedScorer { per_char: -0.125 };
        let text = "aa bbb c dddd ee fff gg h iii jj";
        let params = PerplexityParams {
            window: 4,
            stride: 2,
        };

        // Brute-force oracle: enumerate windows over the token list and
        // average the logprobs of each window's uncovered tail.
        let tokens = split_tokens(text);
        assert_eq!(tokens.len(), 10);
        let expected = brute_force_windowed(&scorer, &tokens, params.window, params.stride);
        let actual = corpus_perplexity(&scorer, text, &params).unwrap();
        assert!(
            (actual - expected).abs() < 1e-9,
            "actual {actual} expected {expected}"
        );
    }

    fn brute_force_windowed(
        scorer: &ScriptedScorer,
        tokens: &[String],
        window: usize,
        stride: usize,
    ) -> f64 {
        let total = tokens.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut covered = 0usize;
        let mut begin = 0usize;
        while covered < total {
            let end = (begin + window).min(total);
            for token in &tokens[covered..end] {
                sum += scorer.token_logprob(token);
                count += 1;
            }
            covered = end;
            begin += stride;
        }
        (-sum / count as f64).exp()
    }

    #[test]
    fn corpus_perplexity_single_window_equals_plain_perplexity() {
        let scorer = ScriptedScorer { per_char: -0.25 };
        let text = "alpha beta gamma delta";
        let full = scorer.score_tokens(text).unwrap();
        let plain = perplexity(&full).unwrap();
        let windowed = corpus_perplexity(
            &scorer,
            text,
            &PerplexityParams {
                window: 100,
                stride: 100,
            },
        )
        .unwrap();
        assert!((windowed - plain).abs() < 1e-12);
    }

    #[test]
    fn corpus_perplexity_validates_params_and_input() {
        let bad = PerplexityParams {
            window: 4,
            stride: 5,
        };
        assert!(matches!(
            corpus_perplexity(&ConstantScorer, "text", &bad),
            Err(MetricsError::InvalidParams(_))
        ));
        assert!(matches!(
            corpus_perplexity(&ConstantScorer, "  ", &PerplexityParams::default()),
            Err(MetricsError::EmptyCorpus)
        ));
    }

    #[test]
    fn word_vector_table_embeds_mean_of_in_vocabulary_words() {
        let file = "red 1 0 0\nblue 0 1 0\ngreen 0 0 1\n";
        let table = WordVectorTable::parse(BufReader::new(file.as_bytes())).unwrap();
        assert_eq!(table.dimension(), 3);
        assert_eq!(table.embed("red blue").unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(table.embed("red xyz").unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(table.embed("xyz qqq").unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn word_vector_table_rejects_ragged_dimensions() {
        let file = "red 1 0 0\nblue 0 1\n";
        assert!(matches!(
            WordVectorTable::parse(BufReader::new(file.as_bytes())),
            Err(MetricsError::Malformed { line: 2, .. })
        ));
    }
}
