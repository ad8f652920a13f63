//! Independent brute-force oracles used by property and acceptance tests.
//! These reimplement the metric definitions directly from their formulas,
//! sharing no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Lowercase alphanumeric tokenizer, written out independently.
pub fn naive_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lower in c.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Smoothed idf per term: ln((1 + N) / (1 + df)) + 1.
pub fn naive_idf(documents: &[String]) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in documents {
        let mut terms = naive_tokenize(doc);
        terms.sort();
        terms.dedup();
        for term in terms {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = documents.len() as f64;
    df.into_iter()
        .map(|(term, count)| (term, ((1.0 + n) / (1.0 + count as f64)).ln() + 1.0))
        .collect()
}

/// TF-IDF vector keyed by term text: raw count times idf, L2-normalized.
pub fn naive_vector(idf: &BTreeMap<String, f64>, text: &str) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for term in naive_tokenize(text) {
        if idf.contains_key(&term) {
            *counts.entry(term).or_insert(0.0) += 1.0;
        }
    }
    let mut weights: BTreeMap<String, f64> = counts
        .into_iter()
        .map(|(term, count)| {
            let w = count * idf[&term];
            (term, w)
        })
        .collect();
    let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in weights.values_mut() {
            *w /= norm;
        }
    }
    weights
}

pub fn naive_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(term, w)| b.get(term).map(|v| w * v))
        .sum();
    let norm_a: f64 = a.values().map(|w| w * w).sum::<f64>().sqrt();
    let norm_b: f64 = b.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a * norm_b)
}

/// Sliding-window perplexity enumerated directly: windows of `window`
/// tokens stepping by `stride`; each window contributes the logprobs of
/// the tokens an earlier window has not covered.
pub fn naive_windowed_perplexity<F: Fn(&str) -> f64>(
    tokens: &[String],
    window: usize,
    stride: usize,
    logprob_of: F,
) -> f64 {
    let total = tokens.len();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut covered = 0usize;
    let mut begin = 0usize;
    while covered < total {
        let end = (begin + window).min(total);
        for token in &tokens[covered..end] {
            sum += logprob_of(token);
            count += 1;
        }
        covered = end;
        begin += stride;
    }
    (-sum / count as f64).exp()
}
