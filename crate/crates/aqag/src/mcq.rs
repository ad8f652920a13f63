//! Parser for generated MCQ text blocks: numbered question, `A)`-`D)`
//! options, `Answer:` line, optional `Explanation:` — with recovery for
//! truncated or malformed generations, a canonical renderer, and a
//! validation pass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerLabel;

/// One parsed generated question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub index: usize,
    pub stem: String,
    pub options: BTreeMap<AnswerLabel, String>,
    pub answer_label: Option<AnswerLabel>,
    pub explanation: Option<String>,
    /// True iff all four options are present, the answer label resolves,
    /// and the stem is non-empty.
    pub complete: bool,
}

impl McqItem {
    fn compute_complete(&self) -> bool {
        !self.stem.is_empty() && self.options.len() == 4 && self.answer_label.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    /// Final item cut off by end of input.
    Truncated,
    /// Item missing required parts when the next question began.
    Incomplete,
    /// Item structure broken (duplicate option label or answer line);
    /// parsing skipped to the next question header and dropped the item.
    Malformed,
    /// Answer given as text matching zero or several options.
    AmbiguousAnswer,
    /// Validation: item count differs from the expected count.
    CountMismatch,
    /// Validation: two items share a stem (case-folded exact match).
    DuplicateStem,
    /// Validation: the correct option's text equals another option's text.
    OptionCollision,
}

/// A recorded parse or validation problem.
///
/// `position` is the char offset into the source text for parse issues and
/// the 1-based item position for validation issues (0 for report-level ones).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub position: usize,
    pub kind: IssueKind,
    pub message: String,
}

/// Everything recovered from one generated block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ParseReport {
    pub items: Vec<McqItem>,
    pub issues: Vec<ParseIssue>,
    pub consumed_chars: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum McqError {
    #[error("item {index} is incomplete and cannot be rendered: {what}")]
    IncompleteItem { index: usize, what: String },
}

enum Line<'a> {
    Header { number: usize, stem: &'a str },
    Option { label: AnswerLabel, text: &'a str },
    Answer { value: &'a str },
    Explanation { text: &'a str },
    Blank,
    Text(&'a str),
}

fn classify(line: &str) -> Line<'_> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Line::Blank;
    }
    if let Some(rest) = strip_keyword(trimmed, "answer") {
        return Line::Answer { value: rest };
    }
    if let Some(rest) = strip_keyword(trimmed, "explanation") {
        return Line::Explanation { text: rest };
    }
    if let Some((label, text)) = match_option(trimmed) {
        return Line::Option { label, text };
    }
    if let Some((number, stem)) = match_header(trimmed) {
        return Line::Header { number, stem };
    }
    Line::Text(trimmed)
}

/// `keyword` followed by an optional gap and an ASCII or fullwidth colon.
fn strip_keyword<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let head = line.get(..keyword.len())?;
    if !head.eq_ignore_ascii_case(keyword) {
        return None;
    }
    let rest = line[keyword.len()..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .or_else(|| rest.strip_prefix('\u{ff1a}'))?;
    Some(rest.trim())
}

/// Option line styles: `A) text`, `A. text`, `A: text`, `(A) text`,
/// lowercase labels included.
fn match_option(line: &str) -> Option<(AnswerLabel, &str)> {
    let (parenthesized, rest) = match line.strip_prefix('(') {
        Some(rest) => (true, rest),
        None => (false, line),
    };
    let mut chars = rest.char_indices();
    let (_, label_char) = chars.next()?;
    let label = AnswerLabel::from_char(label_char)?;
    let (punct_at, punct) = chars.next()?;
    let expected: &[char] = if parenthesized {
        &[')']
    } else {
        &[')', '.', ':']
    };
    if !expected.contains(&punct) {
        return None;
    }
    Some((label, rest[punct_at + punct.len_utf8()..].trim()))
}

/// Question header: integer then `.` or `)` then the stem.
fn match_header(line: &str) -> Option<(usize, &str)> {
    let digits_end = line.find(|c: char| !c.is_ascii_digit())?;
    if digits_end == 0 {
        return None;
    }
    let number: usize = line[..digits_end].parse().ok()?;
    let rest = line[digits_end..].trim_start();
    let rest = rest.strip_prefix(['.', ')'])?;
    Some((number, rest.trim()))
}

struct ItemBuilder {
    index: usize,
    stem: String,
    options: BTreeMap<AnswerLabel, String>,
    last_option: Option<AnswerLabel>,
    answer_raw: Option<String>,
    explanation: Option<String>,
    in_explanation: bool,
    broken: bool,
}

impl ItemBuilder {
    fn new(index: usize) -> Self {
        Self {
            index,
            stem: String::new(),
            options: BTreeMap::new(),
            last_option: None,
            answer_raw: None,
            explanation: None,
            in_explanation: false,
            broken: false,
        }
    }

    fn append_explanation(&mut self, text: &str) {
        let explanation = self.explanation.get_or_insert_with(String::new);
        if !explanation.is_empty() {
            explanation.push('\n');
        }
        explanation.push_str(text);
    }

    fn append_stem(&mut self, text: &str) {
        if !self.stem.is_empty() {
            self.stem.push(' ');
        }
        self.stem.push_str(text);
    }
}

/// Parses a generated block into items. Total: malformed structure is
/// surfaced as issues, never as an error.
pub fn parse_mcq_block(text: &str) -> ParseReport {
    let mut report = ParseReport {
        consumed_chars: text.chars().count(),
        ..ParseReport::default()
    };
    let mut builder: Option<ItemBuilder> = None;
    let mut pos = 0usize;

    fn start_item(number: usize, stem: &str) -> ItemBuilder {
        let mut next = ItemBuilder::new(number);
        next.stem = stem.to_string();
        next
    }

    for line in text.split('\n') {
        let line_pos = pos;
        pos += line.chars().count() + 1;
        let classified = classify(line);

        if builder.as_ref().is_some_and(|b| b.broken) {
            if let Line::Header { number, stem } = classified {
                finalize(builder.take().unwrap(), line_pos, false, &mut report);
                builder = Some(start_item(number, stem));
            }
            continue;
        }
        if builder.as_ref().is_some_and(|b| b.in_explanation) {
            match classified {
                Line::Header { number, stem } => {
                    finalize(builder.take().unwrap(), line_pos, false, &mut report);
                    builder = Some(start_item(number, stem));
                }
                Line::Blank => {}
                // Everything up to the next header belongs to the explanation.
                _ => builder.as_mut().unwrap().append_explanation(line.trim()),
            }
            continue;
        }

        match classified {
            Line::Blank => {}
            Line::Header { number, stem } => {
                if let Some(done) = builder.take() {
                    finalize(done, line_pos, false, &mut report);
                }
                builder = Some(start_item(number, stem));
            }
            Line::Option { label, text } => {
                let b = builder.get_or_insert_with(|| ItemBuilder::new(next_index(&report)));
                match b.options.entry(label) {
                    std::collections::btree_map::Entry::Occupied(_) => {
                        report.issues.push(ParseIssue {
                            position: line_pos,
                            kind: IssueKind::Malformed,
                            message: format!(
                                "duplicate option label {label} in question {}",
                                b.index
                            ),
                        });
                        b.broken = true;
                    }
                    std::collections::btree_map::Entry::Vacant(slot) => {
                        slot.insert(text.to_string());
                        b.last_option = Some(label);
                    }
                }
            }
            Line::Answer { value } => {
                let b = builder.get_or_insert_with(|| ItemBuilder::new(next_index(&report)));
                if b.answer_raw.is_some() {
                    report.issues.push(ParseIssue {
                        position: line_pos,
                        kind: IssueKind::Malformed,
                        message: format!("second answer line in question {}", b.index),
                    });
                    b.broken = true;
                } else {
                    b.answer_raw = Some(value.to_string());
                }
            }
            Line::Explanation { text } => {
                let b = builder.get_or_insert_with(|| ItemBuilder::new(next_index(&report)));
                b.in_explanation = true;
                b.explanation = Some(text.to_string());
            }
            Line::Text(text) => match builder.as_mut() {
                Some(b) => match b.last_option {
                    // Unrecognized lines continue the most recent field.
                    Some(label) => {
                        let option = b.options.get_mut(&label).expect("last option present");
                        option.push(' ');
                        option.push_str(text);
                    }
                    None => b.append_stem(text),
                },
                None => {
                    let mut next = ItemBuilder::new(next_index(&report));
                    next.stem = text.to_string();
                    builder = Some(next);
                }
            },
        }
    }

    if let Some(done) = builder.take() {
        let end = report.consumed_chars;
        finalize(done, end, true, &mut report);
    }
    report
}

fn next_index(report: &ParseReport) -> usize {
    report.items.last().map_or(1, |item| item.index + 1)
}

fn finalize(builder: ItemBuilder, pos: usize, at_end: bool, report: &mut ParseReport) {
    if builder.broken {
        return;
    }
    let answer_label = match &builder.answer_raw {
        None => None,
        Some(raw) => match resolve_answer(raw, &builder.options) {
            Ok(label) => Some(label),
            Err(message) => {
                report.issues.push(ParseIssue {
                    position: pos,
                    kind: IssueKind::AmbiguousAnswer,
                    message: format!("question {}: {message}", builder.index),
                });
                None
            }
        },
    };

    let mut item = McqItem {
        index: builder.index,
        stem: builder.stem,
        options: builder.options,
        answer_label,
        explanation: builder.explanation,
        complete: false,
    };
    item.complete = item.compute_complete();

    if !item.complete {
        let mut missing = Vec::new();
        if item.stem.is_empty() {
            missing.push("stem".to_string());
        }
        if item.options.len() != 4 {
            missing.push(format!("{} of 4 options", item.options.len()));
        }
        if item.answer_label.is_none() {
            missing.push("answer".to_string());
        }
        report.issues.push(ParseIssue {
            position: pos,
            kind: if at_end {
                IssueKind::Truncated
            } else {
                IssueKind::Incomplete
            },
            message: format!("question {} incomplete: {}", item.index, missing.join(", ")),
        });
    }
    report.items.push(item);
}

/// A lone letter names the label directly; otherwise the answer text is
/// matched case-folded against the parsed options, and anything but exactly
/// one match is ambiguous.
fn resolve_answer(
    raw: &str,
    options: &BTreeMap<AnswerLabel, String>,
) -> Result<AnswerLabel, String> {
    let trimmed = raw.trim();
    let mut chars = trimmed.chars();
    if let Some(first) = chars.next() {
        if let Some(label) = AnswerLabel::from_char(first) {
            match chars.next() {
                None => return Ok(label),
                Some(c) if !c.is_alphanumeric() => return Ok(label),
                Some(_) => {}
            }
        }
    }
    let folded = trimmed.to_lowercase();
    let matches: Vec<AnswerLabel> = options
        .iter()
        .filter(|(_, text)| text.trim().to_lowercase() == folded)
        .map(|(&label, _)| label)
        .collect();
    match matches.as_slice() {
        [label] => Ok(*label),
        [] => Err(format!("answer text {trimmed:?} matches no option")),
        many => Err(format!(
            "answer text {trimmed:?} matches {} options",
            many.len()
        )),
    }
}

/// Renders a complete item in the canonical grammar form;
/// `parse_mcq_block(render_mcq(item))` yields exactly `item`.
pub fn render_mcq(item: &McqItem) -> Result<String, McqError> {
    if !item.compute_complete() || !item.complete {
        let what = if item.stem.is_empty() {
            "empty stem".to_string()
        } else if item.options.len() != 4 {
            format!("{} of 4 options", item.options.len())
        } else if item.answer_label.is_none() {
            "no answer label".to_string()
        } else {
            "complete flag unset".to_string()
        };
        return Err(McqError::IncompleteItem {
            index: item.index,
            what,
        });
    }
    let mut out = format!("{}. {}\n", item.index, item.stem);
    for (label, text) in &item.options {
        out.push_str(&format!("{label}) {text}\n"));
    }
    out.push_str(&format!(
        "Answer: {}\n",
        item.answer_label.expect("checked")
    ));
    if let Some(explanation) = &item.explanation {
        out.push_str(&format!("Explanation: {explanation}\n"));
    }
    Ok(out)
}

/// Post-parse validation gate: count mismatch, duplicate stems, correct
/// option colliding with another option's text, and incomplete items.
pub fn validate_items(report: &ParseReport, expected_count: usize) -> Vec<ParseIssue> {
    let mut issues = Vec::new();
    if report.items.len() != expected_count {
        issues.push(ParseIssue {
            position: 0,
            kind: IssueKind::CountMismatch,
            message: format!(
                "expected {expected_count} questions, parsed {}",
                report.items.len()
            ),
        });
    }
    for (i, item) in report.items.iter().enumerate() {
        let position = i + 1;
        for earlier in &report.items[..i] {
            if !item.stem.is_empty() && item.stem.to_lowercase() == earlier.stem.to_lowercase() {
                issues.push(ParseIssue {
                    position,
                    kind: IssueKind::DuplicateStem,
                    message: format!(
                        "question {} repeats the stem of question {}",
                        item.index, earlier.index
                    ),
                });
                break;
            }
        }
        if let Some(answer) = item.answer_label {
            if let Some(correct) = item.options.get(&answer) {
                let folded = correct.to_lowercase();
                for (&label, text) in &item.options {
                    if label != answer && text.to_lowercase() == folded {
                        issues.push(ParseIssue {
                            position,
                            kind: IssueKind::OptionCollision,
                            message: format!(
                                "question {}: option {label} repeats the correct answer text",
                                item.index
                            ),
                        });
                    }
                }
            }
        }
        if !item.complete {
            issues.push(ParseIssue {
                position,
                kind: IssueKind::Incomplete,
                message: format!("question {} is incomplete", item.index),
            });
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete_item() -> McqItem {
        McqItem {
            index: 1,
            stem: "What is X?".into(),
            options: [
                (AnswerLabel::A, "p".to_string()),
                (AnswerLabel::B, "q".to_string()),
                (AnswerLabel::C, "r".to_string()),
                (AnswerLabel::D, "s".to_string()),
            ]
            .into_iter()
            .collect(),
            answer_label: Some(AnswerLabel::B),
            explanation: Some("because.".into()),
            complete: true,
        }
    }

    #[test]
    fn parses_canonical_block() {
        let report = parse_mcq_block(
            "1. What is X?\nA) p\nB) q\nC) r\nD) s\nAnswer: B\nExplanation: because.",
        );
        assert_eq!(report.issues, vec![]);
        assert_eq!(report.items, vec![complete_item()]);
    }

    #[test]
    fn empty_text_parses_to_nothing() {
        let report = parse_mcq_block("");
        assert!(report.items.is_empty());
        assert!(report.issues.is_empty());
        assert_eq!(report.consumed_chars, 0);
    }

    #[test]
    fn truncated_block_yields_incomplete_item_with_issue() {
        let report = parse_mcq_block("1. What is X?\nA) p\nB) q\nC) r");
        assert_eq!(report.items.len(), 1);
        let item = &report.items[0];
        assert!(!item.complete);
        assert_eq!(item.options.len(), 3);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].kind, IssueKind::Truncated);
    }

    #[test]
    fn label_punctuation_styles_normalize() {
        for (line, text) in [
            ("A) p", "p"),
            ("A. p", "p"),
            ("(A) p", "p"),
            ("a) p", "p"),
            ("A: p", "p"),
        ] {
            let (label, parsed) = match_option(line).unwrap();
            assert_eq!(label, AnswerLabel::A, "line {line:?}");
            assert_eq!(parsed, text);
        }
        assert!(match_option("And so on").is_none());
        assert!(match_option("(A p").is_none());
        assert!(match_option("E) p").is_none());
    }

    #[test]
    fn answer_as_option_text_resolves_uniquely() {
        let report =
            parse_mcq_block("1. Pick one.\nA) red\nB) blue\nC) green\nD) gray\nAnswer: Blue");
        assert_eq!(report.items[0].answer_label, Some(AnswerLabel::B));
        assert!(report.items[0].complete);
    }

    #[test]
    fn ambiguous_answer_text_is_an_issue() {
        let report =
            parse_mcq_block("1. Pick one.\nA) red\nB) red\nC) green\nD) gray\nAnswer: red");
        assert_eq!(report.items[0].answer_label, None);
        assert!(!report.items[0].complete);
        assert!(report
            .issues
            .iter()
            .any(|i| i.kind == IssueKind::AmbiguousAnswer));
    }

    #[test]
    fn duplicate_option_label_skips_to_next_header() {
        let report = parse_mcq_block(
            "1. Broken?\nA) p\nA) q\nB) r\n2. Fine?\nA) p\nB) q\nC) r\nD) s\nAnswer: A",
        );
        assert_eq!(report.items.len(), 1);
        assert_eq!(report.items[0].index, 2);
        assert!(report.items[0].complete);
        assert!(report.issues.iter().any(|i| i.kind == IssueKind::Malformed));
    }

    #[test]
    fn multiline_stem_wraps_until_first_option() {
        let report = parse_mcq_block(
            "1. A very long stem\nthat wraps around\nA) p\nB) q\nC) r\nD) s\nAnswer: D",
        );
        assert_eq!(report.items[0].stem, "A very long stem that wraps around");
        assert!(report.items[0].complete);
    }

    #[test]
    fn explanation_runs_until_next_header() {
        let report = parse_mcq_block(
            "1. One?\nA) p\nB) q\nC) r\nD) s\nAnswer: A\nExplanation: first line\nsecond line\n2. Two?\nA) p\nB) q\nC) r\nD) s\nAnswer: B",
        );
        assert_eq!(report.items.len(), 2);
        assert_eq!(
            report.items[0].explanation.as_deref(),
            Some("first line\nsecond line")
        );
        assert_eq!(report.items[1].answer_label, Some(AnswerLabel::B));
        assert!(report.issues.is_empty());
    }

    #[test]
    fn render_golden_and_round_trip() {
        let item = complete_item();
        let rendered = render_mcq(&item).unwrap();
        assert_eq!(
            rendered,
            "1. What is X?\nA) p\nB) q\nC) r\nD) s\nAnswer: B\nExplanation: because.\n"
        );
        let report = parse_mcq_block(&rendered);
        assert_eq!(report.items, vec![item]);
        assert!(report.issues.is_empty());
        let again = render_mcq(&report.items[0]).unwrap();
        assert_eq!(again, rendered);
    }

    #[test]
    fn render_rejects_incomplete_items() {
        let mut item = complete_item();
        item.options.remove(&AnswerLabel::D);
        item.complete = false;
        assert!(matches!(
            render_mcq(&item),
            Err(McqError::IncompleteItem { .. })
        ));
    }

    #[test]
    fn concatenated_canonical_blocks_parse_to_concatenated_items() {
        let mut first = complete_item();
        let mut second = complete_item();
        second.index = 2;
        second.stem = "What is Y?".into();
        first.explanation = None;
        let text = format!(
            "{}{}",
            render_mcq(&first).unwrap(),
            render_mcq(&second).unwrap()
        );
        let report = parse_mcq_block(&text);
        assert_eq!(report.items, vec![first, second]);
        assert!(report.issues.is_empty());
    }

    #[test]
    fn validate_flags_count_duplicates_collisions_and_incomplete() {
        let clean = parse_mcq_block(
            "1. One?\nA) p\nB) q\nC) r\nD) s\nAnswer: A\n2. Two?\nA) w\nB) x\nC) y\nD) z\nAnswer: B",
        );
        assert!(validate_items(&clean, 2).is_empty());
        assert!(validate_items(&clean, 4)
            .iter()
            .any(|i| i.kind == IssueKind::CountMismatch));

        let duplicated = parse_mcq_block(
            "1. Same one?\nA) p\nB) q\nC) r\nD) s\nAnswer: A\n2. same ONE?\nA) w\nB) x\nC) y\nD) z\nAnswer: B",
        );
        assert!(validate_items(&duplicated, 2)
            .iter()
            .any(|i| i.kind == IssueKind::DuplicateStem));

        let colliding = parse_mcq_block("1. One?\nA) p\nB) q\nC) P\nD) s\nAnswer: A");
        assert!(validate_items(&colliding, 1)
            .iter()
            .any(|i| i.kind == IssueKind::OptionCollision));

        let truncated = parse_mcq_block("1. One?\nA) p");
        assert!(validate_items(&truncated, 1)
            .iter()
            .any(|i| i.kind == IssueKind::Incomplete));
    }

    #[test]
    fn consumed_chars_covers_the_whole_input() {
        let text = "1. What?\nA) p\nB) q";
        assert_eq!(parse_mcq_block(text).consumed_chars, text.chars().count());
    }
}
