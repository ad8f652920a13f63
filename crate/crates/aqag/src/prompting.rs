//! Prompt construction: the two shipped system prompts, few-shot training
//! examples, generation prompts, and the Llama-2 chat wire format.

use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerLabel, RaceRecord};

/// The two question styles the generator is prompted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptStyle {
    FillInBlank,
    OpenEnded,
}

impl PromptStyle {
    fn question_noun(self, count: usize) -> String {
        let kind = match self {
            PromptStyle::FillInBlank => "fill in the blank question",
            PromptStyle::OpenEnded => "multiple choice question",
        };
        if count == 1 {
            format!("{count} {kind}")
        } else {
            format!("{count} {kind}s")
        }
    }
}

/// A structured system+user prompt renderable to the Llama-2 chat format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system_text: String,
    pub user_text: String,
    pub style: PromptStyle,
}

impl ChatPrompt {
    /// Replaces the system instruction (CLI prompt-file override).
    pub fn with_system_text(mut self, system_text: impl Into<String>) -> Self {
        self.system_text = system_text.into();
        self
    }
}

/// One solved question used to show the model the expected shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub article: String,
    pub question: String,
    pub options: [String; 4],
    pub answer_label: AnswerLabel,
    pub answer_text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("record {id:?} is not a complete example: {what}")]
    IncompleteRecord { id: String, what: String },
    #[error("article is empty")]
    EmptyArticle,
    #[error("question_count must be at least 1")]
    ZeroQuestionCount,
    #[error("chat text lacks the {0} delimiter")]
    MissingDelimiter(&'static str),
}

impl FewShotExample {
    /// Builds an example from a filtered corpus record.
    pub fn from_record(record: &RaceRecord) -> Result<Self, PromptError> {
        let incomplete = |what: &str| PromptError::IncompleteRecord {
            id: record.id.clone(),
            what: what.to_string(),
        };
        let answer_label = record
            .answer_label
            .ok_or_else(|| incomplete("answer_label"))?;
        let options: [String; 4] = record
            .options
            .clone()
            .try_into()
            .map_err(|_| incomplete("four options"))?;
        let answer_text = options[answer_label.index()].clone();
        Ok(Self {
            article: record.article.clone(),
            question: record.question.clone(),
            options,
            answer_label,
            answer_text,
        })
    }

    fn render(&self) -> String {
        render_example(
            &self.article,
            &self.question,
            &self.options,
            self.answer_label,
        )
    }
}

static SYSTEM_FIB: &str = include_str!("../prompts/system_fib.txt");
static SYSTEM_OPEN: &str = include_str!("../prompts/system_open.txt");

/// The shipped instruction text for a style. The text states the required
/// output format so generated blocks parse cleanly.
pub fn default_system_prompt(style: PromptStyle) -> &'static str {
    match style {
        PromptStyle::FillInBlank => SYSTEM_FIB.trim_end(),
        PromptStyle::OpenEnded => SYSTEM_OPEN.trim_end(),
    }
}

fn render_example(
    article: &str,
    question: &str,
    options: &[String; 4],
    answer: AnswerLabel,
) -> String {
    let mut out = String::new();
    out.push_str("Article: ");
    out.push_str(article);
    out.push_str("\n\nQuestion: ");
    out.push_str(question);
    out.push('\n');
    for (label, option) in AnswerLabel::ALL.iter().zip(options) {
        out.push_str(&format!("{label}) {option}\n"));
    }
    out.push_str(&format!("Answer: {answer}"));
    out
}

/// Serializes one record as a training example: article block, question,
/// `A) … D)` options in order, then the `Answer:` line. Deterministic.
pub fn build_training_example(record: &RaceRecord) -> Result<String, PromptError> {
    Ok(FewShotExample::from_record(record)?.render())
}

/// Builds the generation prompt for one article: few-shot examples in input
/// order, then the target article, then the instruction naming the question
/// count and the required format.
pub fn build_generation_prompt(
    article: &str,
    style: PromptStyle,
    few_shots: &[FewShotExample],
    question_count: usize,
) -> Result<ChatPrompt, PromptError> {
    if article.trim().is_empty() {
        return Err(PromptError::EmptyArticle);
    }
    if question_count == 0 {
        return Err(PromptError::ZeroQuestionCount);
    }
    let mut user_text = String::new();
    for shot in few_shots {
        user_text.push_str(&shot.render());
        user_text.push_str("\n\n");
    }
    user_text.push_str("Article: ");
    user_text.push_str(article);
    user_text.push_str(&format!(
        "\n\nWrite {} about the article above, in the required format.",
        style.question_noun(question_count)
    ));
    Ok(ChatPrompt {
        system_text: default_system_prompt(style).to_string(),
        user_text,
        style,
    })
}

const BOS_INST_OPEN: &str = "<s>[INST] ";
const INST_CLOSE: &str = " [/INST]";
const SYS_OPEN: &str = "<<SYS>>\n";
const SYS_CLOSE: &str = "\n<</SYS>>\n\n";

/// Renders a prompt in the Llama-2 chat format:
/// `<s>[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{user} [/INST]`.
/// An empty system text omits the whole `<<SYS>>` block.
pub fn render_llama_chat(prompt: &ChatPrompt) -> String {
    let mut out = String::with_capacity(prompt.system_text.len() + prompt.user_text.len() + 40);
    out.push_str(BOS_INST_OPEN);
    if !prompt.system_text.is_empty() {
        out.push_str(SYS_OPEN);
        out.push_str(&prompt.system_text);
        out.push_str(SYS_CLOSE);
    }
    out.push_str(&prompt.user_text);
    out.push_str(INST_CLOSE);
    out
}

/// Inverse of [`render_llama_chat`] on its image: recovers
/// `(system_text, user_text)`. Component texts that themselves embed the
/// chat markers are outside the round-trippable domain.
pub fn unrender_llama_chat(text: &str) -> Result<(String, String), PromptError> {
    let inner = text
        .strip_prefix(BOS_INST_OPEN)
        .ok_or(PromptError::MissingDelimiter("[INST]"))?;
    let inner = inner
        .strip_suffix(INST_CLOSE)
        .ok_or(PromptError::MissingDelimiter("[/INST]"))?;
    if let Some(after_open) = inner.strip_prefix(SYS_OPEN) {
        let close = after_open
            .find(SYS_CLOSE)
            .ok_or(PromptError::MissingDelimiter("<</SYS>>"))?;
        let system = &after_open[..close];
        let user = &after_open[close + SYS_CLOSE.len()..];
        Ok((system.to_string(), user.to_string()))
    } else {
        Ok((String::new(), inner.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> RaceRecord {
        RaceRecord {
            id: "p1".into(),
            article: "Maya kept bees on the roof.".into(),
            question: "Where did Maya keep bees?".into(),
            options: vec![
                "In the garden".into(),
                "On the roof".into(),
                "At school".into(),
                "By the river".into(),
            ],
            answer_label: Some(AnswerLabel::B),
            correct_text: Some("On the roof".into()),
            question_type: None,
        }
    }

    #[test]
    fn default_prompts_name_their_style_and_differ() {
        let fib = default_system_prompt(PromptStyle::FillInBlank);
        let open = default_system_prompt(PromptStyle::OpenEnded);
        assert!(fib.contains("fill in the blank"));
        assert!(open.contains("multiple choice"));
        assert_ne!(fib, open);
    }

    #[test]
    fn training_example_golden() {
        let expected = "Article: Maya kept bees on the roof.\n\n\
                        Question: Where did Maya keep bees?\n\
                        A) In the garden\n\
                        B) On the roof\n\
                        C) At school\n\
                        D) By the river\n\
                        Answer: B";
        assert_eq!(build_training_example(&sample_record()).unwrap(), expected);
    }

    #[test]
    fn training_example_is_deterministic_and_names_the_answer() {
        let record = sample_record();
        let first = build_training_example(&record).unwrap();
        let second = build_training_example(&record).unwrap();
        assert_eq!(first, second);
        let mut with_c = record;
        with_c.answer_label = Some(AnswerLabel::C);
        assert!(build_training_example(&with_c)
            .unwrap()
            .contains("Answer: C"));
    }

    #[test]
    fn generation_prompt_orders_shots_before_article() {
        let shot = FewShotExample::from_record(&sample_record()).unwrap();
        let prompt = build_generation_prompt(
            "The tide pools held starfish.",
            PromptStyle::OpenEnded,
            &[shot.clone(), shot.clone()],
            4,
        )
        .unwrap();
        let first_shot = prompt.user_text.find(&shot.question).unwrap();
        let article = prompt
            .user_text
            .find("The tide pools held starfish.")
            .unwrap();
        assert!(first_shot < article);
        assert_eq!(prompt.user_text.matches(&shot.question as &str).count(), 2);
        assert!(prompt.user_text.contains("4 multiple choice questions"));
    }

    #[test]
    fn generation_prompt_with_zero_shots_and_singular_count() {
        let prompt = build_generation_prompt("A story.", PromptStyle::FillInBlank, &[], 1).unwrap();
        assert!(prompt.user_text.starts_with("Article: A story."));
        assert!(prompt.user_text.contains("1 fill in the blank question"));
        assert!(!prompt.user_text.contains("questions"));
    }

    #[test]
    fn generation_prompt_rejects_empty_article_and_zero_count() {
        assert!(matches!(
            build_generation_prompt("  ", PromptStyle::OpenEnded, &[], 4),
            Err(PromptError::EmptyArticle)
        ));
        assert!(matches!(
            build_generation_prompt("text", PromptStyle::OpenEnded, &[], 0),
            Err(PromptError::ZeroQuestionCount)
        ));
    }

    #[test]
    fn styles_embed_different_system_prompts() {
        let fib = build_generation_prompt("text", PromptStyle::FillInBlank, &[], 2).unwrap();
        let open = build_generation_prompt("text", PromptStyle::OpenEnded, &[], 2).unwrap();
        assert_ne!(fib.system_text, open.system_text);
    }

    #[test]
    fn render_golden_with_system() {
        let prompt = ChatPrompt {
            system_text: "S".into(),
            user_text: "U".into(),
            style: PromptStyle::OpenEnded,
        };
        assert_eq!(
            render_llama_chat(&prompt),
            "<s>[INST] <<SYS>>\nS\n<</SYS>>\n\nU [/INST]"
        );
    }

    #[test]
    fn render_omits_empty_system_block() {
        let prompt = ChatPrompt {
            system_text: String::new(),
            user_text: "U".into(),
            style: PromptStyle::OpenEnded,
        };
        assert_eq!(render_llama_chat(&prompt), "<s>[INST] U [/INST]");
    }

    #[test]
    fn unrender_inverts_render() {
        for (system, user) in [
            ("S", "U"),
            ("", "U"),
            ("line one\nline two", "ask me\nanything"),
        ] {
            let prompt = ChatPrompt {
                system_text: system.into(),
                user_text: user.into(),
                style: PromptStyle::FillInBlank,
            };
            let rendered = render_llama_chat(&prompt);
            assert_eq!(
                unrender_llama_chat(&rendered).unwrap(),
                (system.to_string(), user.to_string())
            );
        }
    }

    #[test]
    fn unrender_rejects_undelimited_text() {
        assert!(matches!(
            unrender_llama_chat("hello"),
            Err(PromptError::MissingDelimiter("[INST]"))
        ));
        assert!(matches!(
            unrender_llama_chat("<s>[INST] hello"),
            Err(PromptError::MissingDelimiter("[/INST]"))
        ));
    }
}
