//! Pipeline toolkit for automatic question and answer generation from
//! reading-comprehension corpora: preprocessing, prompt construction,
//! generation through an HTTP inference service, structured MCQ parsing,
//! and an evaluation-metric suite.

pub mod corpus;
pub mod inference;
pub mod manifest;
pub mod mcq;
pub mod metrics;
pub mod prompting;
pub mod train_config;

pub mod cli;
