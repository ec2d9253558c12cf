//! Corpus ingestion, end-to-end runs, metric aggregation and report output.

mod config;
mod corpus;
mod metrics;
mod report;
mod runner;

use thiserror::Error;

pub use config::RunConfig;
pub use corpus::{load_corpus, parse_corpus, write_corpus, CorpusRecord};
pub use metrics::{mean, rouge1_f};
pub use report::{load_traces, write_outputs, write_report, ReportRow, RunReport};
pub use runner::{
    evaluate_corpus, run_document, DocumentTrace, Method, MethodDetail, MethodOutput, MethodRecord, StepRecord,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("text has no tokens")]
    EmptyText,
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
