//! Question answering: prompt construction, program generation, execution,
//! scoring and benchmark reports.

mod bench;
mod llm;
mod prompt;
mod score;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{
    answer_question, load_suite, run_benchmark, run_benchmark_with, Attempt, BenchMode,
    BenchOptions, BenchQuestion, BenchReport, Failure, ProgramSource, ProviderFactory,
    QuestionResult, Suite, Summary, Timing,
};
pub use llm::{
    ask, complete, extract_last_code_block, replay_key, replay_path, ChatEndpointConfig,
    EndpointMode, DEFAULT_KEY_ENV_VAR,
};
pub use prompt::{build_prompt, InContextExample, PromptTemplate, EXAMPLE_COUNT};
pub use score::{score_answer, Expected, ExpectedItem, Outcome, Score};

use crate::geometry::CadModel;
use crate::segcad::{OracleProvider, RemoteProvider, SegmentationProvider};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("chat endpoint failed: {0}")]
    Endpoint(String),
    #[error("completion contains no fenced code block")]
    NoCodeBlock,
    #[error("no recorded completion at {0}")]
    MissingReplay(PathBuf),
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed suite {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("question `{id}` references missing file {path}")]
    MissingFile { id: String, path: PathBuf },
    #[error("question `{id}` has no reference program")]
    MissingProgram { id: String },
    #[error("cannot load model {path}: {message}")]
    Model { path: PathBuf, message: String },
}

/// Which segmentation backend to use for each model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    /// Ground-truth masks from the model's labels.
    Oracle,
    /// HTTP segmentation service at the given base URL.
    Remote(String),
}

impl ProviderSpec {
    pub fn build(&self, model: &CadModel) -> Box<dyn SegmentationProvider> {
        match self {
            ProviderSpec::Oracle => Box::new(OracleProvider::from_model(model)),
            ProviderSpec::Remote(url) => Box::new(RemoteProvider::new(url)),
        }
    }
}

impl std::str::FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ProviderSpec::Oracle),
            _ => match s.strip_prefix("remote:") {
                Some(url) if !url.is_empty() => Ok(ProviderSpec::Remote(url.to_string())),
                _ => Err(format!(
                    "unknown provider `{s}`; use `oracle` or `remote:URL`"
                )),
            },
        }
    }
}
