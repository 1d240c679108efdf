//! Benchmark suites and reports.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::llm::{ask, ChatEndpointConfig};
use super::prompt::PromptTemplate;
use super::score::{score_answer, Expected, Outcome};
use super::{ProviderSpec, QaError, SuiteError};
use crate::geometry::{load_model, CadModel, LengthUnit};
use crate::query::{parse, Answer, ErrorCategory, Evaluator};
use crate::render::Scene;
use crate::segcad::{PipelineConfig, SegmentationProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchQuestion {
    pub id: String,
    /// Relative paths resolve against the suite file's directory.
    pub model_path: PathBuf,
    pub question: String,
    pub expected: Expected,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_program: Option<PathBuf>,
    /// Unit of the model file; the sidecar or millimeters otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<LengthUnit>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub path: PathBuf,
    pub questions: Vec<BenchQuestion>,
}

impl Suite {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn model_path(&self, q: &BenchQuestion) -> PathBuf {
        self.resolve(&q.model_path)
    }

    pub fn reference_path(&self, q: &BenchQuestion) -> Option<PathBuf> {
        q.reference_program.as_deref().map(|p| self.resolve(p))
    }
}

/// Reads a suite file (a JSON array of questions) and checks that every
/// referenced file exists.
pub fn load_suite(path: &Path) -> Result<Suite, SuiteError> {
    let text = std::fs::read_to_string(path).map_err(|e| SuiteError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let questions: Vec<BenchQuestion> =
        serde_json::from_str(&text).map_err(|e| SuiteError::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let suite = Suite {
        path: path.to_path_buf(),
        questions,
    };
    let mut ids = std::collections::BTreeSet::new();
    for q in &suite.questions {
        if !ids.insert(q.id.as_str()) {
            return Err(SuiteError::Malformed {
                path: path.to_path_buf(),
                message: format!("duplicate question id `{}`", q.id),
            });
        }
        if q.expected.tolerance() < 0.0 {
            return Err(SuiteError::Malformed {
                path: path.to_path_buf(),
                message: format!("question `{}` has a negative tolerance", q.id),
            });
        }
        let model = suite.model_path(q);
        if !model.is_file() {
            return Err(SuiteError::MissingFile {
                id: q.id.clone(),
                path: model,
            });
        }
        if let Some(p) = suite.reference_path(q) {
            if !p.is_file() {
                return Err(SuiteError::MissingFile {
                    id: q.id.clone(),
                    path: p,
                });
            }
        }
    }
    Ok(suite)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchMode {
    /// Run each question's reference program.
    Golden,
    /// Ask the endpoint (live or replay) for a program.
    Generated(ChatEndpointConfig),
}

impl BenchMode {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMode::Golden => "golden",
            BenchMode::Generated(cfg) => match cfg.mode {
                super::llm::EndpointMode::Live => "live",
                super::llm::EndpointMode::Replay { .. } => "replay",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub category: ErrorCategory,
    pub message: String,
}

/// Result of running the pipeline for one question, before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub program: Option<String>,
    pub result: Result<Answer, Failure>,
}

/// Where the program for a question comes from.
pub enum ProgramSource<'a> {
    Given(&'a str),
    Generated {
        endpoint: &'a ChatEndpointConfig,
        template: &'a PromptTemplate,
    },
}

fn ask_failure(e: QaError) -> Failure {
    Failure {
        category: ErrorCategory::Syntax,
        message: e.to_string(),
    }
}

/// Obtains a program, parses it and evaluates it. The failing stage decides
/// the category: extraction and parsing give Syntax, evaluation gives the
/// category of the query error.
pub fn answer_question(
    question: &str,
    source: ProgramSource<'_>,
    scene: &Scene,
    provider: &dyn SegmentationProvider,
    cfg: &PipelineConfig,
) -> Attempt {
    let program = match source {
        ProgramSource::Given(text) => text.to_string(),
        ProgramSource::Generated { endpoint, template } => {
            match ask(question, endpoint, template) {
                Ok(p) => p,
                Err(e) => {
                    return Attempt {
                        program: None,
                        result: Err(ask_failure(e)),
                    }
                }
            }
        }
    };
    let result = parse(&program)
        .and_then(|p| Evaluator::new(scene, provider, cfg).run(&p))
        .map_err(|e| Failure {
            category: e.category(),
            message: e.to_string(),
        });
    Attempt {
        program: Some(program),
        result,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub question: String,
    pub outcome: Outcome,
    /// Set exactly when the outcome is not Correct.
    pub category: Option<ErrorCategory>,
    pub answer: Option<serde_json::Value>,
    pub expected: Expected,
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub correct: usize,
    pub partial: usize,
    pub wrong: usize,
    /// Non-correct results per category; every category is listed.
    pub categories: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub per_question_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: String,
    pub results: Vec<QuestionResult>,
    pub summary: Summary,
    pub timing: Timing,
}

impl BenchReport {
    fn from_results(mode: &str, results: Vec<QuestionResult>, timing: Timing) -> Self {
        let mut categories: BTreeMap<String, usize> = ErrorCategory::ALL
            .iter()
            .map(|c| (c.name().to_string(), 0))
            .collect();
        for r in &results {
            if let Some(c) = r.category {
                *categories.get_mut(c.name()).expect("all categories listed") += 1;
            }
        }
        let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
        let summary = Summary {
            total: results.len(),
            correct: count(Outcome::Correct),
            partial: count(Outcome::Partial),
            wrong: count(Outcome::Wrong),
            categories,
        };
        Self {
            mode: mode.to_string(),
            results,
            summary,
            timing,
        }
    }

    /// Equality ignoring timing.
    pub fn same_results(&self, other: &BenchReport) -> bool {
        self.mode == other.mode && self.results == other.results && self.summary == other.summary
    }

    pub fn to_text(&self) -> String {
        let s = &self.summary;
        let pct = |n: usize| {
            if s.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / s.total as f64
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}   questions: {}", self.mode, s.total);
        let _ = writeln!(out, "{:<16}{:>7}{:>9}", "", "count", "share");
        let mut row = |name: &str, n: usize| {
            let _ = writeln!(out, "{name:<16}{n:>7}{:>8.1}%", pct(n));
        };
        row("Correct", s.correct);
        row("Partial", s.partial);
        row("Wrong", s.wrong);
        for c in ErrorCategory::ALL {
            row(&format!("  {}", c.name()), s.categories[c.name()]);
        }
        let _ = writeln!(out);
        for r in &self.results {
            let cat = r.category.map(|c| c.name()).unwrap_or("-");
            let _ = writeln!(
                out,
                "{:<24} {:<8} {:<14} {}",
                r.id,
                format!("{:?}", r.outcome),
                cat,
                r.note.as_deref().unwrap_or("")
            );
        }
        let _ = writeln!(out, "\ntotal time: {:.0} ms", self.timing.total_ms);
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("report.json"), json)?;
        std::fs::write(dir.join("report.txt"), self.to_text())
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub workers: usize,
    pub template: PromptTemplate,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            template: PromptTemplate::default(),
        }
    }
}

fn score_attempt(q: &BenchQuestion, attempt: Attempt) -> QuestionResult {
    let (outcome, category, answer, note) = match attempt.result {
        Ok(answer) => {
            let score = score_answer(&answer.value, &q.expected);
            let category = (score.outcome != Outcome::Correct).then_some(ErrorCategory::Masks);
            (
                score.outcome,
                category,
                Some(answer.value.to_json()),
                score.note,
            )
        }
        Err(f) => (Outcome::Wrong, Some(f.category), None, Some(f.message)),
    };
    QuestionResult {
        id: q.id.clone(),
        question: q.question.clone(),
        outcome,
        category,
        answer,
        expected: q.expected.clone(),
        program: attempt.program,
        note,
    }
}

/// Builds a fresh provider for a model.
pub type ProviderFactory<'a> = &'a (dyn Fn(&CadModel) -> Box<dyn SegmentationProvider> + Sync);

/// Runs every question in isolation and scores it. Models are loaded before
/// any question runs; a model that fails to load is a suite error.
pub fn run_benchmark(
    suite: &Suite,
    mode: &BenchMode,
    provider: &ProviderSpec,
    cfg: &PipelineConfig,
    options: &BenchOptions,
) -> Result<BenchReport, SuiteError> {
    run_benchmark_with(suite, mode, &|m: &CadModel| provider.build(m), cfg, options)
}

/// [`run_benchmark`] with an arbitrary provider factory.
pub fn run_benchmark_with(
    suite: &Suite,
    mode: &BenchMode,
    provider: ProviderFactory<'_>,
    cfg: &PipelineConfig,
    options: &BenchOptions,
) -> Result<BenchReport, SuiteError> {
    let started = Instant::now();
    let mut scenes: HashMap<(PathBuf, Option<LengthUnit>), Arc<Scene>> = HashMap::new();
    let mut programs: Vec<Option<String>> = Vec::new();
    for q in &suite.questions {
        let path = suite.model_path(q);
        let key = (path.clone(), q.units);
        if let Entry::Vacant(slot) = scenes.entry(key) {
            let model = load_model(&path, q.units).map_err(|e| SuiteError::Model {
                path: path.clone(),
                message: e.to_string(),
            })?;
            slot.insert(Arc::new(Scene::new(Arc::new(model))));
        }
        programs.push(match (mode, suite.reference_path(q)) {
            (BenchMode::Golden, None) => {
                return Err(SuiteError::MissingProgram { id: q.id.clone() })
            }
            (BenchMode::Golden, Some(p)) => {
                Some(std::fs::read_to_string(&p).map_err(|e| SuiteError::Io {
                    path: p,
                    message: e.to_string(),
                })?)
            }
            (BenchMode::Generated(_), _) => None,
        });
    }

    let run_one = |(q, program): (&BenchQuestion, &Option<String>)| -> (QuestionResult, f64) {
        let t0 = Instant::now();
        let scene = &scenes[&(suite.model_path(q), q.units)];
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let provider = provider(scene.model());
            let source = match (mode, program) {
                (BenchMode::Generated(endpoint), _) => ProgramSource::Generated {
                    endpoint,
                    template: &options.template,
                },
                (BenchMode::Golden, Some(p)) => ProgramSource::Given(p),
                (BenchMode::Golden, None) => unreachable!("checked before execution"),
            };
            answer_question(&q.question, source, scene, provider.as_ref(), cfg)
        }));
        let attempt = outcome.unwrap_or_else(|panic| Attempt {
            program: program.clone(),
            result: Err(Failure {
                category: ErrorCategory::CadInterface,
                message: format!(
                    "internal error: {}",
                    panic
                        .downcast_ref::<String>()
                        .map(String::as_str)
                        .or_else(|| panic.downcast_ref::<&str>().copied())
                        .unwrap_or("panic")
                ),
            }),
        });
        (score_attempt(q, attempt), t0.elapsed().as_secs_f64() * 1e3)
    };

    let pairs: Vec<(&BenchQuestion, &Option<String>)> =
        suite.questions.iter().zip(&programs).collect();
    let scored: Vec<(QuestionResult, f64)> = if options.workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| SuiteError::Malformed {
                path: suite.path.clone(),
                message: format!("cannot start workers: {e}"),
            })?
            .install(|| pairs.into_par_iter().map(run_one).collect())
    } else {
        pairs.into_iter().map(run_one).collect()
    };

    let per_question_ms = scored.iter().map(|(r, ms)| (r.id.clone(), *ms)).collect();
    let results = scored.into_iter().map(|(r, _)| r).collect();
    Ok(BenchReport::from_results(
        mode.name(),
        results,
        Timing {
            total_ms: started.elapsed().as_secs_f64() * 1e3,
            per_question_ms,
        },
    ))
}
