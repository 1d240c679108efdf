mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::json;

use cadquery_core::fixtures;
use cadquery_core::geometry::CadModel;
use cadquery_core::qa::{
    answer_question, load_suite, replay_path, run_benchmark, run_benchmark_with, BenchMode,
    BenchOptions, BenchReport, ChatEndpointConfig, EndpointMode, Outcome, ProgramSource,
    PromptTemplate, ProviderSpec, SuiteError,
};
use cadquery_core::query::ErrorCategory;
use cadquery_core::render::RgbImage;
use cadquery_core::segcad::{OracleProvider, ProviderError, ScoredMask, SegmentationProvider};
use common::{small_config, MockServer};

fn shipped_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn shipped_fixtures_match_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    fixtures::write_benchmark(dir.path()).unwrap();
    let generated = files_under(dir.path());
    let shipped = files_under(&shipped_dir());
    assert_eq!(
        generated.keys().collect::<Vec<_>>(),
        shipped.keys().collect::<Vec<_>>(),
        "regenerate with `cadquery fixtures --out crates/core/fixtures`"
    );
    for (path, bytes) in &generated {
        assert!(
            &shipped[path] == bytes,
            "{} differs from the generator output",
            path.display()
        );
    }
}

fn write_suite(dir: &Path, questions: serde_json::Value) -> PathBuf {
    let path = dir.join("suite.json");
    std::fs::write(&path, questions.to_string()).unwrap();
    path
}

fn model_path(name: &str) -> String {
    shipped_dir()
        .join("models")
        .join(format!("{name}.obj"))
        .display()
        .to_string()
}

#[test]
fn suite_problems_are_reported_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "[{").unwrap();
    assert!(matches!(load_suite(&p), Err(SuiteError::Malformed { .. })));
    assert!(matches!(
        load_suite(&dir.path().join("absent.json")),
        Err(SuiteError::Io { .. })
    ));

    let missing_model = write_suite(
        dir.path(),
        json!([{"id": "a", "model_path": "nope.obj", "question": "q", "expected": {"type": "count", "value": 1}}]),
    );
    assert!(matches!(
        load_suite(&missing_model),
        Err(SuiteError::MissingFile { .. })
    ));

    let q = json!({"id": "a", "model_path": model_path("plate_four_holes"), "question": "q", "expected": {"type": "count", "value": 1}});
    let dup = write_suite(dir.path(), json!([q, q]));
    assert!(matches!(
        load_suite(&dup),
        Err(SuiteError::Malformed { .. })
    ));

    let missing_program = write_suite(
        dir.path(),
        json!([{"id": "a", "model_path": model_path("plate_four_holes"), "question": "q",
                "expected": {"type": "count", "value": 1}, "reference_program": "nope.cadq"}]),
    );
    assert!(matches!(
        load_suite(&missing_program),
        Err(SuiteError::MissingFile { .. })
    ));
}

struct Counted {
    inner: OracleProvider,
    calls: Arc<AtomicUsize>,
}

impl SegmentationProvider for Counted {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        t: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.segment(image, prompt, t)
    }
}

#[test]
fn golden_mode_requires_every_reference_program() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.cadq"),
        "solution = count(search(\"hole\"));",
    )
    .unwrap();
    let suite = write_suite(
        dir.path(),
        json!([
            {"id": "a", "model_path": model_path("plate_four_holes"), "question": "How many holes?",
             "expected": {"type": "count", "value": 4}, "reference_program": "a.cadq"},
            {"id": "b", "model_path": model_path("plate_four_holes"), "question": "How many?",
             "expected": {"type": "count", "value": 4}}
        ]),
    );
    let suite = load_suite(&suite).unwrap();
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let factory = move |m: &CadModel| -> Box<dyn SegmentationProvider> {
        Box::new(Counted {
            inner: OracleProvider::from_model(m),
            calls: Arc::clone(&c),
        })
    };
    let err = run_benchmark_with(
        &suite,
        &BenchMode::Golden,
        &factory,
        &small_config(),
        &BenchOptions::default(),
    );
    assert!(matches!(err, Err(SuiteError::MissingProgram { ref id }) if id == "b"));
    assert_eq!(calls.load(Ordering::SeqCst), 0);
}

struct Panicking;

impl SegmentationProvider for Panicking {
    fn segment(&self, _: &RgbImage, _: &str, _: f64) -> Result<Vec<ScoredMask>, ProviderError> {
        panic!("backend exploded")
    }
}

#[test]
fn a_panicking_question_does_not_stop_the_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.cadq"),
        "solution = count(search(\"hole\"));",
    )
    .unwrap();
    std::fs::write(dir.path().join("b.cadq"), "solution = x(extents(model()));").unwrap();
    let suite = write_suite(
        dir.path(),
        json!([
            {"id": "a", "model_path": model_path("plate_four_holes"), "question": "How many holes?",
             "expected": {"type": "count", "value": 4}, "reference_program": "a.cadq"},
            {"id": "b", "model_path": model_path("plate_four_holes"), "question": "How wide?",
             "expected": {"type": "number", "value": 60.0, "tolerance": 0.01}, "reference_program": "b.cadq"}
        ]),
    );
    let suite = load_suite(&suite).unwrap();
    let factory = |_: &CadModel| -> Box<dyn SegmentationProvider> { Box::new(Panicking) };
    let report = run_benchmark_with(
        &suite,
        &BenchMode::Golden,
        &factory,
        &small_config(),
        &BenchOptions::default(),
    )
    .unwrap();
    assert_eq!(report.results[0].outcome, Outcome::Wrong);
    assert_eq!(
        report.results[0].category,
        Some(ErrorCategory::CadInterface)
    );
    assert!(report.results[0]
        .note
        .as_deref()
        .unwrap()
        .contains("internal error"));
    assert_eq!(report.results[1].outcome, Outcome::Correct);
    assert_eq!(report.summary.categories["CAD-Interface"], 1);
}

#[test]
fn replay_mode_never_touches_the_network() {
    let server = MockServer::start(|_| (500, "{}".into()));
    let suite = load_suite(&shipped_dir().join("suite.json")).unwrap();
    let endpoint = ChatEndpointConfig {
        base_url: server.url.clone(),
        ..ChatEndpointConfig::replay(shipped_dir().join("replays"))
    };
    let report = run_benchmark(
        &suite,
        &BenchMode::Generated(endpoint),
        &ProviderSpec::Oracle,
        &small_config(),
        &BenchOptions::default(),
    )
    .unwrap();
    assert_eq!(report.mode, "replay");
    assert_eq!(report.summary.correct, suite.questions.len());
    assert_eq!(server.connection_count(), 0);
}

#[test]
fn live_mode_posts_the_prompt_and_runs_the_returned_program() {
    let server = MockServer::start(|req| {
        let body: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
        let prompt = body["messages"][0]["content"].as_str().unwrap();
        let program = if prompt.contains("How wide is the plate?") {
            "solution = x(extents(model()));"
        } else {
            "solution = 0;"
        };
        let content = format!("Measure the model.\n```\n{program}\n```");
        (
            200,
            json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
                .to_string(),
        )
    });
    let key_var = "CADQUERY_TEST_LIVE_KEY";
    std::env::set_var(key_var, "secret-token");
    let endpoint = ChatEndpointConfig {
        base_url: format!("{}/v1", server.url),
        api_key_env_var: key_var.into(),
        mode: EndpointMode::Live,
        ..ChatEndpointConfig::default()
    };
    let s = common::scene(&fixtures::plate_with_four_holes());
    let oracle = OracleProvider::from_model(s.model());
    let template = PromptTemplate::default();
    let attempt = answer_question(
        "How wide is the plate?",
        ProgramSource::Generated {
            endpoint: &endpoint,
            template: &template,
        },
        &s,
        &oracle,
        &small_config(),
    );
    assert_eq!(
        attempt.program.as_deref(),
        Some("solution = x(extents(model()));")
    );
    assert_eq!(
        attempt.result.unwrap().value,
        cadquery_core::query::Value::mm(60.0)
    );

    let req = &server.requests()[0];
    assert_eq!(req.path, "/v1/chat/completions");
    assert_eq!(req.header("authorization"), Some("Bearer secret-token"));
    let body: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["model"], endpoint.model_name.as_str());
}

#[test]
fn failing_stages_map_to_categories() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("prose", "There are four holes.", ErrorCategory::Syntax),
        (
            "broken",
            "```\nsolution = count(search(\"hole\");\n```",
            ErrorCategory::Syntax,
        ),
        (
            "unknown",
            "```\nsolution = hole_count(model());\n```",
            ErrorCategory::Reasoning,
        ),
        (
            "unsupported",
            "```\nsolution = volume(model());\n```",
            ErrorCategory::CadInterface,
        ),
        (
            "units",
            "```\nsolution = mm(1) + m(1);\n```",
            ErrorCategory::Reasoning,
        ),
    ];
    for (q, completion, _) in &cases {
        std::fs::write(replay_path(dir.path(), q), completion).unwrap();
    }
    let endpoint = ChatEndpointConfig::replay(dir.path());
    let template = PromptTemplate::default();
    let s = common::scene(&fixtures::unit_cube());
    let oracle = OracleProvider::from_model(s.model());
    for (q, _, category) in cases {
        let attempt = answer_question(
            q,
            ProgramSource::Generated {
                endpoint: &endpoint,
                template: &template,
            },
            &s,
            &oracle,
            &small_config(),
        );
        assert_eq!(attempt.result.unwrap_err().category, category, "{q}");
    }
    let missing = answer_question(
        "never recorded",
        ProgramSource::Generated {
            endpoint: &endpoint,
            template: &template,
        },
        &s,
        &oracle,
        &small_config(),
    );
    assert!(missing
        .result
        .unwrap_err()
        .message
        .contains("no recorded completion"));
}

#[test]
fn reports_are_written_and_read_back() {
    let suite = load_suite(&shipped_dir().join("suite.json")).unwrap();
    let run = |workers| {
        run_benchmark(
            &suite,
            &BenchMode::Golden,
            &ProviderSpec::Oracle,
            &small_config(),
            &BenchOptions {
                workers,
                ..BenchOptions::default()
            },
        )
        .unwrap()
    };
    let serial = run(1);
    let parallel = run(2);
    assert!(serial.same_results(&parallel));
    assert_eq!(serial.summary.correct, 10);

    let dir = tempfile::tempdir().unwrap();
    serial.write(dir.path()).unwrap();
    let back: BenchReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(back.same_results(&serial));
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    for row in [
        "Correct",
        "Partial",
        "Wrong",
        "Syntax",
        "Reasoning",
        "Masks",
        "CAD-Interface",
    ] {
        assert!(text.contains(row), "{row}");
    }
}

#[test]
fn provider_spec_parsing() {
    assert_eq!(
        "oracle".parse::<ProviderSpec>().unwrap(),
        ProviderSpec::Oracle
    );
    assert_eq!(
        "remote:http://h:1".parse::<ProviderSpec>().unwrap(),
        ProviderSpec::Remote("http://h:1".into())
    );
    assert!("remote:".parse::<ProviderSpec>().is_err());
    assert!("sam".parse::<ProviderSpec>().is_err());
}

#[test]
fn programs_reach_the_model_only_through_the_provider() {
    let s = common::scene(&fixtures::plate_with_four_holes());
    let provider = common::CountingProvider::new(OracleProvider::from_model(s.model()));
    let program = cadquery_core::query::parse(
        "let a = search(\"Hole\");\nlet b = search(\"hole \");\nsolution = count(a) + count(b);",
    )
    .unwrap();
    let answer = cadquery_core::query::evaluate(&program, &s, &provider, &small_config()).unwrap();
    assert_eq!(answer.value, cadquery_core::query::Value::number(8.0));
    assert_eq!(
        provider.calls(),
        6,
        "one call per view; the repeated search is served from cache"
    );
    assert!(provider.prompts.lock().unwrap().iter().all(|p| p == "Hole"));

    for src in [
        "solution = read_file(\"/etc/passwd\");",
        "solution = exec(\"ls\");",
        "solution = http_get(\"x\");",
    ] {
        let program = cadquery_core::query::parse(src).unwrap();
        let err =
            cadquery_core::query::evaluate(&program, &s, &provider, &small_config()).unwrap_err();
        assert_eq!(err.category(), ErrorCategory::Reasoning, "{src}");
    }
    assert_eq!(provider.calls(), 6);
}
