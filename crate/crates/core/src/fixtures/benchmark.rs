//! The shipped example benchmark: fixture models, reference programs,
//! recorded completions and `suite.json`. Expected values are taken from the
//! fixture manifests.

use std::path::{Path, PathBuf};

use super::{
    plate_before_block, plate_blind_hole, plate_mixed_holes, plate_with_four_holes, Fixture,
};
use crate::geometry::{GeometryError, LengthUnit};
use crate::qa::{replay_key, BenchQuestion, Expected, ExpectedItem};

/// Tolerance for lengths in the shipped suite, in millimeters.
pub const LENGTH_TOLERANCE_MM: f64 = 0.05;

pub struct BenchmarkCase {
    pub question: BenchQuestion,
    pub program: String,
    pub reasoning: String,
}

fn mm(value: f64) -> Expected {
    Expected::Number {
        value,
        tolerance: LENGTH_TOLERANCE_MM,
        unit: LengthUnit::Millimeter,
    }
}

fn case(
    id: &str,
    fx: &Fixture,
    question: &str,
    expected: Expected,
    reasoning: &str,
    program: &str,
) -> BenchmarkCase {
    BenchmarkCase {
        question: BenchQuestion {
            id: id.to_string(),
            model_path: PathBuf::from(format!("models/{}.obj", fx.name())),
            question: question.to_string(),
            expected,
            reference_program: Some(PathBuf::from(format!("programs/{id}.cadq"))),
            units: None,
        },
        program: program.to_string(),
        reasoning: reasoning.to_string(),
    }
}

/// Models used by the shipped suite.
pub fn benchmark_models() -> Vec<Fixture> {
    vec![
        plate_with_four_holes(),
        plate_mixed_holes(),
        plate_blind_hole(),
        plate_before_block(),
    ]
}

pub fn benchmark_cases() -> Vec<BenchmarkCase> {
    let four = plate_with_four_holes();
    let mixed = plate_mixed_holes();
    let blind = plate_blind_hole();
    let block = plate_before_block();
    let hole_radius = |fx: &Fixture, i: usize| fx.manifest.holes[i].radius;
    let max_radius = mixed
        .manifest
        .holes
        .iter()
        .map(|h| h.radius)
        .fold(f64::MIN, f64::max);
    let mixed_blind = mixed
        .manifest
        .holes
        .iter()
        .find(|h| !h.through)
        .expect("mixed plate has a blind hole");
    let size = |fx: &Fixture| -> [f64; 3] {
        std::array::from_fn(|k| fx.manifest.aabb_max[k] - fx.manifest.aabb_min[k])
    };

    vec![
        case(
            "q01_hole_count",
            &four,
            "How many holes does the plate have?",
            Expected::Count {
                value: four.manifest.holes.len() as u64,
            },
            "I search for holes and count them.",
            "let holes = search(\"hole\");\nsolution = count(holes);",
        ),
        case(
            "q02_hole_radius",
            &four,
            "What is the radius of the holes in the plate?",
            mm(hole_radius(&four, 0)),
            "The holes share one size, so the largest radius is the radius of every hole.",
            "let holes = search(\"hole\");\nsolution = max(map(holes, h -> radius(h)));",
        ),
        case(
            "q03_hole_centers",
            &four,
            "Where are the centers of the holes?",
            Expected::List {
                values: four.manifest.holes.iter().map(|h| ExpectedItem::Point(h.center)).collect(),
                tolerance: LENGTH_TOLERANCE_MM,
                unit: LengthUnit::Millimeter,
            },
            "I report the bounding box center of every hole.",
            "let holes = search(\"hole\");\nsolution = map(holes, h -> center(h));",
        ),
        case(
            "q04_large_hole_count",
            &mixed,
            "How many holes have a radius larger than 4.5 mm?",
            Expected::Count {
                value: mixed.manifest.holes.iter().filter(|h| h.radius > 4.5).count() as u64,
            },
            "I keep holes whose radius exceeds 4.5 mm and count them.",
            "let holes = search(\"hole\");\nlet large = filter(holes, h -> radius(h) > mm(4.5));\nsolution = count(large);",
        ),
        case(
            "q05_shallowest_depth",
            &mixed,
            "How deep is the shallowest hole?",
            mm(mixed_blind.depth),
            "Depth is measured along each hole's axis; the shallowest hole has the smallest depth.",
            "let holes = search(\"hole\");\nsolution = min(map(holes, h -> depth(h)));",
        ),
        case(
            "q06_max_diameter_m",
            &mixed,
            "What is the diameter of the largest hole in meters?",
            Expected::Number {
                value: 2.0 * max_radius / 1000.0,
                tolerance: LENGTH_TOLERANCE_MM / 1000.0,
                unit: LengthUnit::Meter,
            },
            "I take the largest diameter and convert millimeters to meters.",
            "let holes = search(\"hole\");\nsolution = m(max(map(holes, h -> diameter(h))));",
        ),
        case(
            "q07_holes_from_bottom",
            &blind,
            "How many holes can be reached from below?",
            Expected::Count {
                value: blind.manifest.holes.iter().filter(|h| h.through).count() as u64,
            },
            "A hole reachable from below must be visible from the bottom side.",
            "let holes = search(\"hole\", sides=[bottom]);\nsolution = count(holes);",
        ),
        case(
            "q08_blind_depth",
            &blind,
            "How deep is the hole?",
            mm(blind.manifest.holes[0].depth),
            "There is one hole; I measure its depth.",
            "let hole = first(search(\"hole\"));\nsolution = depth(hole);",
        ),
        case(
            "q09_overall_size",
            &four,
            "What are the overall dimensions of the part along x, y and z?",
            Expected::Point {
                value: size(&four),
                tolerance: LENGTH_TOLERANCE_MM,
                unit: LengthUnit::Millimeter,
            },
            "The overall dimensions are the full extents of the whole model.",
            "solution = extents(model());",
        ),
        case(
            "q10_holes_from_top",
            &block,
            "How many holes in the plate are visible from the top?",
            Expected::Count {
                value: block.manifest.holes.len() as u64,
            },
            "I restrict the hole search to the top view and count.",
            "let holes = search(\"hole\", sides=[top]);\nsolution = count(holes);",
        ),
    ]
}

/// Recorded completion for a case, in the format a chat model would return.
pub fn recorded_completion(case: &BenchmarkCase) -> String {
    format!("{}\n\n```\n{}\n```\n", case.reasoning, case.program)
}

fn write(path: PathBuf, contents: &str) -> Result<(), GeometryError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| GeometryError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(&path, contents).map_err(|source| GeometryError::Io { path, source })
}

/// Writes the complete benchmark under `dir` and returns the suite path.
///
/// Layout: `models/`, `programs/<id>.cadq`, `replays/<key>.md`, `suite.json`.
pub fn write_benchmark(dir: &Path) -> Result<PathBuf, GeometryError> {
    for fx in benchmark_models() {
        fx.write_to(&dir.join("models"))?;
    }
    let cases = benchmark_cases();
    for c in &cases {
        write(
            dir.join("programs").join(format!("{}.cadq", c.question.id)),
            &format!("{}\n", c.program),
        )?;
        write(
            dir.join("replays")
                .join(format!("{}.md", replay_key(&c.question.question))),
            &recorded_completion(c),
        )?;
    }
    let questions: Vec<&BenchQuestion> = cases.iter().map(|c| &c.question).collect();
    let suite = dir.join("suite.json");
    write(
        suite.clone(),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&questions).expect("suite serializes")
        ),
    )?;
    Ok(suite)
}
