//! Comparing answers with expected values.

use serde::{Deserialize, Serialize};

use crate::geometry::LengthUnit;
use crate::query::{convert, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectedItem {
    Number(f64),
    Point([f64; 3]),
}

/// Expected answer of a benchmark question. Lengths are compared in `unit`
/// (millimeters by default); answers in another unit are converted first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Expected {
    Number {
        value: f64,
        tolerance: f64,
        #[serde(default)]
        unit: LengthUnit,
    },
    Point {
        value: [f64; 3],
        tolerance: f64,
        #[serde(default)]
        unit: LengthUnit,
    },
    /// Unordered; duplicates count.
    List {
        values: Vec<ExpectedItem>,
        tolerance: f64,
        #[serde(default)]
        unit: LengthUnit,
    },
    Count {
        value: u64,
    },
}

impl Expected {
    pub fn tolerance(&self) -> f64 {
        match self {
            Expected::Number { tolerance, .. }
            | Expected::Point { tolerance, .. }
            | Expected::List { tolerance, .. } => *tolerance,
            Expected::Count { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    Partial,
    Wrong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Score {
    fn of(outcome: Outcome) -> Self {
        Self {
            outcome,
            note: None,
        }
    }

    fn incomparable(note: String) -> Self {
        Self {
            outcome: Outcome::Wrong,
            note: Some(note),
        }
    }
}

fn as_number(v: &Value, unit: LengthUnit) -> Option<f64> {
    match v {
        Value::Number { value, unit: None } => Some(*value),
        Value::Number {
            value,
            unit: Some(u),
        } => Some(convert(*value, *u, unit)),
        Value::List(items) if items.len() == 1 => as_number(&items[0], unit),
        _ => None,
    }
}

fn as_point(v: &Value, unit: LengthUnit) -> Option<[f64; 3]> {
    match v {
        Value::Point { coords, unit: u } => Some(coords.map(|c| convert(c, *u, unit))),
        Value::Vector {
            coords,
            unit: Some(u),
        } => Some(coords.map(|c| convert(c, *u, unit))),
        Value::List(items) if items.len() == 3 => {
            let c: Option<Vec<f64>> = items.iter().map(|i| as_number(i, unit)).collect();
            c.map(|c| [c[0], c[1], c[2]])
        }
        Value::List(items) if items.len() == 1 => as_point(&items[0], unit),
        _ => None,
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Size of a maximum matching in a bipartite graph given as adjacency lists
/// from left to right vertices.
fn maximum_matching(adj: &[Vec<usize>], right_count: usize) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; right_count];
    (0..adj.len())
        .filter(|&u| augment(u, adj, &mut vec![false; right_count], &mut owner))
        .count()
}

/// Scores `answer` against `expected`: scalars and points must be within
/// tolerance, counts must match exactly, and lists are matched item by item
/// (Correct when every item on both sides is paired, Partial when at least
/// one pair exists).
pub fn score_answer(answer: &Value, expected: &Expected) -> Score {
    match expected {
        Expected::Number {
            value,
            tolerance,
            unit,
        } => match as_number(answer, *unit) {
            Some(a) if (a - value).abs() <= *tolerance => Score::of(Outcome::Correct),
            Some(_) => Score::of(Outcome::Wrong),
            None => Score::incomparable(format!("expected a number, got {}", answer.type_name())),
        },
        Expected::Point {
            value,
            tolerance,
            unit,
        } => match as_point(answer, *unit) {
            Some(p) if distance(p, *value) <= *tolerance => Score::of(Outcome::Correct),
            Some(_) => Score::of(Outcome::Wrong),
            None => Score::incomparable(format!("expected a point, got {}", answer.type_name())),
        },
        Expected::Count { value } => match answer {
            Value::Number {
                value: a,
                unit: None,
            } if *a == *value as f64 => Score::of(Outcome::Correct),
            Value::Number { unit: None, .. } => Score::of(Outcome::Wrong),
            other => Score::incomparable(format!("expected a count, got {}", other.type_name())),
        },
        Expected::List {
            values,
            tolerance,
            unit,
        } => {
            let items: Vec<Value> = match answer {
                Value::List(items) => items.clone(),
                scalar => vec![scalar.clone()],
            };
            let mut adj = Vec::with_capacity(items.len());
            for item in &items {
                let mut row = Vec::new();
                for (j, e) in values.iter().enumerate() {
                    let close = match e {
                        ExpectedItem::Number(x) => {
                            as_number(item, *unit).map(|a| (a - x).abs() <= *tolerance)
                        }
                        ExpectedItem::Point(p) => {
                            as_point(item, *unit).map(|a| distance(a, *p) <= *tolerance)
                        }
                    };
                    match close {
                        Some(true) => row.push(j),
                        Some(false) => {}
                        None => {
                            return Score::incomparable(format!(
                                "list item {} cannot be compared with the expected items",
                                item.type_name()
                            ))
                        }
                    }
                }
                adj.push(row);
            }
            let matched = maximum_matching(&adj, values.len());
            if matched == items.len() && matched == values.len() {
                Score::of(Outcome::Correct)
            } else if matched > 0 {
                Score::of(Outcome::Partial)
            } else {
                Score::of(Outcome::Wrong)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(xs: &[f64]) -> Value {
        Value::List(xs.iter().map(|&x| Value::mm(x)).collect())
    }

    fn list(xs: &[f64]) -> Expected {
        Expected::List {
            values: xs.iter().map(|&x| ExpectedItem::Number(x)).collect(),
            tolerance: 0.01,
            unit: LengthUnit::Millimeter,
        }
    }

    #[test]
    fn number_within_tolerance() {
        let e = Expected::Number {
            value: 5.0,
            tolerance: 0.01,
            unit: LengthUnit::Millimeter,
        };
        assert_eq!(
            score_answer(&Value::mm(5.001), &e).outcome,
            Outcome::Correct
        );
        assert_eq!(score_answer(&Value::mm(5.02), &e).outcome, Outcome::Wrong);
        assert_eq!(
            score_answer(&Value::length(0.005, LengthUnit::Meter), &e).outcome,
            Outcome::Correct
        );
    }

    #[test]
    fn overlap_is_partial() {
        assert_eq!(
            score_answer(&nums(&[5.0, 8.0]), &list(&[5.0, 8.0, 8.0])).outcome,
            Outcome::Partial
        );
        assert_eq!(
            score_answer(&nums(&[8.0, 5.0, 8.0]), &list(&[5.0, 8.0, 8.0])).outcome,
            Outcome::Correct
        );
        assert_eq!(
            score_answer(&nums(&[1.0]), &list(&[5.0])).outcome,
            Outcome::Wrong
        );
    }

    #[test]
    fn matching_is_maximal_not_greedy() {
        // pairing 5.01 with 5.0 first would leave the second answer unmatched
        let e = Expected::List {
            values: vec![ExpectedItem::Number(5.0), ExpectedItem::Number(5.02)],
            tolerance: 0.01,
            unit: LengthUnit::Millimeter,
        };
        assert_eq!(
            score_answer(&nums(&[5.01, 5.0]), &e).outcome,
            Outcome::Correct
        );
        assert_eq!(
            score_answer(&nums(&[5.0, 5.0]), &e).outcome,
            Outcome::Partial
        );
    }

    #[test]
    fn counts_are_exact() {
        let e = Expected::Count { value: 4 };
        assert_eq!(
            score_answer(&Value::number(3.0), &e).outcome,
            Outcome::Wrong
        );
        assert_eq!(
            score_answer(&Value::number(4.0), &e).outcome,
            Outcome::Correct
        );
        let s = score_answer(&Value::Bool(true), &e);
        assert_eq!(s.outcome, Outcome::Wrong);
        assert!(s.note.is_some());
    }

    #[test]
    fn points_use_euclidean_distance() {
        let e = Expected::Point {
            value: [1.0, 2.0, 3.0],
            tolerance: 0.01,
            unit: LengthUnit::Millimeter,
        };
        let p = |c| Value::Point {
            coords: c,
            unit: LengthUnit::Millimeter,
        };
        assert_eq!(
            score_answer(&p([1.005, 2.005, 3.005]), &e).outcome,
            Outcome::Correct
        );
        assert_eq!(
            score_answer(&p([1.008, 2.008, 3.0]), &e).outcome,
            Outcome::Wrong
        );
    }

    #[test]
    fn expected_json_shapes() {
        let e: Expected =
            serde_json::from_str(r#"{"type":"list","values":[5.0,[1,2,3]],"tolerance":0.1}"#)
                .unwrap();
        assert_eq!(
            e,
            Expected::List {
                values: vec![
                    ExpectedItem::Number(5.0),
                    ExpectedItem::Point([1.0, 2.0, 3.0])
                ],
                tolerance: 0.1,
                unit: LengthUnit::Millimeter
            }
        );
    }
}
