//! Runtime values of the query language.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geometry::{FaceId, LengthUnit};
use crate::render::Side;

/// Length units a value can carry. Internally the same as the model units.
pub type Unit = LengthUnit;

pub fn to_millimeters(value: f64, unit: Unit) -> f64 {
    match unit {
        LengthUnit::Millimeter => value,
        LengthUnit::Meter => value * 1000.0,
    }
}

pub fn from_millimeters(value: f64, unit: Unit) -> f64 {
    match unit {
        LengthUnit::Millimeter => value,
        LengthUnit::Meter => value / 1000.0,
    }
}

/// Converts `value` from `from` to `to`; identity when the units agree.
pub fn convert(value: f64, from: Unit, to: Unit) -> f64 {
    if from == to {
        value
    } else {
        from_millimeters(to_millimeters(value, from), to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// A plain number when `unit` is `None`, a length otherwise.
    Number {
        value: f64,
        unit: Option<Unit>,
    },
    Point {
        coords: [f64; 3],
        unit: Unit,
    },
    /// Lengths per axis when `unit` is set, a direction otherwise.
    Vector {
        coords: [f64; 3],
        unit: Option<Unit>,
    },
    Part(Arc<BTreeSet<FaceId>>),
    List(Vec<Value>),
    Bool(bool),
    Str(String),
    Side(Side),
    Absent,
}

impl Value {
    pub fn number(value: f64) -> Self {
        Value::Number { value, unit: None }
    }

    pub fn length(value: f64, unit: Unit) -> Self {
        Value::Number {
            value,
            unit: Some(unit),
        }
    }

    pub fn mm(value: f64) -> Self {
        Value::length(value, LengthUnit::Millimeter)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number { unit: None, .. } => "number",
            Value::Number { unit: Some(_), .. } => "length",
            Value::Point { .. } => "point",
            Value::Vector { .. } => "vector",
            Value::Part(_) => "part",
            Value::List(_) => "list",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Side(_) => "side",
            Value::Absent => "absent",
        }
    }

    /// Short text for traces.
    pub fn summary(&self) -> String {
        match self {
            Value::List(items) if items.len() > 4 => format!("list[{}]", items.len()),
            Value::Part(faces) if faces.len() > 6 => format!("part[{} faces]", faces.len()),
            other => other.to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Number { value, unit: None } => json!(value),
            Value::Number {
                value,
                unit: Some(u),
            } => json!({"value": value, "unit": u.symbol()}),
            Value::Point { coords, unit } => json!({"point": coords, "unit": unit.symbol()}),
            Value::Vector { coords, unit } => match unit {
                Some(u) => json!({"vector": coords, "unit": u.symbol()}),
                None => json!({"vector": coords}),
            },
            Value::Part(faces) => json!({"faces": faces.iter().collect::<Vec<_>>()}),
            Value::List(items) => {
                serde_json::Value::Array(items.iter().map(Value::to_json).collect())
            }
            Value::Bool(b) => json!(b),
            Value::Str(s) => json!(s),
            Value::Side(s) => json!(s.name()),
            Value::Absent => serde_json::Value::Null,
        }
    }
}

fn fmt_coords(f: &mut fmt::Formatter<'_>, c: &[f64; 3]) -> fmt::Result {
    write!(f, "({}, {}, {})", c[0], c[1], c[2])
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number { value, unit: None } => write!(f, "{value}"),
            Value::Number {
                value,
                unit: Some(u),
            } => write!(f, "{value} {}", u.symbol()),
            Value::Point { coords, unit } => {
                fmt_coords(f, coords)?;
                write!(f, " {}", unit.symbol())
            }
            Value::Vector { coords, unit } => {
                fmt_coords(f, coords)?;
                match unit {
                    Some(u) => write!(f, " {}", u.symbol()),
                    None => Ok(()),
                }
            }
            Value::Part(faces) => {
                write!(f, "part{{")?;
                for (i, id) in faces.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{id}")?;
                }
                write!(f, "}}")
            }
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Side(s) => write!(f, "{}", s.name()),
            Value::Absent => write!(f, "absent"),
        }
    }
}

/// One builtin call or statement recorded during evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub call: String,
    pub args: Vec<String>,
    pub result: String,
}

/// The value bound to `solution` and how it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub value: Value,
    pub trace: Vec<TraceEntry>,
}
