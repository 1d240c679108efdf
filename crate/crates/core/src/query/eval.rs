//! Tree-walking evaluator.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::ast::{Arg, BinaryOp, Expr, ExprKind, Program, Span, Stmt, UnaryOp};
use super::value::{convert, to_millimeters, Answer, TraceEntry, Unit, Value};
use super::QueryError;
use crate::geometry::{FaceId, LengthUnit};
use crate::metrics::{self, MetricsError};
use crate::render::Scene;
use crate::render::Side;
use crate::segcad::{
    filter_by_sides, normalize_prompt, segment_model, PipelineConfig, SegError,
    SegmentationProvider,
};

pub const DEFAULT_BUDGET: Duration = Duration::from_secs(120);

/// Names every caller can use.
pub const BUILTINS: &[&str] = &[
    "search",
    "count",
    "filter",
    "map",
    "sort_by",
    "min",
    "max",
    "abs",
    "sum",
    "first",
    "last",
    "center",
    "extents",
    "half_extents",
    "radius",
    "diameter",
    "depth",
    "axis",
    "mm",
    "m",
    "distance",
    "model",
    "x",
    "y",
    "z",
];

/// Measurements people ask for that the engine cannot provide. Calling one is
/// a capability gap rather than a mistake in the program.
pub const UNSUPPORTED: &[&str] = &[
    "normal",
    "normals",
    "surface_normal",
    "face_normal",
    "local_center",
    "local_extents",
    "local_frame",
    "orientation",
    "rotation",
    "volume",
    "area",
    "surface_area",
    "angle",
    "curvature",
    "thread",
    "thread_pitch",
    "pitch",
    "tolerance",
    "material",
    "mass",
    "fillet_radius",
    "chamfer",
    "roughness",
];

const MM: Unit = LengthUnit::Millimeter;

type SearchKey = (String, Vec<Side>);

/// Evaluates programs against one scene with one provider.
pub struct Evaluator<'a> {
    scene: &'a Scene,
    provider: &'a dyn SegmentationProvider,
    cfg: &'a PipelineConfig,
    budget: Duration,
    deadline: Instant,
    globals: HashMap<String, Value>,
    locals: Vec<(String, Value)>,
    trace: Vec<TraceEntry>,
    searches: HashMap<SearchKey, Vec<Value>>,
}

fn type_err(at: Span, message: impl Into<String>) -> QueryError {
    QueryError::Type {
        message: message.into(),
        at,
    }
}

fn runtime(at: Span, message: impl Into<String>) -> QueryError {
    QueryError::Runtime {
        message: message.into(),
        at,
    }
}

fn describe_arg(arg: &Arg) -> String {
    match arg {
        Arg::Positional(e) => e.to_string(),
        Arg::Named { name, value } => format!("{name}={value}"),
        Arg::Lambda { param, body } => format!("{param} -> {body}"),
    }
}

/// Unit of a sum or difference; a bare operand takes the other's unit.
fn merge_units(
    a: Option<Unit>,
    b: Option<Unit>,
    at: Span,
    what: &str,
) -> Result<Option<Unit>, QueryError> {
    match (a, b) {
        (Some(u), Some(v)) if u != v => Err(type_err(
            at,
            format!(
                "cannot {what} {} and {}; convert with mm() or m() first",
                u.symbol(),
                v.symbol()
            ),
        )),
        (Some(u), _) | (_, Some(u)) => Ok(Some(u)),
        (None, None) => Ok(None),
    }
}

fn add3(a: [f64; 3], b: [f64; 3], sign: f64) -> [f64; 3] {
    [a[0] + sign * b[0], a[1] + sign * b[1], a[2] + sign * b[2]]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn numeric_order(a: &Value, b: &Value, at: Span) -> Result<Ordering, QueryError> {
    match (a, b) {
        (Value::Number { value: x, unit: ux }, Value::Number { value: y, unit: uy }) => {
            let (x, y) = match (ux, uy) {
                (Some(u), Some(v)) => (to_millimeters(*x, *u), to_millimeters(*y, *v)),
                _ => (*x, *y),
            };
            x.partial_cmp(&y)
                .ok_or_else(|| runtime(at, "comparison with NaN"))
        }
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        _ => Err(type_err(
            at,
            format!("cannot order {} and {}", a.type_name(), b.type_name()),
        )),
    }
}

fn values_equal(a: &Value, b: &Value, at: Span) -> Result<bool, QueryError> {
    Ok(match (a, b) {
        (Value::Number { .. }, Value::Number { .. }) => numeric_order(a, b, at)? == Ordering::Equal,
        (Value::Point { coords: p, unit: u }, Value::Point { coords: q, unit: v }) => {
            p.map(|c| to_millimeters(c, *u)) == q.map(|c| to_millimeters(c, *v))
        }
        (Value::List(x), Value::List(y)) => {
            x.len() == y.len()
                && x.iter()
                    .zip(y)
                    .map(|(p, q)| values_equal(p, q, at))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .all(|e| e)
        }
        (Value::Vector { .. }, Value::Vector { .. })
        | (Value::Part(_), Value::Part(_))
        | (Value::Bool(_), Value::Bool(_))
        | (Value::Str(_), Value::Str(_))
        | (Value::Side(_), Value::Side(_))
        | (Value::Absent, Value::Absent) => a == b,
        _ => {
            return Err(type_err(
                at,
                format!("cannot compare {} with {}", a.type_name(), b.type_name()),
            ))
        }
    })
}

fn binary(op: BinaryOp, a: Value, b: Value, at: Span) -> Result<Value, QueryError> {
    use BinaryOp::*;
    use Value::{Number, Point, Vector};
    let mismatch = |a: &Value, b: &Value| {
        type_err(
            at,
            format!(
                "operator `{}` does not apply to {} and {}",
                op.symbol(),
                a.type_name(),
                b.type_name()
            ),
        )
    };
    match op {
        Eq => return Ok(Value::Bool(values_equal(&a, &b, at)?)),
        Ne => return Ok(Value::Bool(!values_equal(&a, &b, at)?)),
        Lt | Le | Gt | Ge => {
            let ord = numeric_order(&a, &b, at)?;
            let r = match op {
                Lt => ord == Ordering::Less,
                Le => ord != Ordering::Greater,
                Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            };
            return Ok(Value::Bool(r));
        }
        And | Or => unreachable!("short-circuit operators are handled by the evaluator"),
        _ => {}
    }
    let sign = if op == Sub { -1.0 } else { 1.0 };
    match (op, &a, &b) {
        (Add | Sub, Number { value: x, unit: u }, Number { value: y, unit: v }) => Ok(Number {
            value: x + sign * y,
            unit: merge_units(*u, *v, at, if op == Add { "add" } else { "subtract" })?,
        }),
        (Add | Sub, Point { coords: p, unit: u }, Vector { coords: d, unit: v }) => Ok(Point {
            coords: add3(*p, *d, sign),
            unit: merge_units(Some(*u), *v, at, "offset")?.unwrap_or(*u),
        }),
        (Sub, Point { coords: p, unit: u }, Point { coords: q, unit: v }) => Ok(Vector {
            coords: add3(*p, *q, -1.0),
            unit: merge_units(Some(*u), Some(*v), at, "subtract")?,
        }),
        (Add | Sub, Vector { coords: p, unit: u }, Vector { coords: q, unit: v }) => Ok(Vector {
            coords: add3(*p, *q, sign),
            unit: merge_units(*u, *v, at, if op == Add { "add" } else { "subtract" })?,
        }),
        (Mul, Number { value: x, unit: u }, Number { value: y, unit: v }) => {
            if u.is_some() && v.is_some() {
                return Err(type_err(at, "products of two lengths are not supported"));
            }
            Ok(Number {
                value: x * y,
                unit: u.or(*v),
            })
        }
        (Mul, Vector { coords, unit: u }, Number { value: s, unit: v })
        | (Mul, Number { value: s, unit: v }, Vector { coords, unit: u }) => {
            if u.is_some() && v.is_some() {
                return Err(type_err(at, "products of two lengths are not supported"));
            }
            Ok(Vector {
                coords: scale3(*coords, *s),
                unit: u.or(*v),
            })
        }
        (Div, Number { value: x, unit: u }, Number { value: y, unit: v }) => {
            if *y == 0.0 {
                return Err(runtime(at, "division by zero"));
            }
            let unit = match (u, v) {
                (Some(p), Some(q)) if p == q => None,
                (Some(p), Some(q)) => {
                    return Err(type_err(
                        at,
                        format!(
                            "cannot divide {} by {}; convert first",
                            p.symbol(),
                            q.symbol()
                        ),
                    ))
                }
                (u, None) => *u,
                (None, Some(_)) => return Err(type_err(at, "cannot divide a number by a length")),
            };
            Ok(Number { value: x / y, unit })
        }
        (
            Div,
            Vector { coords, unit },
            Number {
                value: s,
                unit: None,
            },
        ) => {
            if *s == 0.0 {
                return Err(runtime(at, "division by zero"));
            }
            Ok(Vector {
                coords: scale3(*coords, 1.0 / s),
                unit: *unit,
            })
        }
        _ => Err(mismatch(&a, &b)),
    }
}

fn convert_value(v: Value, to: Unit, at: Span) -> Result<Value, QueryError> {
    Ok(match v {
        Value::Number { value, unit: None } => Value::length(value, to),
        Value::Number {
            value,
            unit: Some(u),
        } => Value::length(convert(value, u, to), to),
        Value::Point { coords, unit } => Value::Point {
            coords: coords.map(|c| convert(c, unit, to)),
            unit: to,
        },
        Value::Vector { coords, unit } => Value::Vector {
            coords: match unit {
                Some(u) => coords.map(|c| convert(c, u, to)),
                None => coords,
            },
            unit: Some(to),
        },
        Value::List(items) => Value::List(
            items
                .into_iter()
                .map(|i| convert_value(i, to, at))
                .collect::<Result<_, _>>()?,
        ),
        other => {
            return Err(type_err(
                at,
                format!("cannot express a {} in {}", other.type_name(), to.symbol()),
            ))
        }
    })
}

fn metrics_err(e: MetricsError, at: Span, what: &str) -> QueryError {
    match e {
        MetricsError::NotCylindrical(_) | MetricsError::TooFewVertices(_) => {
            QueryError::Capability {
                message: format!("{what} is only defined for cylindrical parts: {e}"),
                at,
            }
        }
        other => runtime(at, other.to_string()),
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(
        scene: &'a Scene,
        provider: &'a dyn SegmentationProvider,
        cfg: &'a PipelineConfig,
    ) -> Self {
        Self {
            scene,
            provider,
            cfg,
            budget: DEFAULT_BUDGET,
            deadline: Instant::now() + DEFAULT_BUDGET,
            globals: HashMap::new(),
            locals: Vec::new(),
            trace: Vec::new(),
            searches: HashMap::new(),
        }
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.budget = budget;
        self
    }

    /// Runs `program` from a clean variable scope. Search results are kept
    /// between runs of the same evaluator.
    pub fn run(&mut self, program: &Program) -> Result<Answer, QueryError> {
        self.deadline = Instant::now() + self.budget;
        self.globals.clear();
        self.locals.clear();
        self.trace.clear();
        let mut solution = None;
        for stmt in &program.statements {
            self.tick()?;
            match stmt {
                Stmt::Let { name, value, .. } => {
                    let v = self.eval(value)?;
                    self.trace.push(TraceEntry {
                        call: format!("let {name}"),
                        args: Vec::new(),
                        result: v.summary(),
                    });
                    self.globals.insert(name.clone(), v);
                }
                Stmt::Solution { value, .. } => {
                    let v = self.eval(value)?;
                    self.trace.push(TraceEntry {
                        call: "solution".into(),
                        args: Vec::new(),
                        result: v.summary(),
                    });
                    solution = Some(v);
                }
            }
        }
        let value = solution.ok_or_else(|| QueryError::Syntax {
            line: 1,
            column: 1,
            message: "program never assigns `solution`".into(),
        })?;
        Ok(Answer {
            value,
            trace: std::mem::take(&mut self.trace),
        })
    }

    fn tick(&self) -> Result<(), QueryError> {
        if Instant::now() > self.deadline {
            return Err(QueryError::Timeout {
                seconds: self.budget.as_secs_f64(),
            });
        }
        Ok(())
    }

    fn lookup(&self, name: &str, at: Span) -> Result<Value, QueryError> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(v.clone());
        }
        if let Some(v) = self.globals.get(name) {
            return Ok(v.clone());
        }
        if let Ok(side) = name.parse::<Side>() {
            return Ok(Value::Side(side));
        }
        Err(QueryError::UnknownVariable {
            name: name.to_string(),
            at,
        })
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, QueryError> {
        match &e.kind {
            ExprKind::Number(v) => Ok(Value::number(*v)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Ident(name) => self.lookup(name, e.span),
            ExprKind::List(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|i| self.eval(i))
                    .collect::<Result<_, _>>()?,
            )),
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match (op, v) {
                    (UnaryOp::Neg, Value::Number { value, unit }) => Ok(Value::Number {
                        value: -value,
                        unit,
                    }),
                    (UnaryOp::Neg, Value::Vector { coords, unit }) => Ok(Value::Vector {
                        coords: scale3(coords, -1.0),
                        unit,
                    }),
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (op, v) => Err(type_err(
                        e.span,
                        format!(
                            "`{}` does not apply to {}",
                            if *op == UnaryOp::Neg { "-" } else { "not" },
                            v.type_name()
                        ),
                    )),
                }
            }
            ExprKind::Binary {
                op: op @ (BinaryOp::And | BinaryOp::Or),
                lhs,
                rhs,
            } => {
                let want = *op == BinaryOp::Or;
                match self.eval(lhs)? {
                    Value::Bool(b) if b == want => Ok(Value::Bool(want)),
                    Value::Bool(_) => match self.eval(rhs)? {
                        Value::Bool(b) => Ok(Value::Bool(b)),
                        other => Err(type_err(
                            rhs.span,
                            format!("expected bool, got {}", other.type_name()),
                        )),
                    },
                    other => Err(type_err(
                        lhs.span,
                        format!("expected bool, got {}", other.type_name()),
                    )),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                binary(*op, a, b, e.span)
            }
            ExprKind::Call { name, args } => {
                self.tick()?;
                let v = self.call(name, args, e.span)?;
                self.trace.push(TraceEntry {
                    call: name.clone(),
                    args: args.iter().map(describe_arg).collect(),
                    result: v.summary(),
                });
                Ok(v)
            }
        }
    }

    fn apply(&mut self, param: &str, body: &Expr, arg: Value) -> Result<Value, QueryError> {
        self.tick()?;
        self.locals.push((param.to_string(), arg));
        let out = self.eval(body);
        self.locals.pop();
        out
    }

    /// Evaluates positional arguments; lambdas and named arguments are refused.
    fn positional(&mut self, name: &str, args: &[Arg], at: Span) -> Result<Vec<Value>, QueryError> {
        args.iter()
            .map(|a| match a {
                Arg::Positional(e) => self.eval(e),
                Arg::Named { name: n, .. } => {
                    Err(type_err(at, format!("{name}() has no parameter `{n}`")))
                }
                Arg::Lambda { .. } => Err(type_err(
                    at,
                    format!("{name}() does not take a lambda; only filter, map and sort_by do"),
                )),
            })
            .collect()
    }

    fn exactly<const N: usize>(
        &mut self,
        name: &str,
        args: &[Arg],
        at: Span,
    ) -> Result<[Value; N], QueryError> {
        let vals = self.positional(name, args, at)?;
        let n = vals.len();
        vals.try_into()
            .map_err(|_| type_err(at, format!("{name}() takes {N} argument(s), got {n}")))
    }

    fn list_arg(v: Value, name: &str, at: Span) -> Result<Vec<Value>, QueryError> {
        match v {
            Value::List(items) => Ok(items),
            other => Err(type_err(
                at,
                format!("{name}() expects a list, got {}", other.type_name()),
            )),
        }
    }

    fn part_arg(v: &Value, name: &str, at: Span) -> Result<Arc<BTreeSet<FaceId>>, QueryError> {
        match v {
            Value::Part(p) => Ok(Arc::clone(p)),
            other => Err(type_err(
                at,
                format!("{name}() expects a part, got {}", other.type_name()),
            )),
        }
    }

    fn combinator(
        &mut self,
        name: &str,
        args: &[Arg],
        at: Span,
    ) -> Result<(Vec<Value>, String, Expr), QueryError> {
        match args {
            [Arg::Positional(list), Arg::Lambda { param, body }] => {
                let items = Self::list_arg(self.eval(list)?, name, at)?;
                Ok((items, param.clone(), body.clone()))
            }
            _ => Err(type_err(
                at,
                format!("{name}() takes a list and a lambda, e.g. {name}(xs, p -> ...)"),
            )),
        }
    }

    fn extreme(
        &mut self,
        name: &str,
        args: &[Arg],
        at: Span,
        want: Ordering,
    ) -> Result<Value, QueryError> {
        let vals = self.positional(name, args, at)?;
        let items = match vals.len() {
            1 => Self::list_arg(vals.into_iter().next().unwrap(), name, at)?,
            0 => return Err(type_err(at, format!("{name}() needs arguments"))),
            _ => vals,
        };
        let mut it = items.into_iter();
        let mut best = it
            .next()
            .ok_or_else(|| runtime(at, format!("{name}() of an empty list")))?;
        for v in it {
            if numeric_order(&v, &best, at)? == want {
                best = v;
            }
        }
        Ok(best)
    }

    fn search(&mut self, args: &[Arg], at: Span) -> Result<Value, QueryError> {
        let mut prompt = None;
        let mut sides: Option<Vec<Side>> = None;
        for a in args {
            match a {
                Arg::Positional(e) if prompt.is_none() => match self.eval(e)? {
                    Value::Str(s) => prompt = Some(s),
                    other => {
                        return Err(type_err(
                            at,
                            format!("search() expects a text prompt, got {}", other.type_name()),
                        ))
                    }
                },
                Arg::Named { name, value } if name == "sides" && sides.is_none() => {
                    let list = match self.eval(value)? {
                        Value::List(items) => items,
                        single @ Value::Side(_) => vec![single],
                        other => {
                            return Err(type_err(
                                at,
                                format!("sides must be a list of sides, got {}", other.type_name()),
                            ))
                        }
                    };
                    let mut parsed = Vec::new();
                    for v in list {
                        match v {
                            Value::Side(s) => parsed.push(s),
                            Value::Str(s) => parsed.push(
                                s.parse::<Side>()
                                    .map_err(|_| type_err(at, format!("unknown side `{s}`")))?,
                            ),
                            other => {
                                return Err(type_err(
                                    at,
                                    format!("not a side: {}", other.type_name()),
                                ))
                            }
                        }
                    }
                    if parsed.is_empty() {
                        return Err(type_err(at, "sides must not be empty"));
                    }
                    parsed.sort();
                    parsed.dedup();
                    sides = Some(parsed);
                }
                other => {
                    return Err(type_err(
                        at,
                        format!("unexpected search() argument `{}`", describe_arg(other)),
                    ))
                }
            }
        }
        let prompt = prompt.ok_or_else(|| type_err(at, "search() needs a prompt"))?;
        let key = (normalize_prompt(&prompt), sides.clone().unwrap_or_default());
        if let Some(hit) = self.searches.get(&key) {
            return Ok(Value::List(hit.clone()));
        }
        let seg_err = |e: SegError| match e {
            SegError::ProviderUnavailable { .. } => QueryError::Provider {
                message: e.to_string(),
            },
            SegError::EmptyPrompt => type_err(at, "search() prompt is empty"),
            other => runtime(at, other.to_string()),
        };
        let mut parts =
            segment_model(self.scene, &prompt, self.provider, self.cfg).map_err(seg_err)?;
        if let Some(sides) = &sides {
            parts = filter_by_sides(
                self.scene,
                parts,
                &sides.iter().copied().collect(),
                self.cfg,
            )
            .map_err(seg_err)?;
        }
        let values: Vec<Value> = parts
            .into_iter()
            .map(|p| Value::Part(Arc::new(p.face_ids)))
            .collect();
        self.searches.insert(key, values.clone());
        Ok(Value::List(values))
    }

    fn call(&mut self, name: &str, args: &[Arg], at: Span) -> Result<Value, QueryError> {
        let model = self.scene.model();
        match name {
            "search" => self.search(args, at),
            "model" => {
                self.exactly::<0>(name, args, at)?;
                Ok(Value::Part(Arc::new(
                    (0..model.face_count() as FaceId).collect(),
                )))
            }
            "count" => match self.exactly::<1>(name, args, at)? {
                [Value::List(items)] => Ok(Value::number(items.len() as f64)),
                [other] => Err(type_err(
                    at,
                    format!("count() expects a list, got {}", other.type_name()),
                )),
            },
            "filter" => {
                let (items, param, body) = self.combinator(name, args, at)?;
                let mut out = Vec::new();
                for item in items {
                    match self.apply(&param, &body, item.clone())? {
                        Value::Bool(true) => out.push(item),
                        Value::Bool(false) => {}
                        other => {
                            return Err(type_err(
                                body.span,
                                format!("filter condition must be bool, got {}", other.type_name()),
                            ))
                        }
                    }
                }
                Ok(Value::List(out))
            }
            "map" => {
                let (items, param, body) = self.combinator(name, args, at)?;
                let out = items
                    .into_iter()
                    .map(|i| self.apply(&param, &body, i))
                    .collect::<Result<_, _>>()?;
                Ok(Value::List(out))
            }
            "sort_by" => {
                let (items, param, body) = self.combinator(name, args, at)?;
                let mut keyed = Vec::with_capacity(items.len());
                for item in items {
                    let key = self.apply(&param, &body, item.clone())?;
                    keyed.push((key, item));
                }
                let mut failure = None;
                keyed.sort_by(|(a, _), (b, _)| {
                    numeric_order(a, b, at).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        Ordering::Equal
                    })
                });
                match failure {
                    Some(e) => Err(e),
                    None => Ok(Value::List(keyed.into_iter().map(|(_, v)| v).collect())),
                }
            }
            "min" => self.extreme(name, args, at, Ordering::Less),
            "max" => self.extreme(name, args, at, Ordering::Greater),
            "sum" => {
                let [list] = self.exactly::<1>(name, args, at)?;
                let mut acc = Value::number(0.0);
                for v in Self::list_arg(list, name, at)? {
                    acc = binary(BinaryOp::Add, acc, v, at)?;
                }
                Ok(acc)
            }
            "first" | "last" => {
                let [list] = self.exactly::<1>(name, args, at)?;
                let items = Self::list_arg(list, name, at)?;
                let v = if name == "first" {
                    items.into_iter().next()
                } else {
                    items.into_iter().last()
                };
                v.ok_or_else(|| runtime(at, format!("{name}() of an empty list")))
            }
            "abs" => match self.exactly::<1>(name, args, at)? {
                [Value::Number { value, unit }] => Ok(Value::Number {
                    value: value.abs(),
                    unit,
                }),
                [other] => Err(type_err(
                    at,
                    format!("abs() expects a number, got {}", other.type_name()),
                )),
            },
            "mm" | "m" => {
                let [v] = self.exactly::<1>(name, args, at)?;
                let to = if name == "mm" {
                    LengthUnit::Millimeter
                } else {
                    LengthUnit::Meter
                };
                convert_value(v, to, at)
            }
            "x" | "y" | "z" => {
                let k = match name {
                    "x" => 0,
                    "y" => 1,
                    _ => 2,
                };
                match self.exactly::<1>(name, args, at)? {
                    [Value::Point { coords, unit }] => Ok(Value::length(coords[k], unit)),
                    [Value::Vector { coords, unit }] => Ok(Value::Number {
                        value: coords[k],
                        unit,
                    }),
                    [other] => Err(type_err(
                        at,
                        format!(
                            "{name}() expects a point or vector, got {}",
                            other.type_name()
                        ),
                    )),
                }
            }
            "distance" => match self.exactly::<2>(name, args, at)? {
                [Value::Point { coords: p, unit: u }, Value::Point { coords: q, unit: v }] => {
                    let q = q.map(|c| convert(c, v, u));
                    let d = add3(p, q, -1.0);
                    Ok(Value::length(
                        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(),
                        u,
                    ))
                }
                [a, b] => Err(type_err(
                    at,
                    format!(
                        "distance() expects two points, got {} and {}",
                        a.type_name(),
                        b.type_name()
                    ),
                )),
            },
            "center" | "extents" | "half_extents" => {
                let [v] = self.exactly::<1>(name, args, at)?;
                let part = Self::part_arg(&v, name, at)?;
                let aabb =
                    metrics::part_aabb(model, &part).map_err(|e| metrics_err(e, at, name))?;
                Ok(match name {
                    "center" => Value::Point {
                        coords: aabb.center().coords.into(),
                        unit: MM,
                    },
                    "extents" => Value::Vector {
                        coords: aabb.extents().into(),
                        unit: Some(MM),
                    },
                    _ => Value::Vector {
                        coords: (aabb.extents() / 2.0).into(),
                        unit: Some(MM),
                    },
                })
            }
            "radius" | "diameter" | "depth" | "axis" => {
                let [v] = self.exactly::<1>(name, args, at)?;
                let part = Self::part_arg(&v, name, at)?;
                let fit =
                    metrics::fit_cylinder(model, &part).map_err(|e| metrics_err(e, at, name))?;
                Ok(match name {
                    "radius" => Value::mm(fit.radius),
                    "diameter" => Value::mm(2.0 * fit.radius),
                    "depth" => Value::mm(fit.depth),
                    _ => Value::Vector {
                        coords: fit.axis.into(),
                        unit: None,
                    },
                })
            }
            _ if UNSUPPORTED.contains(&name) => Err(QueryError::Capability {
                message: format!("`{name}` is not available in the CAD interface"),
                at,
            }),
            _ => Err(QueryError::UnknownProperty {
                name: name.to_string(),
                at,
            }),
        }
    }
}

/// Evaluates `program` once with the default time budget.
pub fn evaluate(
    program: &Program,
    scene: &Scene,
    provider: &dyn SegmentationProvider,
    cfg: &PipelineConfig,
) -> Result<Answer, QueryError> {
    Evaluator::new(scene, provider, cfg).run(program)
}
