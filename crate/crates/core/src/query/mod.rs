//! The query language: a small, total expression language whose programs
//! search the model for parts and compute measurements on them.
//!
//! ```text
//! let holes = search("hole", sides=[top]);
//! let small = filter(holes, h -> radius(h) < 6);
//! solution = map(small, h -> center(h));
//! ```
//!
//! Every program binds `solution` exactly once. There are no loops or
//! user-defined functions; `filter`, `map` and `sort_by` take a lambda and
//! are the only iteration. Lengths carry a unit (`mm` or `m`); mixing units
//! in arithmetic is a type error, while comparisons convert.

mod ast;
mod eval;
mod parser;
mod value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{Arg, BinaryOp, Expr, ExprKind, Program, Span, Stmt, UnaryOp};
pub use eval::{evaluate, Evaluator, BUILTINS, DEFAULT_BUDGET, UNSUPPORTED};
pub use parser::parse;
pub use value::{convert, Answer, TraceEntry, Unit, Value};

/// Failure classes used when scoring question answering runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    /// The program could not be parsed or extracted.
    Syntax,
    /// The program ran into a type, name or runtime error, or produced a wrong
    /// answer for a reason other than segmentation.
    Reasoning,
    /// The program executed but segmentation found the wrong parts.
    Masks,
    /// The program needed something the CAD interface cannot provide.
    #[serde(rename = "CAD-Interface")]
    CadInterface,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::Syntax,
        ErrorCategory::Reasoning,
        ErrorCategory::Masks,
        ErrorCategory::CadInterface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Syntax => "Syntax",
            ErrorCategory::Reasoning => "Reasoning",
            ErrorCategory::Masks => "Masks",
            ErrorCategory::CadInterface => "CAD-Interface",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("type error at {at}: {message}")]
    Type { message: String, at: Span },
    #[error("unknown property `{name}` at {at}")]
    UnknownProperty { name: String, at: Span },
    #[error("undefined variable `{name}` at {at}")]
    UnknownVariable { name: String, at: Span },
    #[error("unsupported capability at {at}: {message}")]
    Capability { message: String, at: Span },
    #[error("evaluation error at {at}: {message}")]
    Runtime { message: String, at: Span },
    #[error("segmentation provider failed: {message}")]
    Provider { message: String },
    #[error("evaluation exceeded its {seconds} s budget")]
    Timeout { seconds: f64 },
}

impl QueryError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            QueryError::Syntax { .. } => ErrorCategory::Syntax,
            QueryError::Type { .. }
            | QueryError::UnknownProperty { .. }
            | QueryError::UnknownVariable { .. }
            | QueryError::Runtime { .. }
            | QueryError::Timeout { .. } => ErrorCategory::Reasoning,
            QueryError::Capability { .. } => ErrorCategory::CadInterface,
            QueryError::Provider { .. } => ErrorCategory::Masks,
        }
    }
}
