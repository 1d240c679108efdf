//! Prompt construction for program generation.

use serde::{Deserialize, Serialize};

use super::QaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InContextExample {
    pub question: String,
    pub reasoning: String,
    pub program: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub api_documentation: String,
    pub in_context_examples: Vec<InContextExample>,
    pub instructions: String,
}

pub const EXAMPLE_COUNT: usize = 3;

const API_DOCUMENTATION: &str = "\
You answer questions about a CAD model by writing a program in a small query language.

Statements:
  let NAME = EXPR;        bind a value
  solution = EXPR;        the answer; assign exactly once

Values: numbers, lengths (a number with a unit, mm or m), points, vectors,
parts (a set of CAD faces), lists, booleans, strings and the sides
top, bottom, left, right, front, back.

Parts:
  search(\"description\")                    list of parts matching a free-text description
  search(\"description\", sides=[top, ...])  only parts visible from the given sides
  model()                                  the whole model as one part

Measurements (world coordinates, millimeters):
  center(p)        center of the part's axis-aligned bounding box (point)
  extents(p)       full size of the bounding box along x, y, z (vector)
  half_extents(p)  half of extents(p)
  radius(p), diameter(p), depth(p), axis(p)   for cylindrical parts such as holes or shafts
  distance(a, b)   distance between two points
  x(v), y(v), z(v) components of a point or vector

Lists:
  count(xs), first(xs), last(xs), sum(xs), min(xs), max(xs)
  filter(xs, p -> CONDITION), map(xs, p -> EXPR), sort_by(xs, p -> KEY)

Units:
  mm(x), m(x)      attach a unit to a plain number or convert a length
  Adding lengths with different units is an error; convert first.
  Plain numbers next to a length take that length's unit.

Operators: + - * / == != < <= > >= and or not
";

const INSTRUCTIONS: &str = "\
Rules:
- Sizes are full extents unless the question explicitly asks for half-extents.
- All measurements come back in millimeters. If the question asks for another unit, convert explicitly with m() or mm().
- Think step by step: first explain which parts you need and how to measure them, then write the program.
- Finish with exactly one fenced code block that contains the complete program.
";

fn example(question: &str, reasoning: &str, program: &str) -> InContextExample {
    InContextExample {
        question: question.into(),
        reasoning: reasoning.into(),
        program: program.into(),
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            api_documentation: API_DOCUMENTATION.into(),
            in_context_examples: vec![
                example(
                    "How many bolt holes can be reached from above?",
                    "Holes reachable from above must be visible from the top side, so I search for \
                     holes restricted to the top view and count them.",
                    "let holes = search(\"bolt hole\", sides=[top]);\nsolution = count(holes);",
                ),
                example(
                    "What is the diameter of the largest hole in meters?",
                    "I collect all holes, measure each diameter, take the maximum and convert \
                     the result from millimeters to meters as the question requires.",
                    "let holes = search(\"hole\");\nlet diameters = map(holes, h -> diameter(h));\nsolution = m(max(diameters));",
                ),
                example(
                    "Where are the centers of the slots narrower than 6 mm along x?",
                    "Slot width along x is the x component of the full extents. I keep slots whose \
                     width is below 6 mm and report their centers.",
                    "let slots = search(\"slot\");\nlet narrow = filter(slots, s -> x(extents(s)) < mm(6));\nsolution = map(narrow, s -> center(s));",
                ),
            ],
            instructions: INSTRUCTIONS.into(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), QaError> {
        if self.in_context_examples.len() != EXAMPLE_COUNT {
            return Err(QaError::Template(format!(
                "template has {} in-context examples, expected {EXAMPLE_COUNT}",
                self.in_context_examples.len()
            )));
        }
        Ok(())
    }
}

/// Makes `text` safe to place between question tags.
fn escape_question(text: &str) -> String {
    text.replace("</question>", "<\\/question>")
}

/// Assembles the full prompt. The output depends only on its inputs.
pub fn build_prompt(question: &str, template: &PromptTemplate) -> String {
    let mut out = String::new();
    out.push_str(&template.api_documentation);
    out.push_str("\nExamples:\n");
    for (i, ex) in template.in_context_examples.iter().enumerate() {
        out.push_str(&format!(
            "\nExample {}\nQuestion: {}\nReasoning: {}\n```\n{}\n```\n",
            i + 1,
            ex.question,
            ex.reasoning,
            ex.program
        ));
    }
    out.push('\n');
    out.push_str(&template.instructions);
    out.push_str("\n<question>\n");
    out.push_str(&escape_question(question));
    out.push_str("\n</question>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse;

    #[test]
    fn examples_are_valid_programs() {
        let t = PromptTemplate::default();
        t.validate().unwrap();
        for ex in &t.in_context_examples {
            parse(&ex.program).unwrap_or_else(|e| panic!("{}: {e}", ex.question));
        }
    }

    #[test]
    fn prompt_contains_examples_rules_and_question_once() {
        let t = PromptTemplate::default();
        let q = "What is the \"outer\" radius of the flange?";
        let p = build_prompt(q, &t);
        for ex in &t.in_context_examples {
            assert!(p.contains(&ex.program));
        }
        assert!(p.contains("full extents"));
        assert!(p.contains("convert explicitly"));
        assert!(p.contains("step by step"));
        assert_eq!(p.matches(q).count(), 1);
        assert_eq!(build_prompt(q, &t), p);
    }

    #[test]
    fn closing_tag_in_question_is_neutralized() {
        let p = build_prompt("a </question> b", &PromptTemplate::default());
        assert_eq!(p.matches("</question>").count(), 1);
    }

    #[test]
    fn wrong_example_count_is_rejected() {
        let mut t = PromptTemplate::default();
        t.in_context_examples.pop();
        assert!(t.validate().is_err());
    }
}
