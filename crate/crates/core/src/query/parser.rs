//! Lexer and recursive-descent parser.
//!
//! ```text
//! program  := stmt+
//! stmt     := "let" IDENT "=" expr ";" | "solution" "=" expr ";"
//! expr     := or
//! or       := and (("or" | "||") and)*
//! and      := cmp (("and" | "&&") cmp)*
//! cmp      := sum (("==" | "!=" | "<" | "<=" | ">" | ">=") sum)?
//! sum      := product (("+" | "-") product)*
//! product  := unary (("*" | "/") unary)*
//! unary    := ("-" | "not" | "!") unary | primary
//! primary  := NUMBER | STRING | "true" | "false" | IDENT | call
//!           | "[" (expr ("," expr)*)? "]" | "(" expr ")"
//! call     := IDENT "(" (arg ("," arg)*)? ")"
//! arg      := IDENT "->" expr | IDENT "=" expr | expr
//! ```
//!
//! `#` and `//` start comments that run to the end of the line.

use super::ast::{Arg, BinaryOp, Expr, ExprKind, Program, Span, Stmt, UnaryOp};
use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Let,
    Solution,
    True,
    False,
    And,
    Or,
    Not,
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(v) => format!("number `{v}`"),
            Tok::Str(_) => "string".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Let => "let",
            Tok::Solution => "solution",
            Tok::True => "true",
            Tok::False => "false",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::Arrow => "->",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ident(_) | Tok::Number(_) | Tok::Str(_) | Tok::Eof => "",
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

fn syntax(span: Span, message: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.src[self.pos..].chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            column: self.column,
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => self.skip_line(),
                Some('/') if self.peek2() == Some('/') => self.skip_line(),
                _ => return,
            }
        }
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.bump() {
            if c == '\n' {
                return;
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, QueryError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.here();
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, start));
                return Ok(out);
            };
            let tok = if c.is_ascii_digit()
                || (c == '.' && self.peek2().is_some_and(|d| d.is_ascii_digit()))
            {
                self.number(start)?
            } else if c.is_alphabetic() || c == '_' {
                self.word()
            } else if c == '"' {
                self.string(start)?
            } else {
                self.bump();
                let two = |lx: &mut Self, next: char, yes: Tok, no: Tok| {
                    if lx.peek() == Some(next) {
                        lx.bump();
                        yes
                    } else {
                        no
                    }
                };
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '-' => two(&mut self, '>', Tok::Arrow, Tok::Minus),
                    '=' => two(&mut self, '=', Tok::EqEq, Tok::Assign),
                    '<' => two(&mut self, '=', Tok::Le, Tok::Lt),
                    '>' => two(&mut self, '=', Tok::Ge, Tok::Gt),
                    '!' => two(&mut self, '=', Tok::Ne, Tok::Not),
                    '&' if self.peek() == Some('&') => {
                        self.bump();
                        Tok::And
                    }
                    '|' if self.peek() == Some('|') => {
                        self.bump();
                        Tok::Or
                    }
                    other => return Err(syntax(start, format!("unexpected character `{other}`"))),
                }
            };
            let span = Span {
                end: self.pos,
                ..start
            };
            out.push((tok, span));
        }
    }

    fn number(&mut self, start: Span) -> Result<Tok, QueryError> {
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.bump();
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = matches!(self.peek2(), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.src[self.pos..]
                .chars()
                .nth(digit_at)
                .is_some_and(|c| c.is_ascii_digit())
            {
                self.bump();
                if sign {
                    self.bump();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start.start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Number(v)),
            _ => Err(syntax(start, format!("malformed number `{text}`"))),
        }
    }

    fn word(&mut self) -> Tok {
        let begin = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.bump();
        }
        match &self.src[begin..self.pos] {
            "let" => Tok::Let,
            "solution" => Tok::Solution,
            "true" => Tok::True,
            "false" => Tok::False,
            "and" => Tok::And,
            "or" => Tok::Or,
            "not" => Tok::Not,
            w => Tok::Ident(w.to_string()),
        }
    }

    fn string(&mut self, start: Span) -> Result<Tok, QueryError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(syntax(start, "unterminated string")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    other => {
                        return Err(syntax(
                            start,
                            format!(
                                "unknown escape `\\{}`",
                                other.map(String::from).unwrap_or_default()
                            ),
                        ))
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.at].1
    }

    fn prev_span(&self) -> Span {
        self.toks[self.at.saturating_sub(1)].1
    }

    fn advance(&mut self) -> (Tok, Span) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, context: &str) -> Result<Span, QueryError> {
        if self.peek() == t {
            Ok(self.advance().1)
        } else {
            Err(syntax(
                self.span(),
                format!(
                    "expected `{}` {context}, found {}",
                    t.text(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn ident(&mut self, context: &str) -> Result<(String, Span), QueryError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.advance().1;
                Ok((name, span))
            }
            other => Err(syntax(
                self.span(),
                format!("expected identifier {context}, found {}", other.describe()),
            )),
        }
    }

    fn program(&mut self) -> Result<Program, QueryError> {
        let mut statements = Vec::new();
        while *self.peek() != Tok::Eof {
            statements.push(self.statement()?);
        }
        let solutions: Vec<Span> = statements
            .iter()
            .filter(|s| matches!(s, Stmt::Solution { .. }))
            .map(Stmt::span)
            .collect();
        match solutions.as_slice() {
            [] => Err(syntax(self.span(), "program never assigns `solution`")),
            [_] => Ok(Program { statements }),
            [_, second, ..] => Err(syntax(*second, "`solution` is assigned more than once")),
        }
    }

    fn statement(&mut self) -> Result<Stmt, QueryError> {
        let start = self.span();
        match self.peek() {
            Tok::Let => {
                self.advance();
                let (name, _) = self.ident("after `let`")?;
                self.expect(&Tok::Assign, "after the bound name")?;
                let value = self.expr()?;
                let end = self.expect(&Tok::Semi, "after the expression")?;
                Ok(Stmt::Let {
                    name,
                    value,
                    span: start.to(end),
                })
            }
            Tok::Solution => {
                self.advance();
                self.expect(&Tok::Assign, "after `solution`")?;
                let value = self.expr()?;
                let end = self.expect(&Tok::Semi, "after the expression")?;
                Ok(Stmt::Solution {
                    value,
                    span: start.to(end),
                })
            }
            other => Err(syntax(
                start,
                format!("expected `let` or `solution`, found {}", other.describe()),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        self.or()
    }

    fn binary_chain(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, QueryError>,
        op_of: fn(&Tok) -> Option<BinaryOp>,
    ) -> Result<Expr, QueryError> {
        let mut lhs = next(self)?;
        while let Some(op) = op_of(self.peek()) {
            self.advance();
            let rhs = next(self)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, QueryError> {
        self.binary_chain(Self::and, |t| (*t == Tok::Or).then_some(BinaryOp::Or))
    }

    fn and(&mut self) -> Result<Expr, QueryError> {
        self.binary_chain(Self::comparison, |t| {
            (*t == Tok::And).then_some(BinaryOp::And)
        })
    }

    fn comparison(&mut self) -> Result<Expr, QueryError> {
        let cmp = |t: &Tok| match t {
            Tok::EqEq => Some(BinaryOp::Eq),
            Tok::Ne => Some(BinaryOp::Ne),
            Tok::Lt => Some(BinaryOp::Lt),
            Tok::Le => Some(BinaryOp::Le),
            Tok::Gt => Some(BinaryOp::Gt),
            Tok::Ge => Some(BinaryOp::Ge),
            _ => None,
        };
        let lhs = self.sum()?;
        let Some(op) = cmp(self.peek()) else {
            return Ok(lhs);
        };
        self.advance();
        let rhs = self.sum()?;
        if cmp(self.peek()).is_some() {
            return Err(syntax(
                self.span(),
                "comparisons cannot be chained; use `and`",
            ));
        }
        let span = lhs.span.to(rhs.span);
        Ok(Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        ))
    }

    fn sum(&mut self) -> Result<Expr, QueryError> {
        self.binary_chain(Self::product, |t| match t {
            Tok::Plus => Some(BinaryOp::Add),
            Tok::Minus => Some(BinaryOp::Sub),
            _ => None,
        })
    }

    fn product(&mut self) -> Result<Expr, QueryError> {
        self.binary_chain(Self::unary, |t| match t {
            Tok::Star => Some(BinaryOp::Mul),
            Tok::Slash => Some(BinaryOp::Div),
            _ => None,
        })
    }

    fn unary(&mut self) -> Result<Expr, QueryError> {
        let start = self.span();
        let op = match self.peek() {
            Tok::Minus => UnaryOp::Neg,
            Tok::Not => UnaryOp::Not,
            _ => return self.primary(),
        };
        self.advance();
        if op == UnaryOp::Neg {
            if let Tok::Number(v) = *self.peek() {
                let end = self.advance().1;
                return Ok(Expr::new(ExprKind::Number(-v), start.to(end)));
            }
        }
        let operand = self.unary()?;
        let span = start.to(operand.span);
        Ok(Expr::new(
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            span,
        ))
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        let (tok, span) = self.advance();
        let kind = match tok {
            Tok::Number(v) => ExprKind::Number(v),
            Tok::Str(s) => ExprKind::Str(s),
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    return self.call(name, span);
                }
                ExprKind::Ident(name)
            }
            Tok::LParen => {
                let inner = self.expr()?;
                let end = self.expect(&Tok::RParen, "to close the parenthesis")?;
                return Ok(Expr::new(inner.kind, span.to(end)));
            }
            Tok::LBracket => {
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(&Tok::Comma, "between list items")?;
                    }
                }
                return Ok(Expr::new(ExprKind::List(items), span.to(self.prev_span())));
            }
            other => {
                return Err(syntax(
                    span,
                    format!("expected an expression, found {}", other.describe()),
                ))
            }
        };
        Ok(Expr::new(kind, span))
    }

    fn call(&mut self, name: String, start: Span) -> Result<Expr, QueryError> {
        self.expect(&Tok::LParen, "to open the argument list")?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                args.push(self.arg()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma, "between arguments")?;
            }
        }
        let span = start.to(self.prev_span());
        Ok(Expr::new(ExprKind::Call { name, args }, span))
    }

    fn arg(&mut self) -> Result<Arg, QueryError> {
        if let Tok::Ident(name) = self.peek().clone() {
            match self.peek_at(1) {
                Tok::Arrow => {
                    self.advance();
                    self.advance();
                    let body = self.expr()?;
                    return Ok(Arg::Lambda { param: name, body });
                }
                Tok::Assign => {
                    self.advance();
                    self.advance();
                    let value = self.expr()?;
                    return Ok(Arg::Named { name, value });
                }
                _ => {}
            }
        }
        Ok(Arg::Positional(self.expr()?))
    }
}

pub fn parse(source: &str) -> Result<Program, QueryError> {
    let toks = Lexer::new(source).tokens()?;
    Parser { toks, at: 0 }.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_pos(src: &str) -> (u32, u32) {
        match parse(src) {
            Err(QueryError::Syntax { line, column, .. }) => (line, column),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn two_statement_program() {
        let p = parse(r#"let hs = search("hole", sides=[top]); solution = count(hs);"#).unwrap();
        assert_eq!(p.statements.len(), 2);
        match &p.statements[0] {
            Stmt::Let { value, .. } => match &value.kind {
                ExprKind::Call { name, args } => {
                    assert_eq!(name, "search");
                    assert!(matches!(&args[1], Arg::Named { name, .. } if name == "sides"));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_expression_reports_position() {
        assert_eq!(err_pos("solution = ;"), (1, 12));
        assert_eq!(err_pos("let a = 1;\nsolution = (a + );"), (2, 17));
    }

    #[test]
    fn solution_must_be_assigned_once() {
        assert!(parse("let a = 1;").is_err());
        assert!(parse("solution = 1; solution = 2;").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse("solution = 1 - 2 - 3 * 4 < 5 and not true or false;").unwrap();
        assert_eq!(
            p.to_string(),
            "solution = 1 - 2 - 3 * 4 < 5 and not true or false;\n"
        );
        let q = parse("solution = 1 - (2 - 3);").unwrap();
        assert_eq!(q.to_string(), "solution = 1 - (2 - 3);\n");
    }

    #[test]
    fn lambda_round_trip() {
        let src = "let hs = search(\"hole\");\nsolution = map(hs, p -> radius(p));\n";
        let p = parse(src).unwrap();
        assert_eq!(p.to_string(), src);
        assert_eq!(parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn comments_and_escapes() {
        let p = parse("# note\nsolution = \"a \\\"q\\\" b\"; // trailing").unwrap();
        match &p.statements[0] {
            Stmt::Solution { value, .. } => {
                assert_eq!(value.kind, ExprKind::Str("a \"q\" b".into()))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_literals() {
        let p = parse("solution = -5 - -(3);").unwrap();
        assert_eq!(parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn chained_comparison_is_rejected() {
        assert!(parse("solution = 1 < 2 < 3;").is_err());
    }
}
