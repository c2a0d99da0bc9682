//! Scalar arithmetic expressions used to define vector fields in text.
//!
//! Grammar, from loosest to tightest binding:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          (right associative)
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! So `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`. Functions: `sqrt sin cos tan exp ln abs`.
//! Evaluation never propagates NaN: domain violations are reported as errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Default relative step of the central finite difference.
pub const FD_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
    #[error("number out of range at byte {offset}")]
    NumberRange { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::NumberRange { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("{what} in `{subexpr}`")]
    Domain { what: String, subexpr: String },
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.keys().cloned().collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.values().copied().collect()
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    let digits = k;
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    if k == digits {
                        return Err(ParseError::Syntax {
                            offset: k,
                            expected: "exponent digits".into(),
                            found: found_at(text, k),
                        });
                    }
                    j = k;
                }
                let literal = &text[i..j];
                let value: f64 = literal.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: "number".into(),
                    found: format!("`{literal}`"),
                })?;
                if !value.is_finite() {
                    return Err(ParseError::NumberRange { offset: start });
                }
                i = j;
                out.push((start, Tok::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((start, Tok::Ident(text[i..j].to_string())));
                i = j;
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "expression".into(),
                    found: found_at(text, start),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

fn found_at(text: &str, offset: usize) -> String {
    match text[offset..].chars().next() {
        Some(c) => format!("`{c}`"),
        None => "end of input".into(),
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        offset,
                        name: name.clone(),
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if Func::from_name(&name).is_some() {
                    Err(self.unexpected(&format!("`(` after function `{name}`")))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.unexpected("number, variable, function call or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`)`"))
        }
    }
}

/// Parses an expression. Errors carry the byte offset of the offending token.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    if *p.peek() == Tok::End {
        return Err(p.unexpected("expression"));
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_tree(self, f)
    }
}

// Fully parenthesized form; re-parsing yields the same tree.
fn fmt_tree(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Num(v) => write!(f, "{v:?}"),
        Expr::Var(name) => write!(f, "{name}"),
        Expr::Neg(inner) => {
            write!(f, "(-")?;
            fmt_tree(inner, f)?;
            write!(f, ")")
        }
        Expr::Binary(op, a, b) => {
            write!(f, "(")?;
            fmt_tree(a, f)?;
            write!(f, " {} ", op.symbol())?;
            fmt_tree(b, f)?;
            write!(f, ")")
        }
        Expr::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            fmt_tree(arg, f)?;
            write!(f, ")")
        }
    }
}

impl Expr {
    /// Names of all variables referenced by the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Returns the variable name if the expression is a bare variable.
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(n) => Some(n),
            _ => None,
        }
    }

    /// Resolves variable names against a fixed slot layout.
    pub fn compile(&self, names: &[&str]) -> Result<CompiledExpr, EvalError> {
        let layout: Arc<[String]> = names.iter().map(|s| s.to_string()).collect();
        let node = self.to_node(&layout)?;
        Ok(CompiledExpr {
            node,
            names: layout,
            source: self.clone(),
        })
    }

    fn to_node(&self, names: &[String]) -> Result<Node, EvalError> {
        Ok(match self {
            Expr::Num(v) => Node::Num(*v),
            Expr::Var(n) => Node::Var(
                names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| EvalError::Unbound(n.clone()))?,
            ),
            Expr::Neg(a) => Node::Neg(Box::new(a.to_node(names)?)),
            Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(a.to_node(names)?), Box::new(b.to_node(names)?)),
            Expr::Call(func, a) => Node::Call(*func, Box::new(a.to_node(names)?)),
        })
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        let names = bindings.names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.compile(&refs)?.eval(&bindings.values())
    }
}

/// Central difference `(f(x+s) - f(x-s)) / 2s` with `s = scale * max(1, |x|)`.
pub fn diff_fd(e: &Expr, var: &str, bindings: &Bindings, scale: f64) -> Result<f64, EvalError> {
    let names = bindings.names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let idx = names
        .iter()
        .position(|n| n == var)
        .ok_or_else(|| EvalError::Unbound(var.to_string()))?;
    e.compile(&refs)?.diff(idx, &bindings.values(), scale)
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// An expression with variables resolved to slots of a value slice.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    node: Node,
    names: Arc<[String]>,
    source: Expr,
}

impl PartialEq for CompiledExpr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.names == other.names
    }
}

impl CompiledExpr {
    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        debug_assert!(values.len() >= self.names.len());
        self.eval_node(&self.node, values)
    }

    /// Central finite difference with respect to slot `idx`.
    pub fn diff(&self, idx: usize, values: &[f64], scale: f64) -> Result<f64, EvalError> {
        let x = values[idx];
        let s = scale * x.abs().max(1.0);
        let mut buf = values.to_vec();
        buf[idx] = x + s;
        let fp = self.eval(&buf)?;
        buf[idx] = x - s;
        let fm = self.eval(&buf)?;
        Ok((fp - fm) / (2.0 * s))
    }

    fn domain(&self, what: &str, node: &Node) -> EvalError {
        let tree = self.node_expr(node);
        EvalError::Domain {
            what: what.to_string(),
            subexpr: tree.to_string(),
        }
    }

    fn node_expr(&self, node: &Node) -> Expr {
        match node {
            Node::Num(v) => Expr::Num(*v),
            Node::Var(i) => Expr::Var(self.names[*i].clone()),
            Node::Neg(a) => Expr::Neg(Box::new(self.node_expr(a))),
            Node::Binary(op, a, b) => Expr::Binary(*op, Box::new(self.node_expr(a)), Box::new(self.node_expr(b))),
            Node::Call(f, a) => Expr::Call(*f, Box::new(self.node_expr(a))),
        }
    }

    fn eval_node(&self, node: &Node, v: &[f64]) -> Result<f64, EvalError> {
        let out = match node {
            Node::Num(x) => *x,
            Node::Var(i) => v[*i],
            Node::Neg(a) => -self.eval_node(a, v)?,
            Node::Binary(op, a, b) => {
                let x = self.eval_node(a, v)?;
                let y = self.eval_node(b, v)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(self.domain("division by zero", node));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        if x < 0.0 && y.fract() != 0.0 {
                            return Err(self.domain("non-integer power of a negative base", node));
                        }
                        if x == 0.0 && y < 0.0 {
                            return Err(self.domain("division by zero", node));
                        }
                        if y.fract() == 0.0 && y.abs() <= 64.0 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                }
            }
            Node::Call(func, a) => {
                let x = self.eval_node(a, v)?;
                match func {
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain("square root of a negative number", node));
                        }
                        x.sqrt()
                    }
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(self.domain("logarithm of a non-positive number", node));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                }
            }
        };
        if !out.is_finite() {
            return Err(self.domain("non-finite result", node));
        }
        Ok(out)
    }
}

impl fmt::Display for CompiledExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str, b: &Bindings) -> Result<f64, EvalError> {
        parse(text).unwrap().eval(b)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*4", &Bindings::new()).unwrap(), 14.0);
        assert_eq!(ev("-x1^2", &Bindings::new().with("x1", 2.0)).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", &Bindings::new()).unwrap(), 512.0);
        assert_eq!(ev("8/2/2", &Bindings::new()).unwrap(), 2.0);
        assert_eq!(ev("2^-1", &Bindings::new()).unwrap(), 0.5);
        assert_eq!(ev("(2+3)*4", &Bindings::new()).unwrap(), 20.0);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(ev("sqrt(1+8*x2)", &Bindings::new().with("x2", 1.0)).unwrap(), 3.0);
        let b = Bindings::new().with("x1", 1.0).with("x2", 3.0);
        assert_eq!(ev("x1 + 2*x2", &b).unwrap(), 7.0);
        let golden = ev("(1+sqrt(5))/2", &Bindings::new()).unwrap();
        assert!((golden - 1.618_033_988_749_895).abs() < 1e-12);
        assert_eq!(ev("1.5e2 + .5", &Bindings::new()).unwrap(), 150.5);
    }

    #[test]
    fn domain_errors() {
        let err = ev("x2/(x2-2)", &Bindings::new().with("x2", 2.0)).unwrap_err();
        match err {
            EvalError::Domain { what, subexpr } => {
                assert_eq!(what, "division by zero");
                assert!(subexpr.contains("x2"));
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            ev("sqrt(-1)", &Bindings::new()),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(ev("ln(0)", &Bindings::new()), Err(EvalError::Domain { .. })));
        assert!(matches!(
            ev("(-8)^(1/3)", &Bindings::new()),
            Err(EvalError::Domain { .. })
        ));
        assert_eq!(ev("(-2)^3", &Bindings::new()).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let err = ev("x1 + y", &Bindings::new().with("x1", 1.0)).unwrap_err();
        assert_eq!(err, EvalError::Unbound("y".into()));
    }

    #[test]
    fn finite_differences() {
        let d = diff_fd(&parse("x^2").unwrap(), "x", &Bindings::new().with("x", 3.0), FD_SCALE).unwrap();
        assert!((d - 6.0).abs() < 1e-6);
        let d = diff_fd(
            &parse("sin(x)").unwrap(),
            "x",
            &Bindings::new().with("x", 0.0),
            FD_SCALE,
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let d = diff_fd(
            &parse("1 - x2 - x2^2").unwrap(),
            "x2",
            &Bindings::new().with("x2", 0.618033),
            FD_SCALE,
        )
        .unwrap();
        assert!((d - (-1.0 - 2.0 * 0.618033)).abs() < 1e-5);
        assert!((d + 2.236).abs() < 1e-3);
    }

    #[test]
    fn malformed_inputs_are_located() {
        let corpus: &[(&str, usize)] = &[
            ("", 0),
            ("(1+2", 4),
            ("1+2)", 3),
            ("x2 +", 4),
            ("3*", 2),
            ("sin()", 4),
            ("foo(1)", 0),
            ("2 3", 2),
            ("1e", 2),
            ("x # y", 2),
            ("sqrt", 4),
            ("((x)", 4),
            ("*2", 0),
            ("1 ^", 3),
        ];
        for (text, offset) in corpus {
            let err = parse(text).expect_err(text);
            assert_eq!(err.offset(), *offset, "{text}: {err}");
        }
        assert!(matches!(parse("foo(1)"), Err(ParseError::UnknownFunction { .. })));
    }

    #[test]
    fn evaluation_is_bit_deterministic() {
        let e = parse("sin(x1)*exp(x2) - ln(1+x1^2)/sqrt(2+x2)").unwrap();
        let c = e.compile(&["x1", "x2"]).unwrap();
        let a = c.eval(&[0.3, -0.7]).unwrap();
        let b = c.eval(&[0.3, -0.7]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            prop::sample::select(vec!["x1", "x2", "eps", "lambda", "y"]).prop_map(|s| Expr::Var(s.into())),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
                (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), printed);
        }

        #[test]
        fn quadratic_derivative_matches_analytic(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, x in -10.0f64..10.0) {
            let e = parse(&format!("({a:?}) + ({b:?})*x + ({c:?})*x^2")).unwrap();
            let d = diff_fd(&e, "x", &Bindings::new().with("x", x), FD_SCALE).unwrap();
            let exact = b + 2.0 * c * x;
            prop_assert!((d - exact).abs() <= 1e-8 * exact.abs().max(1.0));
        }
    }
}
