//! Line-oriented `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! [system]
//! kind = piecewise        # piecewise | nsff | ccomb
//! dim = 2
//! h = "x1"
//! xplus = ["x2-1", "-1"]
//! xminus = ["x2", "1"]
//!
//! [transition]
//! phi = cubic
//!
//! [experiment]
//! range = "x2=-1:2"
//! n = 300
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::ccomb::ContinuousCombination;
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::nsff::{nsff_names, NonsmoothSlowFast};
use crate::psys::{state_names, PiecewiseSystem};
use crate::regularize::{builtin_phi, bump_psi, BumpPsi, PhiKind, Transition};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    Word(String),
    List(Vec<Value>),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Text of a string or bare word; numbers use their shortest round-trip form.
    pub fn as_text(&self) -> Option<String> {
        match self {
            Value::Str(s) | Value::Word(s) => Some(s.clone()),
            Value::Num(v) => Some(format_num(*v)),
            Value::List(_) => None,
        }
    }

    pub fn as_f64_list(&self) -> Option<Vec<f64>> {
        match self {
            Value::List(v) => v.iter().map(Value::as_f64).collect(),
            Value::Num(v) => Some(vec![*v]),
            _ => None,
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            Value::Num(v) => out.push_str(&format_num(*v)),
            Value::Word(w) => out.push_str(w),
            Value::Str(s) => write_str(out, s),
            Value::List(items) => {
                out.push('[');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    it.write(out);
                }
                out.push(']');
            }
        }
    }
}

fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Piecewise,
    Nsff,
    Ccomb,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Piecewise => "piecewise",
            SystemKind::Nsff => "nsff",
            SystemKind::Ccomb => "ccomb",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [SystemKind::Piecewise, SystemKind::Nsff, SystemKind::Ccomb]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionSpec {
    Phi(PhiKind),
    /// `coord` is 1-based.
    Psi {
        a0: f64,
        b0: f64,
        coord: usize,
        amp: f64,
        width: f64,
    },
}

impl TransitionSpec {
    pub fn build(&self) -> Result<Transition> {
        match *self {
            TransitionSpec::Phi(k) => builtin_phi(k.name()),
            TransitionSpec::Psi {
                a0,
                b0,
                coord,
                amp,
                width,
            } => {
                if coord == 0 {
                    return Err(semantic("coord", "coordinates are numbered from 1"));
                }
                let mut psi = BumpPsi::new(a0, b0, coord - 1);
                psi.amp = amp;
                psi.width = width;
                bump_psi(psi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub dim: usize,
    pub h: String,
    /// `X⁺` (piecewise, ccomb) or `F` (nsff).
    pub xplus: Vec<String>,
    /// `X⁻` (piecewise, ccomb) or `G` (nsff).
    pub xminus: Vec<String>,
    pub xtilde: Vec<String>,
    /// `H` (nsff, optional for ccomb).
    pub fast: Option<String>,
    pub transition: TransitionSpec,
    pub experiment: BTreeMap<String, Value>,
}

/// A compiled system.
#[derive(Debug, Clone)]
pub enum BuiltSystem {
    Piecewise(PiecewiseSystem),
    Nsff(NonsmoothSlowFast),
    Ccomb(ContinuousCombination),
}

fn semantic(field: &str, message: impl Into<String>) -> Error {
    Error::Semantic {
        field: field.into(),
        message: message.into(),
    }
}

impl SystemConfig {
    pub fn piecewise(xplus: &[&str], xminus: &[&str], h: &str) -> Self {
        SystemConfig {
            kind: SystemKind::Piecewise,
            dim: xplus.len(),
            h: h.into(),
            xplus: xplus.iter().map(|s| s.to_string()).collect(),
            xminus: xminus.iter().map(|s| s.to_string()).collect(),
            xtilde: vec![],
            fast: None,
            transition: TransitionSpec::Phi(PhiKind::Cubic),
            experiment: BTreeMap::new(),
        }
    }

    pub fn with_experiment(mut self, key: &str, v: Value) -> Self {
        self.experiment.insert(key.into(), v);
        self
    }

    fn var_names(&self) -> Vec<String> {
        match self.kind {
            SystemKind::Piecewise => state_names(self.dim),
            SystemKind::Nsff => nsff_names(self.dim),
            SystemKind::Ccomb => nsff_names(self.dim),
        }
    }

    /// Dimension and variable checks, then compilation.
    pub fn build(&self) -> Result<BuiltSystem> {
        let n = self.dim;
        let (plus, minus) = match self.kind {
            SystemKind::Nsff => ("F", "G"),
            _ => ("xplus", "xminus"),
        };
        for (field, v) in [(plus, &self.xplus), (minus, &self.xminus)] {
            if v.len() != n {
                return Err(semantic(
                    field,
                    format!("dimension mismatch: {} components but dim = {n}", v.len()),
                ));
            }
        }
        if self.kind == SystemKind::Ccomb && self.xtilde.len() != n {
            return Err(semantic(
                "xtilde",
                format!("dimension mismatch: {} components but dim = {n}", self.xtilde.len()),
            ));
        }
        let names = self.var_names();
        let check_vars = |field: &str, text: &str, extra: &[&str]| -> Result<()> {
            for v in parse(text)?.variables() {
                if !names.contains(&v) && !extra.contains(&v.as_str()) {
                    return Err(semantic(field, format!("unknown variable `{v}` in \"{text}\"")));
                }
            }
            Ok(())
        };
        for (field, list) in [(plus, &self.xplus), (minus, &self.xminus)] {
            for e in list.iter() {
                check_vars(field, e, &[])?;
            }
        }
        for e in &self.xtilde {
            check_vars("xtilde", e, &["lambda"])?;
        }
        check_vars("h", &self.h, &[])?;
        if let Some(f) = &self.fast {
            check_vars("H", f, &[])?;
        }
        fn refs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        match self.kind {
            SystemKind::Piecewise => Ok(BuiltSystem::Piecewise(PiecewiseSystem::new(
                &refs(&self.xplus),
                &refs(&self.xminus),
                &self.h,
            )?)),
            SystemKind::Nsff => {
                let fast = self
                    .fast
                    .as_deref()
                    .ok_or_else(|| semantic("H", "nsff systems need H"))?;
                Ok(BuiltSystem::Nsff(NonsmoothSlowFast::new(
                    &refs(&self.xplus),
                    &refs(&self.xminus),
                    fast,
                    &self.h,
                )?))
            }
            SystemKind::Ccomb => {
                if parse(&self.h)?.as_var() != Some("x1") {
                    return Err(Error::NotCanonical(format!(
                        "h = {}; continuous combinations need h = x1",
                        self.h
                    )));
                }
                Ok(BuiltSystem::Ccomb(ContinuousCombination::new(
                    &refs(&self.xplus),
                    &refs(&self.xminus),
                    &refs(&self.xtilde),
                    self.fast.as_deref(),
                )?))
            }
        }
    }

    /// Canonical text form; `load_str(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |v: &[String]| Value::List(v.iter().map(|s| Value::Str(s.clone())).collect());
        let line = |out: &mut String, k: &str, v: Value| {
            let _ = write!(out, "{k} = ");
            v.write(out);
            out.push('\n');
        };
        out.push_str("[system]\n");
        line(&mut out, "kind", Value::Word(self.kind.name().into()));
        line(&mut out, "dim", Value::Num(self.dim as f64));
        line(&mut out, "h", Value::Str(self.h.clone()));
        match self.kind {
            SystemKind::Nsff => {
                line(&mut out, "F", list(&self.xplus));
                line(&mut out, "G", list(&self.xminus));
            }
            _ => {
                line(&mut out, "xplus", list(&self.xplus));
                line(&mut out, "xminus", list(&self.xminus));
            }
        }
        if self.kind == SystemKind::Ccomb {
            line(&mut out, "xtilde", list(&self.xtilde));
        }
        if let Some(f) = &self.fast {
            line(&mut out, "H", Value::Str(f.clone()));
        }
        out.push_str("\n[transition]\n");
        match &self.transition {
            TransitionSpec::Phi(k) => line(&mut out, "phi", Value::Word(k.name().into())),
            TransitionSpec::Psi {
                a0,
                b0,
                coord,
                amp,
                width,
            } => {
                line(&mut out, "psi", Value::Word("bump".into()));
                line(&mut out, "a0", Value::Num(*a0));
                line(&mut out, "b0", Value::Num(*b0));
                line(&mut out, "coord", Value::Num(*coord as f64));
                line(&mut out, "amp", Value::Num(*amp));
                line(&mut out, "width", Value::Num(*width));
            }
        }
        if !self.experiment.is_empty() {
            out.push_str("\n[experiment]\n");
            for (k, v) in &self.experiment {
                line(&mut out, k, v.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    value: SValue,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum SValue {
    Num(f64),
    Str(String),
    Word(String),
    List(Vec<Spanned>),
}

impl Spanned {
    fn plain(&self) -> Value {
        match &self.value {
            SValue::Num(v) => Value::Num(*v),
            SValue::Str(s) => Value::Str(s.clone()),
            SValue::Word(w) => Value::Word(w.clone()),
            SValue::List(v) => Value::List(v.iter().map(Spanned::plain).collect()),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn skip_inline(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.bump();
        }
    }

    fn skip_comment(&mut self) {
        if self.peek() == Some('#') {
            while !matches!(self.peek(), None | Some('\n')) {
                self.bump();
            }
        }
    }

    fn skip_all(&mut self) {
        loop {
            self.skip_inline();
            self.skip_comment();
            if self.peek() == Some('\n') {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn end_of_line(&mut self) -> Result<()> {
        self.skip_inline();
        self.skip_comment();
        match self.peek() {
            None => Ok(()),
            Some('\n') => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.err(format!("unexpected `{c}` after value"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if s.is_empty() {
            return Err(self.err(match self.peek() {
                Some(c) => format!("expected a key, found `{c}`"),
                None => "expected a key".into(),
            }));
        }
        Ok(s)
    }

    fn value(&mut self) -> Result<Spanned> {
        let (line, col) = (self.line, self.col);
        let value = match self.peek() {
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some('\n') => {
                            return Err(Error::Config {
                                line,
                                column: col,
                                message: "unterminated string".into(),
                            })
                        }
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            _ => return Err(self.err("invalid escape in string")),
                        },
                        Some(c) => s.push(c),
                    }
                }
                SValue::Str(s)
            }
            Some('[') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_all();
                    if self.peek() == Some(']') {
                        self.bump();
                        break;
                    }
                    items.push(self.value()?);
                    self.skip_all();
                    match self.peek() {
                        Some(',') => {
                            self.bump();
                        }
                        Some(']') => {
                            self.bump();
                            break;
                        }
                        Some(c) => return Err(self.err(format!("expected `,` or `]`, found `{c}`"))),
                        None => return Err(self.err("unterminated list")),
                    }
                }
                SValue::List(items)
            }
            Some(c) if !matches!(c, ',' | ']' | '#' | '\n' | ' ' | '\t' | '\r') => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if matches!(c, ',' | ']' | '#' | '\n' | ' ' | '\t' | '\r' | '"' | '[') {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() && s.chars().any(|c| c.is_ascii_digit()) => SValue::Num(v),
                    _ => SValue::Word(s),
                }
            }
            Some(c) => return Err(self.err(format!("expected a value, found `{c}`"))),
            None => return Err(self.err("expected a value, found end of file")),
        };
        Ok(Spanned { value, line, col })
    }
}

type Section = Vec<(String, Spanned)>;

fn parse_sections(src: &str) -> Result<BTreeMap<String, Section>> {
    let mut lx = Lexer::new(src);
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    loop {
        lx.skip_all();
        let Some(c) = lx.peek() else { break };
        if c == '[' {
            let (line, col) = (lx.line, lx.col);
            lx.bump();
            lx.skip_inline();
            let name = lx.ident()?;
            lx.skip_inline();
            if lx.peek() != Some(']') {
                return Err(lx.err("expected `]` after section name"));
            }
            lx.bump();
            lx.end_of_line()?;
            if !matches!(name.as_str(), "system" | "transition" | "experiment") {
                return Err(Error::Config {
                    line,
                    column: col,
                    message: format!("unknown section [{name}]"),
                });
            }
            if sections.contains_key(&name) {
                return Err(Error::Config {
                    line,
                    column: col,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.insert(name.clone(), Vec::new());
            current = Some(name);
            continue;
        }
        let (line, col) = (lx.line, lx.col);
        let key = lx.ident()?;
        let Some(sec) = current.as_ref() else {
            return Err(Error::Config {
                line,
                column: col,
                message: format!("key `{key}` outside of any section"),
            });
        };
        lx.skip_inline();
        if lx.peek() != Some('=') {
            return Err(lx.err(format!("expected `=` after `{key}`")));
        }
        lx.bump();
        lx.skip_inline();
        let v = lx.value()?;
        lx.end_of_line()?;
        let entries = sections.get_mut(sec).expect("section exists");
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config {
                line,
                column: col,
                message: format!("duplicate key `{key}`"),
            });
        }
        entries.push((key, v));
    }
    Ok(sections)
}

fn expr_text(v: &Spanned) -> Result<String> {
    let SValue::Str(s) = &v.value else {
        return Err(v.err("expected a quoted expression"));
    };
    if let Err(e) = parse(s) {
        return Err(Error::Config {
            line: v.line,
            column: v.col + 1 + s[..e.offset().min(s.len())].chars().count(),
            message: e.to_string(),
        });
    }
    Ok(s.clone())
}

fn expr_list(v: &Spanned) -> Result<Vec<String>> {
    let SValue::List(items) = &v.value else {
        return Err(v.err("expected a list of quoted expressions"));
    };
    items.iter().map(expr_text).collect()
}

fn number(v: &Spanned) -> Result<f64> {
    match v.value {
        SValue::Num(x) => Ok(x),
        _ => Err(v.err("expected a number")),
    }
}

fn word(v: &Spanned) -> Result<String> {
    match &v.value {
        SValue::Word(w) | SValue::Str(w) => Ok(w.clone()),
        _ => Err(v.err("expected a name")),
    }
}

/// Parses and validates a configuration text.
pub fn load_str(src: &str) -> Result<SystemConfig> {
    let sections = parse_sections(src)?;
    let system = sections.get("system").ok_or_else(|| Error::Config {
        line: 1,
        column: 1,
        message: "missing [system] section".into(),
    })?;
    let get = |k: &str| system.iter().find(|(key, _)| key == k).map(|(_, v)| v);
    for (k, v) in system {
        if !matches!(
            k.as_str(),
            "kind" | "dim" | "h" | "xplus" | "xminus" | "F" | "G" | "H" | "xtilde"
        ) {
            return Err(v.err(format!("unknown key `{k}` in [system]")));
        }
    }
    let kind_v = get("kind").ok_or_else(|| semantic("kind", "missing"))?;
    let kind =
        SystemKind::from_name(&word(kind_v)?).ok_or_else(|| kind_v.err("kind must be piecewise, nsff or ccomb"))?;
    let dim_v = get("dim").ok_or_else(|| semantic("dim", "missing"))?;
    let dim = number(dim_v)?;
    if dim.fract() != 0.0 || dim < 2.0 {
        return Err(dim_v.err("dim must be an integer >= 2"));
    }
    let h = match get("h") {
        Some(v) => expr_text(v)?,
        None => "x1".into(),
    };
    let (pk, mk) = match kind {
        SystemKind::Nsff => ("F", "G"),
        _ => ("xplus", "xminus"),
    };
    for (k, v) in system {
        let allowed = match kind {
            SystemKind::Piecewise => !matches!(k.as_str(), "F" | "G" | "H" | "xtilde"),
            SystemKind::Nsff => !matches!(k.as_str(), "xplus" | "xminus" | "xtilde"),
            SystemKind::Ccomb => !matches!(k.as_str(), "F" | "G"),
        };
        if !allowed {
            return Err(v.err(format!("key `{k}` is not used by kind = {}", kind.name())));
        }
    }
    let xplus = expr_list(get(pk).ok_or_else(|| semantic(pk, "missing"))?)?;
    let xminus = expr_list(get(mk).ok_or_else(|| semantic(mk, "missing"))?)?;
    let xtilde = match (kind, get("xtilde")) {
        (SystemKind::Ccomb, Some(v)) => expr_list(v)?,
        (SystemKind::Ccomb, None) => return Err(semantic("xtilde", "missing")),
        _ => vec![],
    };
    let fast = get("H").map(expr_text).transpose()?;

    let mut transition = TransitionSpec::Phi(PhiKind::Cubic);
    if let Some(t) = sections.get("transition") {
        let tget = |k: &str| t.iter().find(|(key, _)| key == k).map(|(_, v)| v);
        for (k, v) in t {
            if !matches!(k.as_str(), "phi" | "psi" | "a0" | "b0" | "coord" | "amp" | "width") {
                return Err(v.err(format!("unknown key `{k}` in [transition]")));
            }
        }
        match (tget("phi"), tget("psi")) {
            (Some(_), Some(v)) => return Err(v.err("give either phi or psi, not both")),
            (Some(v), None) => {
                let name = word(v)?;
                transition = TransitionSpec::Phi(
                    PhiKind::from_name(&name).ok_or_else(|| v.err("phi must be cubic, quintic or sine"))?,
                );
            }
            (None, Some(v)) => {
                if word(v)? != "bump" {
                    return Err(v.err("psi must be `bump`"));
                }
                let num = |k: &str, default: f64| tget(k).map(number).unwrap_or(Ok(default));
                let coord_v = tget("coord").ok_or_else(|| v.err("psi needs coord"))?;
                let coord = number(coord_v)?;
                if coord.fract() != 0.0 || coord < 1.0 || coord > (dim + 1.0) {
                    return Err(coord_v.err("coord must be a 1-based coordinate index"));
                }
                transition = TransitionSpec::Psi {
                    a0: num("a0", 0.0)?,
                    b0: num("b0", 0.0)?,
                    coord: coord as usize,
                    amp: num("amp", 1.0)?,
                    width: num("width", 1.0)?,
                };
            }
            (None, None) => {}
        }
    }
    let experiment = sections
        .get("experiment")
        .map(|e| e.iter().map(|(k, v)| (k.clone(), v.plain())).collect())
        .unwrap_or_default();
    let cfg = SystemConfig {
        kind,
        dim: dim as usize,
        h,
        xplus,
        xminus,
        xtilde,
        fast,
        transition,
        experiment,
    };
    cfg.build()?;
    cfg.transition.build()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXBLOW: &str = r#"
[system]
kind = piecewise
dim = 2
h = "x1"
xplus = ["x2-1", "-1"]   # above
xminus = [
  "x2",
  "1",
]

[transition]
psi = bump
a0 = 0
b0 = -2
coord = 2
"#;

    #[test]
    fn loads_a_file() {
        let c = load_str(EXBLOW).unwrap();
        assert_eq!(c.kind, SystemKind::Piecewise);
        assert_eq!(c.xminus, vec!["x2", "1"]);
        assert_eq!(
            c.transition,
            TransitionSpec::Psi {
                a0: 0.0,
                b0: -2.0,
                coord: 2,
                amp: 1.0,
                width: 1.0
            }
        );
        assert_eq!(load_str(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn arity_mismatch_is_semantic() {
        let src = EXBLOW.replace(r#"["x2-1", "-1"]"#, r#"["x2-1", "-1", "0"]"#);
        match load_str(&src) {
            Err(Error::Semantic { field, message }) => {
                assert_eq!(field, "xplus");
                assert!(message.contains("dimension mismatch"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_points_at_trailing_operator() {
        let src = EXBLOW.replace(r#""x2-1""#, r#""x2 +""#);
        match load_str(&src) {
            Err(Error::Config { line, column, .. }) => {
                let l = src.lines().nth(line - 1).unwrap();
                assert!(l.starts_with("xplus"));
                let tail: String = l.chars().skip(column - 1).collect();
                assert!(tail.starts_with('"') || tail.starts_with(','), "{tail}");
                assert_eq!(column, l.find("x2 +").unwrap() + 1 + 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn located_errors() {
        for (src, line) in [
            ("[system]\nkind = piecewise\ndim 2\n", 3),
            ("[sys]\n", 1),
            ("kind = nsff\n", 1),
            ("[system]\nkind = \"piecewise\n", 2),
            ("[system]\nkind = piecewise\nkind = nsff\n", 3),
            ("[system]\nxplus = [\"1\" \"2\"]\n", 2),
        ] {
            match load_str(src) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_variables_rejected() {
        let src = EXBLOW.replace(r#""x2-1""#, r#""x3-1""#);
        assert!(matches!(load_str(&src), Err(Error::Semantic { .. })));
    }

    #[test]
    fn experiment_values() {
        let src = format!("{EXBLOW}\n[experiment]\nrange = \"x2=-1:2\"\nn = 300\nat = [0, 0.5]\nmode = fast\n");
        let c = load_str(&src).unwrap();
        assert_eq!(c.experiment["n"], Value::Num(300.0));
        assert_eq!(c.experiment["at"].as_f64_list().unwrap(), vec![0.0, 0.5]);
        assert_eq!(c.experiment["mode"], Value::Word("fast".into()));
        assert_eq!(load_str(&c.to_text()).unwrap(), c);
    }
}
