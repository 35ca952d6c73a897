//! A small text syntax for generalized functions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := NUMBER | NUMBER '*' factor | atom
//!         | 'D' ('^'? INT)? '(' expr ')' | '(' expr ')'
//! atom   := 'delta' | 'heaviside' | 'nullex'
//!         | 'bar' '(' func ')' | 'tilde' '(' func ')'
//! func   := IDENT ('(' NUMBER (',' NUMBER)* ')')?
//! ```
//!
//! `a - b` is `a + (-1)*b`. A `NUMBER` may carry a leading `-` where a factor
//! starts, so every printed expression parses back to itself.
//!
//! ```
//! use colombeau::exprlang::{parse, to_dag, FunctionRegistry};
//! let reg = FunctionRegistry::default();
//! let e = parse("bar(tanh10) - tilde(tanh10)", &reg).unwrap();
//! assert_eq!(e.to_string(), "bar(tanh10) - tilde(tanh10)");
//! let _dag = to_dag(&e);
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::genfunc::GeneralizedFunction;
use crate::jets::SmoothPrimitive;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {message}")]
pub struct ParseError {
    /// Byte offset into the input where the problem was detected.
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        offset,
        message: message.into(),
    })
}

/// A named smooth function as written in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncRef {
    pub name: String,
    pub args: Vec<f64>,
    pub primitive: SmoothPrimitive,
}

impl fmt::Display for FuncRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Sum(Box<Expr>, Box<Expr>),
    Product(Box<Expr>, Box<Expr>),
    Scalar(f64, Box<Expr>),
    Derivative(u32, Box<Expr>),
    /// A bare constant, lowered to the constant smooth function.
    Number(f64),
    Delta,
    Heaviside,
    NullEx,
    Bar(FuncRef),
    Tilde(FuncRef),
}

type Builder = fn(&[f64]) -> Result<SmoothPrimitive, String>;

#[derive(Clone)]
enum Binding {
    Fixed(SmoothPrimitive),
    Parametric(Builder),
}

/// Case-sensitive names for smooth primitives.
#[derive(Clone)]
pub struct FunctionRegistry {
    entries: BTreeMap<String, Binding>,
}

impl fmt::Debug for FunctionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

fn one_arg(name: &str, args: &[f64]) -> Result<f64, String> {
    match args {
        [x] => Ok(*x),
        _ => Err(format!("{name} takes exactly one argument, got {}", args.len())),
    }
}

impl Default for FunctionRegistry {
    /// `tanh10`, `sin`, `exp`, `gauss`, `poly(c0,...)`, `tanh(k)`, `bump(h)`.
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("tanh10".into(), Binding::Fixed(SmoothPrimitive::TanhScaled(10.0)));
        entries.insert("sin".into(), Binding::Fixed(SmoothPrimitive::Sine));
        entries.insert("exp".into(), Binding::Fixed(SmoothPrimitive::Exponential));
        entries.insert("gauss".into(), Binding::Fixed(SmoothPrimitive::Gaussian));
        entries.insert(
            "poly".into(),
            Binding::Parametric(|args| {
                if args.is_empty() {
                    Err("poly needs at least one coefficient".into())
                } else {
                    Ok(SmoothPrimitive::Polynomial(args.to_vec()))
                }
            }),
        );
        entries.insert(
            "tanh".into(),
            Binding::Parametric(|args| one_arg("tanh", args).map(SmoothPrimitive::TanhScaled)),
        );
        entries.insert(
            "bump".into(),
            Binding::Parametric(|args| {
                let h = one_arg("bump", args)?;
                if h > 0.0 {
                    Ok(SmoothPrimitive::Bump(h))
                } else {
                    Err(format!("bump halfwidth must be positive, got {h}"))
                }
            }),
        );
        Self { entries }
    }
}

impl FunctionRegistry {
    /// Binds `name` to `f`, replacing any earlier binding.
    pub fn insert(&mut self, name: impl Into<String>, f: SmoothPrimitive) {
        self.entries.insert(name.into(), Binding::Fixed(f));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Resolves `name(args)`; `Err` carries a message without position.
    pub fn resolve(&self, name: &str, args: &[f64]) -> Result<SmoothPrimitive, String> {
        match self.entries.get(name) {
            None => {
                let close = close_matches(name, self.names());
                if close.is_empty() {
                    Err(format!("unknown function '{name}'"))
                } else {
                    Err(format!("unknown function '{name}'; did you mean {}?", close.join(", ")))
                }
            }
            Some(Binding::Fixed(p)) if args.is_empty() => Ok(p.clone()),
            Some(Binding::Fixed(_)) => Err(format!("'{name}' takes no arguments")),
            Some(Binding::Parametric(build)) => build(args),
        }
    }
}

fn close_matches<'a>(name: &str, candidates: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = candidates
        .map(|c| (strsim::jaro_winkler(name, c), c))
        .filter(|(s, _)| *s >= 0.75)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, c)| c.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    /// `D` optionally fused with an order, as in `D2`.
    D(Option<u32>),
    Plus,
    Minus,
    Star,
    Caret,
    Comma,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::D(_) => "'D'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Caret => "'^'".into(),
            Tok::Comma => "','".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'^' => Some(Tok::Caret),
            b',' => Some(Tok::Comma),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push((Tok::Num(v), start)),
                _ => return err(start, format!("malformed number '{s}'")),
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let s = &text[start..i];
            if s == "D" {
                out.push((Tok::D(None), start));
            } else if s.len() > 1 && s.starts_with('D') && s[1..].bytes().all(|b| b.is_ascii_digit()) {
                match s[1..].parse::<u32>() {
                    Ok(n) => out.push((Tok::D(Some(n)), start)),
                    Err(_) => return err(start + 1, format!("derivative order '{}' is too large", &s[1..])),
                }
            } else {
                out.push((Tok::Ident(s.to_string()), start));
            }
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return err(start, format!("unexpected character '{ch}'"));
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

const ATOMS: [&str; 5] = ["delta", "heaviside", "nullex", "bar", "tilde"];

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    registry: &'a FunctionRegistry,
    /// Offsets of currently open parentheses.
    open: Vec<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        if *self.peek() == Tok::End {
            if let Some(&o) = self.open.last() {
                return err(o, "unbalanced parentheses: '(' is never closed");
            }
        }
        err(self.offset(), format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn open_paren(&mut self, context: &str) -> Result<(), ParseError> {
        if *self.peek() != Tok::LParen {
            return self.unexpected(&format!("'(' after {context}"));
        }
        let (_, o) = self.bump();
        self.open.push(o);
        Ok(())
    }

    fn close_paren(&mut self) -> Result<(), ParseError> {
        if *self.peek() != Tok::RParen {
            return self.unexpected("')'");
        }
        self.bump();
        self.open.pop();
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Sum(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = Expr::Scalar(-1.0, Box::new(self.term()?));
                    lhs = Expr::Sum(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::Product(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    /// `NUMBER` with an optional leading minus, if one starts here.
    fn literal(&mut self) -> Option<f64> {
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Num(v), _) => {
                self.bump();
                Some(v)
            }
            (Tok::Minus, Tok::Num(v)) => {
                self.bump();
                self.bump();
                Some(-v)
            }
            _ => None,
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if let Some(v) = self.literal() {
            if *self.peek() == Tok::Star {
                self.bump();
                return Ok(Expr::Scalar(v, Box::new(self.factor()?)));
            }
            return Ok(Expr::Number(v));
        }
        match self.peek().clone() {
            Tok::LParen => {
                self.open_paren("")?;
                let e = self.expr()?;
                self.close_paren()?;
                Ok(e)
            }
            Tok::D(fused) => {
                self.bump();
                let n = match fused {
                    Some(n) => n,
                    None if *self.peek() == Tok::Caret => {
                        self.bump();
                        self.order()?
                    }
                    None => match self.peek() {
                        Tok::Num(_) => self.order()?,
                        _ => 1,
                    },
                };
                self.open_paren("'D'")?;
                let e = self.expr()?;
                self.close_paren()?;
                Ok(Expr::Derivative(n, Box::new(e)))
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                match name.as_str() {
                    "delta" => Ok(Expr::Delta),
                    "heaviside" => Ok(Expr::Heaviside),
                    "nullex" => Ok(Expr::NullEx),
                    "bar" | "tilde" => {
                        self.open_paren(&format!("'{name}'"))?;
                        let f = self.func()?;
                        self.close_paren()?;
                        Ok(if name == "bar" { Expr::Bar(f) } else { Expr::Tilde(f) })
                    }
                    _ => {
                        let close = close_matches(&name, ATOMS.iter().copied());
                        let hint = if close.is_empty() {
                            String::new()
                        } else {
                            format!("; did you mean {}?", close.join(", "))
                        };
                        err(at, format!("unknown identifier '{name}'{hint}"))
                    }
                }
            }
            Tok::RParen => err(self.offset(), "unbalanced parentheses: unexpected ')'"),
            _ => self.unexpected("a factor"),
        }
    }

    fn order(&mut self) -> Result<u32, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                self.bump();
                Ok(v as u32)
            }
            Tok::Num(v) => err(at, format!("derivative order must be a nonnegative integer, got {v}")),
            _ => self.unexpected("a derivative order"),
        }
    }

    fn func(&mut self) -> Result<FuncRef, ParseError> {
        let at = self.offset();
        let name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                s
            }
            _ => return self.unexpected("a function name"),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.open_paren("")?;
            loop {
                match self.literal() {
                    Some(v) => args.push(v),
                    None => return self.unexpected("a numeric argument"),
                }
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    _ => break,
                }
            }
            self.close_paren()?;
        }
        match self.registry.resolve(&name, &args) {
            Ok(primitive) => Ok(FuncRef { name, args, primitive }),
            Err(message) => err(at, message),
        }
    }
}

pub fn parse(text: &str, registry: &FunctionRegistry) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        registry,
        open: Vec::new(),
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => err(p.offset(), "unbalanced parentheses: unexpected ')'"),
        _ => p.unexpected("an operator or end of input"),
    }
}

/// Structure-preserving lowering.
pub fn to_dag(e: &Expr) -> GeneralizedFunction {
    use GeneralizedFunction as G;
    match e {
        Expr::Sum(a, b) => G::sum(to_dag(a), to_dag(b)),
        Expr::Product(a, b) => G::product(to_dag(a), to_dag(b)),
        Expr::Scalar(c, a) => G::scalar(*c, to_dag(a)),
        Expr::Derivative(n, a) => G::derivative(*n as usize, to_dag(a)),
        Expr::Number(c) => G::tilde(SmoothPrimitive::Polynomial(vec![*c])),
        Expr::Delta => G::delta(),
        Expr::Heaviside => G::heaviside(),
        Expr::NullEx => G::null_example(),
        Expr::Bar(f) => G::bar(f.primitive.clone()),
        Expr::Tilde(f) => G::tilde(f.primitive.clone()),
    }
}

/// Parses and lowers in one step.
pub fn parse_dag(text: &str, registry: &FunctionRegistry) -> Result<GeneralizedFunction, ParseError> {
    parse(text, registry).map(|e| to_dag(&e))
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Sum,
    Term,
    Factor,
}

fn write_expr(e: &Expr, level: Level, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = match e {
        Expr::Sum(..) => Level::Sum,
        Expr::Product(..) => Level::Term,
        _ => Level::Factor,
    };
    if own < level {
        write!(f, "(")?;
        write_expr(e, Level::Sum, f)?;
        return write!(f, ")");
    }
    match e {
        Expr::Sum(a, b) => {
            write_expr(a, Level::Sum, f)?;
            match &**b {
                Expr::Scalar(c, inner) if *c == -1.0 => {
                    write!(f, " - ")?;
                    write_expr(inner, Level::Term, f)
                }
                _ => {
                    write!(f, " + ")?;
                    write_expr(b, Level::Term, f)
                }
            }
        }
        Expr::Product(a, b) => {
            write_operand(a, Level::Term, f)?;
            write!(f, "*")?;
            write_operand(b, Level::Factor, f)
        }
        Expr::Scalar(c, a) => {
            write!(f, "{c}*")?;
            write_operand(a, Level::Factor, f)
        }
        Expr::Derivative(n, a) => {
            if *n == 1 {
                write!(f, "D(")?;
            } else {
                write!(f, "D^{n}(")?;
            }
            write_expr(a, Level::Sum, f)?;
            write!(f, ")")
        }
        Expr::Number(c) => write!(f, "{c}"),
        Expr::Delta => write!(f, "delta"),
        Expr::Heaviside => write!(f, "heaviside"),
        Expr::NullEx => write!(f, "nullex"),
        Expr::Bar(r) => write!(f, "bar({r})"),
        Expr::Tilde(r) => write!(f, "tilde({r})"),
    }
}

/// A bare number next to '*' would be read as a scalar prefix; bracket it.
fn write_operand(e: &Expr, level: Level, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Number(c) => write!(f, "({c})"),
        _ => write_expr(e, level, f),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, Level::Sum, f)
    }
}
