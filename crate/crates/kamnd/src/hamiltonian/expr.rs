//! Expression language for Hamiltonians in action coordinates.
//!
//! Grammar (highest precedence last):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' INTEGER)*
//! primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
//! VAR     := 'x' DIGITS | 'x' '[' DIGITS ']'
//! FUNC    := sqrt | sin | cos | exp | log
//! ```
//!
//! `-x1^2` parses as `-(x1^2)`. Exponents must be non-negative integer
//! literals so that jets stay exact.

use std::fmt;

use thiserror::Error;

/// Elementary functions available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree. Variables are stored zero-based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    InvalidNumber(String),
    UnknownIdentifier(String),
    VariableOutOfRange { index: usize, dim: usize },
    InvalidExponent(String),
    ZeroDimension,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token `{t}`"),
            ParseErrorKind::InvalidNumber(t) => write!(f, "invalid number literal `{t}`"),
            ParseErrorKind::UnknownIdentifier(t) => write!(f, "unknown identifier `{t}`"),
            ParseErrorKind::VariableOutOfRange { index, dim } => {
                write!(f, "variable x{index} out of range for dimension {dim}")
            }
            ParseErrorKind::InvalidExponent(t) => {
                write!(f, "exponent must be a non-negative integer literal, found `{t}`")
            }
            ParseErrorKind::ZeroDimension => write!(f, "dimension must be at least 1"),
        }
    }
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {pos}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Int(u64),
    Var(usize),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(_, s) => s.clone(),
            Tok::Int(n) => n.to_string(),
            Tok::Var(i) => format!("x{i}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
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
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'0'..=b'9' | b'.' => {
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
                let lit = &text[start..i];
                let tok = if lit.bytes().all(|b| b.is_ascii_digit()) {
                    match lit.parse::<u64>() {
                        Ok(n) => Tok::Int(n),
                        Err(_) => Tok::Num(parse_float(lit, start)?, lit.to_string()),
                    }
                } else {
                    Tok::Num(parse_float(lit, start)?, lit.to_string())
                };
                out.push((tok, start));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                if word == "x" && i < bytes.len() && bytes[i] == b'[' {
                    let open = i;
                    i += 1;
                    let ds = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if ds == i || i >= bytes.len() || bytes[i] != b']' {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnknownIdentifier(
                                text[start..i.min(bytes.len())].to_string(),
                            ),
                            pos: open,
                        });
                    }
                    let idx = parse_index(&text[ds..i], start)?;
                    i += 1;
                    out.push((Tok::Var(idx), start));
                } else if let Some(digits) = word.strip_prefix('x').filter(|d| {
                    !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())
                }) {
                    out.push((Tok::Var(parse_index(digits, start)?), start));
                } else {
                    out.push((Tok::Ident(word.to_string()), start));
                }
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    pos: i,
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

fn parse_float(lit: &str, pos: usize) -> Result<f64, ParseError> {
    match lit.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError {
            kind: ParseErrorKind::InvalidNumber(lit.to_string()),
            pos,
        }),
    }
}

fn parse_index(digits: &str, pos: usize) -> Result<usize, ParseError> {
    digits.parse::<usize>().map_err(|_| ParseError {
        kind: ParseErrorKind::InvalidNumber(digits.to_string()),
        pos,
    })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    dim: usize,
    depth: usize,
}

// Deeply nested input would otherwise overflow the stack.
const MAX_DEPTH: usize = 256;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            pos: self.pos(),
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(t.text())),
            None => self.err(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err(ParseErrorKind::UnexpectedToken("nesting too deep".into())));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                self.enter()?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(Expr::Neg(Box::new(inner)))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.enter()?;
                let inner = self.unary();
                self.depth -= 1;
                inner
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while let Some(Tok::Caret) = self.peek() {
            self.bump();
            match self.bump() {
                Some(Tok::Int(n)) if n <= u32::MAX as u64 => {
                    base = Expr::Pow(Box::new(base), n as u32);
                }
                Some(t) => {
                    self.at -= 1;
                    return Err(self.err(ParseErrorKind::InvalidExponent(t.text())));
                }
                None => return Err(self.err(ParseErrorKind::UnexpectedEnd)),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v, _)) => Ok(Expr::Const(v)),
            Some(Tok::Int(n)) => Ok(Expr::Const(n as f64)),
            Some(Tok::Var(i)) => {
                if i == 0 || i > self.dim {
                    Err(ParseError {
                        kind: ParseErrorKind::VariableOutOfRange {
                            index: i,
                            dim: self.dim,
                        },
                        pos,
                    })
                } else {
                    Ok(Expr::Var(i - 1))
                }
            }
            Some(Tok::Ident(name)) => {
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        pos,
                    });
                };
                if self.bump() != Some(Tok::LParen) {
                    self.at -= 1;
                    return Err(self.unexpected());
                }
                let arg = self.expr()?;
                if self.bump() != Some(Tok::RParen) {
                    self.at -= 1;
                    return Err(self.unexpected());
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                if self.bump() != Some(Tok::RParen) {
                    self.at -= 1;
                    return Err(self.unexpected());
                }
                Ok(inner)
            }
            Some(_) => {
                self.at -= 1;
                Err(self.unexpected())
            }
            None => Err(ParseError {
                kind: ParseErrorKind::UnexpectedEnd,
                pos,
            }),
        }
    }
}

/// Parse `text` as an expression over `x1..x{dim}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr, ParseError> {
    if dim == 0 {
        return Err(ParseError {
            kind: ParseErrorKind::ZeroDimension,
            pos: 0,
        });
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        dim,
        depth: 0,
    };
    let e = p.expr()?;
    if p.at < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

impl Expr {
    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Replace every variable `Var(i)` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subs[*i].clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(subs))),
            Expr::Pow(e, n) => Expr::Pow(Box::new(e.substitute(subs)), *n),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(subs))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Prints in the input grammar; `parse_expr(&e.to_string(), d)` rebuilds an
/// equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "-{:?}", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(i) => {
                if *i < 9 {
                    write!(f, "x{}", i + 1)
                } else {
                    write!(f, "x[{}]", i + 1)
                }
            }
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_child(f, 3)
            }
            Expr::Pow(e, n) => {
                e.fmt_child(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                a.fmt_child(f, prec)?;
                write!(f, " {sym} ")?;
                // left-associative: the right operand needs strictly higher precedence
                b.fmt_child(f, prec + 1)
            }
        }
    }
}
