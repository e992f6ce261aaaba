//! Limit-state expressions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | variable | ident
//!          | func '(' expr ')'
//!          | 'sum' '(' ident '=' int '..' int ',' expr ')'
//!          | '(' expr ')'
//! ```
//!
//! Variables are written `x7` or `x_7` (1-based). Inside `sum(i = a..b, ...)`
//! the form `x_i` selects the variable at the running index and a bare `i`
//! evaluates to the index itself.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Cos,
    Sin,
    Exp,
    Sqrt,
    Abs,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "cos" => Function::Cos,
            "sin" => Function::Sin,
            "exp" => Function::Exp,
            "sqrt" => Function::Sqrt,
            "abs" => Function::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Function::Cos => v.cos(),
            Function::Sin => v.sin(),
            Function::Exp => v.exp(),
            Function::Sqrt => v.sqrt(),
            Function::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based input variable.
    Var(usize),
    /// `x_i` where `i` is the summation index bound at `slot`.
    IndexedVar(usize),
    /// The summation index bound at `slot`, as a number.
    Index(usize),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Function, Box<Node>),
    Sum {
        lo: i64,
        hi: i64,
        body: Box<Node>,
    },
}

/// Parsed limit-state function `G(x)` over `dimension` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitStateExpr {
    source: String,
    dimension: usize,
    root: Node,
}

impl LimitStateExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        eval_limit_state(self, x)
    }
}

pub fn parse_limit_state(text: &str, dimension: usize) -> Result<LimitStateExpr> {
    if text.trim().is_empty() {
        return Err(Error::SyntaxError {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        dimension,
        bindings: Vec::new(),
        end: text.len(),
    };
    let root = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(Error::SyntaxError {
            position: t.pos,
            message: format!("unexpected {:?}", t.kind),
        });
    }
    Ok(LimitStateExpr {
        source: text.to_string(),
        dimension,
        root,
    })
}

pub fn eval_limit_state(expr: &LimitStateExpr, x: &[f64]) -> Result<f64> {
    if x.len() != expr.dimension {
        return Err(Error::DimensionMismatch {
            expected: expr.dimension,
            actual: x.len(),
        });
    }
    let mut env = Vec::new();
    let v = eval_node(&expr.root, x, &mut env)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteResult)
    }
}

fn eval_node(node: &Node, x: &[f64], env: &mut Vec<i64>) -> Result<f64> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::IndexedVar(slot) => x[(env[*slot] - 1) as usize],
        Node::Index(slot) => env[*slot] as f64,
        Node::Neg(a) => -eval_node(a, x, env)?,
        Node::Binary(op, a, b) => {
            let l = eval_node(a, x, env)?;
            let r = eval_node(b, x, env)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => {
                    if r == 0.0 {
                        return Err(Error::DivisionByZero);
                    }
                    l / r
                }
                BinaryOp::Pow => pow(l, r),
            }
        }
        Node::Call(f, a) => f.apply(eval_node(a, x, env)?),
        Node::Sum { lo, hi, body } => {
            let mut acc = 0.0;
            env.push(*lo);
            let slot = env.len() - 1;
            for i in *lo..=*hi {
                env[slot] = i;
                acc += eval_node(body, x, env)?;
            }
            env.pop();
            acc
        }
    })
}

#[inline]
fn pow(base: f64, exponent: f64) -> f64 {
    // integer exponents take the exact repeated-multiplication path
    if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Assign,
    DotDot,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'^' => TokenKind::Caret,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'=' => TokenKind::Assign,
            b'.' if bytes.get(i + 1) == Some(&b'.') => {
                i += 2;
                out.push(Token {
                    kind: TokenKind::DotDot,
                    pos: start,
                });
                continue;
            }
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::SyntaxError {
                    position: start,
                    message: format!("invalid number '{s}'"),
                })?;
                out.push(Token {
                    kind: TokenKind::Number(v),
                    pos: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            _ => {
                return Err(Error::SyntaxError {
                    position: start,
                    message: format!(
                        "unexpected character '{}'",
                        text[start..].chars().next().unwrap()
                    ),
                })
            }
        };
        i += 1;
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

/// Returns the end of the numeric literal starting at `i`. A `..` range
/// operator terminates the literal, so `1..3` lexes as `1`, `..`, `3`.
fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    let digits = |bytes: &[u8], mut i: usize| {
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        i
    };
    i = digits(bytes, i);
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1) != Some(&b'.') {
        i = digits(bytes, i + 1);
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = digits(bytes, j);
        }
    }
    i
}

// ---------------------------------------------------------------------------
// Parser

struct Binding {
    name: String,
    lo: i64,
    hi: i64,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    bindings: Vec<Binding>,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::SyntaxError {
            position: self.here(),
            message: message.into(),
        })
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        if self.eat(&kind) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.unary()?;
            return Ok(Node::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let Some(tok) = self.next() else {
            return self.error("unexpected end of expression");
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(e)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.pos),
            other => Err(Error::SyntaxError {
                position: tok.pos,
                message: format!("unexpected {other:?}"),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Node> {
        let is_call = self.peek().map(|t| &t.kind) == Some(&TokenKind::LParen);
        if is_call {
            if name == "sum" {
                return self.summation();
            }
            let Some(f) = Function::from_name(&name) else {
                return Err(Error::UnknownFunction(name));
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(TokenKind::RParen, "')'")?;
            return Ok(Node::Call(f, Box::new(arg)));
        }
        if let Some(slot) = self.binding_slot(&name) {
            return Ok(Node::Index(slot));
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(rest) = name.strip_prefix('x') {
            let rest = rest.strip_prefix('_').unwrap_or(rest);
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let index: i64 = rest.parse().map_err(|_| Error::SyntaxError {
                    position: pos,
                    message: format!("bad variable index in '{name}'"),
                })?;
                self.check_index(index)?;
                return Ok(Node::Var(index as usize - 1));
            }
            if let Some(slot) = self.binding_slot(rest) {
                let b = &self.bindings[slot];
                // an empty range never evaluates its body
                if b.lo <= b.hi {
                    self.check_index(b.lo)?;
                    self.check_index(b.hi)?;
                }
                return Ok(Node::IndexedVar(slot));
            }
        }
        if Function::from_name(&name).is_some() || name == "sum" {
            return Err(Error::SyntaxError {
                position: pos,
                message: format!("'{name}' must be called with parentheses"),
            });
        }
        Err(Error::SyntaxError {
            position: pos,
            message: format!("unknown identifier '{name}'"),
        })
    }

    fn check_index(&self, index: i64) -> Result<()> {
        if index < 1 || index as usize > self.dimension {
            return Err(Error::IndexOutOfRange {
                index,
                dimension: self.dimension,
            });
        }
        Ok(())
    }

    fn binding_slot(&self, name: &str) -> Option<usize> {
        self.bindings.iter().rposition(|b| b.name == name)
    }

    fn summation(&mut self) -> Result<Node> {
        self.expect(TokenKind::LParen, "'('")?;
        let name = match self.next() {
            Some(Token {
                kind: TokenKind::Ident(n),
                ..
            }) => n,
            _ => {
                self.pos -= 1;
                return self.error("expected summation index name");
            }
        };
        self.expect(TokenKind::Assign, "'='")?;
        let lo = self.integer()?;
        self.expect(TokenKind::DotDot, "'..'")?;
        let hi = self.integer()?;
        self.expect(TokenKind::Comma, "','")?;
        self.bindings.push(Binding { name, lo, hi });
        let body = self.expr();
        self.bindings.pop();
        let body = body?;
        self.expect(TokenKind::RParen, "')'")?;
        Ok(Node::Sum {
            lo,
            hi,
            body: Box::new(body),
        })
    }

    fn integer(&mut self) -> Result<i64> {
        let negative = self.eat(&TokenKind::Minus);
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Number(v)) if v.fract() == 0.0 && v.abs() < 1e15 => {
                self.pos += 1;
                Ok(if negative { -(v as i64) } else { v as i64 })
            }
            _ => self.error("expected integer bound"),
        }
    }
}
