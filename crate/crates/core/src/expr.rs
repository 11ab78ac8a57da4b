//! Tiny arithmetic expressions over `x`, `y`, `t` for boundary and initial data.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'y' | 't' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp' | 'log'
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                position: start,
                message: format!("bad number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Tok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Tok::RParen));
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> std::result::Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> std::result::Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "pi" => {
                self.pos += 1;
                Ok(Expr::Num(std::f64::consts::PI))
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" => Some(Err(Var::X)),
                    "y" => Some(Err(Var::Y)),
                    "t" => Some(Err(Var::T)),
                    "sin" => Some(Ok(Func::Sin)),
                    "cos" => Some(Ok(Func::Cos)),
                    "exp" => Some(Ok(Func::Exp)),
                    "log" => Some(Ok(Func::Log)),
                    _ => None,
                };
                match func {
                    None => self.err(format!("unknown identifier '{name}'")),
                    Some(Err(var)) => {
                        self.pos += 1;
                        Ok(Expr::Var(var))
                    }
                    Some(Ok(f)) => {
                        self.pos += 1;
                        if self.peek() != Some(&Tok::LParen) {
                            return self.err(format!("expected '(' after '{name}'"));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                }
            }
            Tok::Op(c) => self.err(format!("unexpected operator '{c}'")),
            Tok::RParen => self.err("unexpected ')'"),
        }
    }

    fn expect_rparen(&mut self) -> std::result::Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> std::result::Result<Expr, ParseError> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: src.len(),
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, y, t),
            Expr::Call(f, e) => {
                let a = e.eval(x, y, t);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                }
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y, t), b.eval(x, y, t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
        }
    }
}

/// Fully parenthesized canonical form; parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Log => "log",
                };
                write!(f, "{name}({e})")
            }
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

type NativeFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A scalar function of `(x, y, t)`: either a parsed expression or native code.
#[derive(Clone)]
pub enum ScalarFn {
    Expr(Expr),
    Native(Arc<NativeFn>),
}

impl ScalarFn {
    pub fn parse(src: &str) -> Result<Self> {
        Expr::parse(src)
            .map(ScalarFn::Expr)
            .map_err(|e| Error::invalid(format!("expression '{src}': {e}")))
    }

    pub fn native(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Native(Arc::new(f))
    }

    pub fn constant(v: f64) -> Self {
        ScalarFn::Expr(Expr::Num(v))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            ScalarFn::Expr(e) => e.eval(x, y, t),
            ScalarFn::Native(f) => f(x, y, t),
        }
    }

    /// Canonical expression text, `None` for native functions.
    pub fn source(&self) -> Option<String> {
        match self {
            ScalarFn::Expr(e) => Some(e.to_string()),
            ScalarFn::Native(_) => None,
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Expr(e) => write!(f, "Expr({e})"),
            ScalarFn::Native(_) => f.write_str("Native(..)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y, t)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1+2*3", 0., 0., 0.), 7.0);
        assert_eq!(ev("2^3^2", 0., 0., 0.), 512.0);
        assert_eq!(ev("-2^2", 0., 0., 0.), -4.0);
        assert_eq!(ev("(1+2)*3", 0., 0., 0.), 9.0);
        assert_eq!(ev("8/4/2", 0., 0., 0.), 1.0);
        assert_eq!(ev("x - y - t", 5., 1., 1.), 3.0);
        assert_eq!(ev("2^-1", 0., 0., 0.), 0.5);
    }

    #[test]
    fn functions_and_numbers() {
        assert!((ev("sin(x)*exp(t)", 1.0, 0.0, 2.0) - 1f64.sin() * 2f64.exp()).abs() < 1e-15);
        assert!((ev("log(exp(1.5e-1))", 0., 0., 0.) - 0.15).abs() < 1e-15);
        assert_eq!(ev("1E2 + .5", 0., 0., 0.), 100.5);
        assert_eq!(ev("2 * pi", 0., 0., 0.), 2.0 * std::f64::consts::PI);
        assert_eq!(ev("cos(0)", 0., 0., 0.), 1.0);
    }

    #[test]
    fn errors_have_positions() {
        let e = Expr::parse("1 + foo").unwrap_err();
        assert_eq!(e.position, 4);
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("(1+2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("3 % 2").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0..100.0f64).prop_map(Expr::Num),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
            Just(Expr::Var(Var::T)),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    inner.clone(),
                    prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Log)]
                )
                    .prop_map(|(e, f)| Expr::Call(f, Box::new(e))),
                (
                    inner.clone(),
                    inner,
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ]
                )
                    .prop_map(|(a, b, op)| Expr::Bin(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parses_back(e in arb_expr()) {
            let text = e.to_string();
            let back = Expr::parse(&text).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
