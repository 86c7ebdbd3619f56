//! Recursive-descent parser and evaluator for coefficient expressions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

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
    Exp,
    Sqrt,
    Abs,
    Sin,
    Cos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("non-finite result")]
    NonFinite,
}

/// Coefficient expression over `t`, `x`, literals and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        Parser::new(text).parse()
    }

    /// Evaluate with parameters looked up by name.
    pub fn eval(&self, t: f64, x: f64, params: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        self.eval_with(t, x, &|name| params.get(name).copied())
    }

    fn eval_with(
        &self,
        t: f64,
        x: f64,
        params: &dyn Fn(&str) -> Option<f64>,
    ) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => return Ok(*v),
            Expr::Var(Var::T) => return Ok(t),
            Expr::Var(Var::X) => return Ok(x),
            Expr::Param(name) => {
                return params(name).ok_or_else(|| EvalError::UnboundParameter(name.clone()))
            }
            Expr::Neg(e) => -e.eval_with(t, x, params)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval_with(t, x, params)?;
                let b = r.eval_with(t, x, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let a = e.eval_with(t, x, params)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::SqrtOfNegative(a));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Parameter names referenced anywhere in the tree.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Param(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_params(out),
            Expr::Binary(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
            Expr::Num(_) | Expr::Var(_) => {}
        }
    }

    fn mentions_var(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.mentions_var(),
            Expr::Binary(_, l, r) => l.mentions_var() || r.mentions_var(),
        }
    }

    /// Substitute parameters and fold variable-free subtrees.
    ///
    /// Folding performs the same floating-point operations evaluation would, so
    /// a bound expression evaluates bit-identically to the original. Subtrees
    /// whose evaluation fails are left unfolded and fail at evaluation time.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<BoundExpr, EvalError> {
        Ok(BoundExpr(self.substitute(params)?))
    }

    fn substitute(&self, params: &BTreeMap<String, f64>) -> Result<Expr, EvalError> {
        let e = match self {
            Expr::Num(_) | Expr::Var(_) => return Ok(self.clone()),
            Expr::Param(name) => {
                return params
                    .get(name)
                    .map(|v| Expr::Num(*v))
                    .ok_or_else(|| EvalError::UnboundParameter(name.clone()))
            }
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(params)?)),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(params)?)),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.substitute(params)?),
                Box::new(r.substitute(params)?),
            ),
        };
        if !e.mentions_var() {
            if let Ok(v) = e.eval_with(0.0, 0.0, &|_| None) {
                return Ok(Expr::Num(v));
            }
        }
        Ok(e)
    }
}

/// Expression with all parameters substituted; evaluation needs only `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr(Expr);

impl BoundExpr {
    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        match &self.0 {
            Expr::Num(v) => Ok(*v),
            e => e.eval_with(t, x, &|_| None),
        }
    }

    /// The value, when the expression does not depend on `t` or `x`.
    pub fn constant(&self) -> Option<f64> {
        match self.0 {
            Expr::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }
}

/// Fully parenthesised rendering; re-parsing yields an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Param(name) => f.write_str(name),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if self.src.trim().is_empty() {
            return Err(self.error_at(0, "empty expression"));
        }
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.error_at(self.pos, "unexpected trailing input"));
        }
        Ok(e)
    }

    fn error_at(&self, offset: usize, message: &str) -> Error {
        Error::Syntax {
            offset,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            None => return Err(self.error_at(self.pos, "expected expression, found end of input")),
            Some(_) => self.pos,
        };
        let c = self.bytes[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error_at(self.pos, "expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let ident = self.ident();
            if self.peek() == Some(b'(') {
                let func = Func::from_name(ident).ok_or_else(|| Error::UnknownFunction {
                    name: ident.to_string(),
                    offset: start,
                })?;
                self.pos += 1;
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error_at(self.pos, "expected `)`"));
                }
                return Ok(Expr::Call(func, Box::new(arg)));
            }
            return Ok(match ident {
                "t" => Expr::Var(Var::T),
                "x" => Expr::Var(Var::X),
                name if Func::from_name(name).is_some() => {
                    return Err(self.error_at(start, &format!("function `{name}` needs an argument")))
                }
                name => Expr::Param(name.to_string()),
            });
        }
        Err(self.error_at(start, &format!("unexpected character `{}`", c as char)))
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(self.error_at(start, "malformed number"));
        }
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error_at(save, "malformed exponent"));
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| self.error_at(start, "malformed number"))?;
        if !v.is_finite() {
            return Err(self.error_at(start, "number literal out of range"));
        }
        Ok(Expr::Num(v))
    }
}
