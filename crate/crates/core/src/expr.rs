//! A small arithmetic language for coefficient fields.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! Numbers are non-negative decimals with an optional exponent; a trailing
//! `i` makes them imaginary (`2i`, `0.5i`). Identifiers are `z`, `zbar`,
//! `i`, `pi`, and the per-point variables `r_j`, `theta_j` (1-based `j`).
//! `theta_j` is the principal argument of `z - z_j`.

use std::fmt;

use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprError {
    Parse { line: usize, column: usize, message: String },
    Eval(String),
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::Parse { line, column, message } => write!(f, "expression syntax error at line {line}, column {column}: {message}"),
            ExprError::Eval(m) => write!(f, "expression evaluation error: {m}"),
        }
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z,
    Zbar,
    I,
    Pi,
    R(usize),
    Theta(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Conj,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Conj => "conj",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "conj" => Func::Conj,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Non-negative real or imaginary literal.
    Real(f64),
    Imag(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    /// Fully parenthesized, so the output reparses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Real(x) => write!(f, "{x:?}"),
            Expr::Imag(x) => write!(f, "{x:?}i"),
            Expr::Var(Var::Z) => f.write_str("z"),
            Expr::Var(Var::Zbar) => f.write_str("zbar"),
            Expr::Var(Var::I) => f.write_str("i"),
            Expr::Var(Var::Pi) => f.write_str("pi"),
            Expr::Var(Var::R(j)) => write!(f, "r_{j}"),
            Expr::Var(Var::Theta(j)) => write!(f, "theta_{j}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Expr {
    /// Largest 1-based point index referenced by `r_j` / `theta_j` (0 if none).
    pub fn max_point_index(&self) -> usize {
        match self {
            Expr::Var(Var::R(j)) | Expr::Var(Var::Theta(j)) => *j,
            Expr::Real(_) | Expr::Imag(_) | Expr::Var(_) => 0,
            Expr::Neg(a) | Expr::Call(_, a) => a.max_point_index(),
            Expr::Bin(_, a, b) => a.max_point_index().max(b.max_point_index()),
        }
    }

    /// Evaluates at `z` with singular points `points` (`r_1` refers to `points[0]`).
    pub fn eval(&self, z: C64, points: &[C64]) -> Result<C64, ExprError> {
        let v = self.eval_inner(z, points)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(ExprError::Eval(format!("non-finite value at z = {z}")));
        }
        Ok(v)
    }

    fn eval_inner(&self, z: C64, points: &[C64]) -> Result<C64, ExprError> {
        let point = |j: usize| {
            points.get(j.wrapping_sub(1)).copied().ok_or_else(|| ExprError::Eval(format!("point index {j} out of range (have {} points)", points.len())))
        };
        Ok(match self {
            Expr::Real(x) => C64::new(*x, 0.0),
            Expr::Imag(x) => C64::new(0.0, *x),
            Expr::Var(Var::Z) => z,
            Expr::Var(Var::Zbar) => z.conj(),
            Expr::Var(Var::I) => C64::i(),
            Expr::Var(Var::Pi) => C64::new(std::f64::consts::PI, 0.0),
            Expr::Var(Var::R(j)) => C64::new((z - point(*j)?).norm(), 0.0),
            Expr::Var(Var::Theta(j)) => C64::new((z - point(*j)?).arg(), 0.0),
            Expr::Neg(a) => {
                // keep +0.0 imaginary parts so log(-1) lands on the principal branch
                let x = a.eval_inner(z, points)?;
                C64::new(0.0 - x.re, 0.0 - x.im)
            }
            Expr::Call(func, a) => {
                let x = a.eval_inner(z, points)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x == C64::new(0.0, 0.0) {
                            return Err(ExprError::Eval(format!("log(0) at z = {z}")));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Conj => x.conj(),
                    Func::Abs => C64::new(x.norm(), 0.0),
                }
            }
            Expr::Bin(op, a, b) => {
                let x = a.eval_inner(z, points)?;
                let y = b.eval_inner(z, points)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == C64::new(0.0, 0.0) {
                            return Err(ExprError::Eval(format!("division by zero at z = {z}")));
                        }
                        x / y
                    }
                    BinOp::Pow => complex_pow(x, y).ok_or_else(|| ExprError::Eval(format!("0 raised to a non-positive power at z = {z}")))?,
                }
            }
        })
    }
}

fn complex_pow(x: C64, y: C64) -> Option<C64> {
    if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= 64.0 {
        let k = y.re as i32;
        if x == C64::new(0.0, 0.0) && k <= 0 {
            return None;
        }
        return Some(x.powi(k));
    }
    if x == C64::new(0.0, 0.0) {
        return if y.re > 0.0 { Some(C64::new(0.0, 0.0)) } else { None };
    }
    Some((y * x.ln()).exp())
}

pub fn parse_expression(source: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { chars: source.chars().collect(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn location(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut column = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        (line, column)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> ExprError {
        let (line, column) = self.location(pos);
        ExprError::Parse { line, column, message: message.into() }
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        self.error_at(self.pos, message)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.pos < p.chars.len() && p.chars[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(self.error_at(start, "malformed number"));
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = text.parse().map_err(|_| self.error_at(start, format!("malformed number '{text}'")))?;
        if !value.is_finite() {
            return Err(self.error_at(start, format!("number '{text}' out of range")));
        }
        let is_ident_char = |c: Option<&char>| c.is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_');
        if self.chars.get(self.pos) == Some(&'i') && !is_ident_char(self.chars.get(self.pos + 1)) {
            self.pos += 1;
            return Ok(Expr::Imag(value));
        }
        if is_ident_char(self.chars.get(self.pos)) {
            return Err(self.error("unexpected character after number"));
        }
        Ok(Expr::Real(value))
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.chars.len() && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        if let Some(func) = Func::from_name(&name) {
            if !self.eat('(') {
                return Err(self.error(format!("expected '(' after {name}")));
            }
            let arg = self.sum()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let var = match name.as_str() {
            "z" => Var::Z,
            "zbar" => Var::Zbar,
            "i" => Var::I,
            "pi" => Var::Pi,
            _ => {
                let indexed = |prefix: &str| -> Option<usize> {
                    let rest = name.strip_prefix(prefix)?;
                    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                        return None;
                    }
                    rest.parse().ok().filter(|&j| j >= 1)
                };
                if let Some(j) = indexed("r_") {
                    Var::R(j)
                } else if let Some(j) = indexed("theta_") {
                    Var::Theta(j)
                } else {
                    return Err(self.error_at(start, format!("unknown identifier '{name}'")));
                }
            }
        };
        Ok(Expr::Var(var))
    }
}
