//! Arithmetic expression mini-language for device characteristics.
//!
//! A characteristic is a smooth scalar function of the single variable `x`,
//! written with the operators `+ - * / ^` (integer exponent), unary minus,
//! and the functions `sin cos exp tanh ln sqrt`. Evaluation propagates a
//! dual number so every call yields the value and the first derivative in
//! one pass.

use std::fmt;

use crate::error::{Error, Result};

/// Value together with its derivative seed. Arithmetic follows the chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub val: f64,
    pub der: f64,
}

impl Dual {
    pub fn constant(c: f64) -> Self {
        Dual { val: c, der: 0.0 }
    }

    pub fn variable(x: f64) -> Self {
        Dual { val: x, der: 1.0 }
    }

    fn add(self, o: Dual) -> Dual {
        Dual { val: self.val + o.val, der: self.der + o.der }
    }

    fn sub(self, o: Dual) -> Dual {
        Dual { val: self.val - o.val, der: self.der - o.der }
    }

    fn mul(self, o: Dual) -> Dual {
        Dual { val: self.val * o.val, der: self.der * o.val + self.val * o.der }
    }

    fn div(self, o: Dual) -> Dual {
        Dual {
            val: self.val / o.val,
            der: (self.der * o.val - self.val * o.der) / (o.val * o.val),
        }
    }

    fn neg(self) -> Dual {
        Dual { val: -self.val, der: -self.der }
    }

    fn powi(self, n: i32) -> Dual {
        let der = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.val.powi(n - 1) * self.der
        };
        Dual { val: self.val.powi(n), der }
    }
}

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree over the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var,
    Neg(Box<ExprNode>),
    Add(Box<ExprNode>, Box<ExprNode>),
    Sub(Box<ExprNode>, Box<ExprNode>),
    Mul(Box<ExprNode>, Box<ExprNode>),
    Div(Box<ExprNode>, Box<ExprNode>),
    Pow(Box<ExprNode>, i32),
    Call(Func, Box<ExprNode>),
}

impl ExprNode {
    /// Evaluate value and derivative at `x` by dual-number propagation.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let d = self.eval_dual(Dual::variable(x))?;
        if !d.val.is_finite() || !d.der.is_finite() {
            return Err(self.domain_err("non-finite result"));
        }
        Ok((d.val, d.der))
    }

    pub fn eval_dual(&self, x: Dual) -> Result<Dual> {
        Ok(match self {
            ExprNode::Const(c) => Dual::constant(*c),
            ExprNode::Var => x,
            ExprNode::Neg(a) => a.eval_dual(x)?.neg(),
            ExprNode::Add(a, b) => a.eval_dual(x)?.add(b.eval_dual(x)?),
            ExprNode::Sub(a, b) => a.eval_dual(x)?.sub(b.eval_dual(x)?),
            ExprNode::Mul(a, b) => a.eval_dual(x)?.mul(b.eval_dual(x)?),
            ExprNode::Div(a, b) => {
                let den = b.eval_dual(x)?;
                if den.val == 0.0 {
                    return Err(self.domain_err("division by zero"));
                }
                a.eval_dual(x)?.div(den)
            }
            ExprNode::Pow(a, n) => {
                let base = a.eval_dual(x)?;
                if *n < 0 && base.val == 0.0 {
                    return Err(self.domain_err("zero raised to a negative exponent"));
                }
                base.powi(*n)
            }
            ExprNode::Call(f, a) => {
                let u = a.eval_dual(x)?;
                match f {
                    Func::Sin => Dual { val: u.val.sin(), der: u.val.cos() * u.der },
                    Func::Cos => Dual { val: u.val.cos(), der: -u.val.sin() * u.der },
                    Func::Exp => {
                        let e = u.val.exp();
                        Dual { val: e, der: e * u.der }
                    }
                    Func::Tanh => {
                        let t = u.val.tanh();
                        Dual { val: t, der: (1.0 - t * t) * u.der }
                    }
                    Func::Ln => {
                        if u.val <= 0.0 {
                            return Err(self.domain_err("ln of a non-positive value"));
                        }
                        Dual { val: u.val.ln(), der: u.der / u.val }
                    }
                    Func::Sqrt => {
                        if u.val < 0.0 {
                            return Err(self.domain_err("sqrt of a negative value"));
                        }
                        let s = u.val.sqrt();
                        Dual { val: s, der: 0.5 * u.der / s }
                    }
                }
            }
        })
    }

    fn domain_err(&self, msg: &str) -> Error {
        Error::Domain { expr: self.to_string(), msg: msg.to_string() }
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprNode::Add(..) | ExprNode::Sub(..) => 1,
            ExprNode::Mul(..) | ExprNode::Div(..) => 2,
            ExprNode::Neg(..) => 3,
            ExprNode::Pow(..) => 4,
            ExprNode::Const(_) | ExprNode::Var | ExprNode::Call(..) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            write!(f, "(")?;
        }
        match self {
            ExprNode::Const(c) => write!(f, "{c}")?,
            ExprNode::Var => write!(f, "x")?,
            ExprNode::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)?;
            }
            ExprNode::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            ExprNode::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            ExprNode::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            ExprNode::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            ExprNode::Pow(a, n) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^{n}")?;
            }
            ExprNode::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 1)?;
                write!(f, ")")?;
            }
        }
        if p < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Parse an expression. Column numbers in errors are 1-based offsets into `src`.
pub fn parse_expr(src: &str) -> Result<ExprNode> {
    let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
    p.skip_ws();
    let node = p.expr()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { line: 0, col: self.pos + 1, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
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

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<ExprNode> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = ExprNode::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = ExprNode::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<ExprNode> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = ExprNode::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = ExprNode::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // factor := '-' factor | power
    fn factor(&mut self) -> Result<ExprNode> {
        self.skip_ws();
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(ExprNode::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom ('^' integer)?
    fn power(&mut self) -> Result<ExprNode> {
        let base = self.atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            let n = self.integer_exponent()?;
            return Ok(ExprNode::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    // The exponent must be an integer literal, optionally signed or parenthesized.
    fn integer_exponent(&mut self) -> Result<i32> {
        self.skip_ws();
        if self.eat(b'(') {
            let n = self.integer_exponent()?;
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.err("expected `)` after exponent"));
            }
            return Ok(n);
        }
        let neg = self.eat(b'-');
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("exponent must be an integer literal"));
        }
        if self.peek() == Some(b'.') {
            return Err(self.err("exponent must be an integer literal"));
        }
        let digits = &self.src[start..self.pos];
        let n: i32 = digits
            .parse()
            .map_err(|_| self.err("exponent out of range"))?;
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<ExprNode> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                if ident == "x" {
                    return Ok(ExprNode::Var);
                }
                let func = match ident {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "tanh" => Func::Tanh,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    _ => {
                        self.pos = start;
                        return Err(self.err(&format!("unknown identifier `{ident}`")));
                    }
                };
                self.skip_ws();
                if !self.eat(b'(') {
                    return Err(self.err(&format!("expected `(` after `{ident}`")));
                }
                let arg = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(ExprNode::Call(func, Box::new(arg)))
            }
            _ => Err(self.err("expected a number, `x`, a function call, or `(`")),
        }
    }

    fn number(&mut self) -> Result<ExprNode> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.peek() == Some(b'e') || self.peek() == Some(b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'+') || self.peek() == Some(b'-') {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // not an exponent suffix after all (e.g. `2*exp(x)`)
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(&format!("invalid number `{text}`")))?;
        Ok(ExprNode::Const(v))
    }
}
