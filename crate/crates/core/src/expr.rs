//! Small real expression language for multipliers in run configs.
//!
//! Variables are `x` (alias of `x0`) and `x0, x1, …`; functions are `sin`,
//! `cos`, `exp`, `abs`, `sqrt`; operators `+ - * / ^` with integer
//! exponents; `pi` is a constant. A Lipschitz bound on a box is derived by
//! interval evaluation of the gradient.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::ifs::BoxRegion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("expression syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable x{index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("no finite Lipschitz bound on the box")]
    UnboundedDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Closed interval; `lo > hi` never occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn entire() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        // 0 · ∞ products are treated as 0
        let c = c.map(|v| if v.is_nan() { 0.0 } else { v });
        Self::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn recip(self) -> Self {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            Self::entire()
        } else {
            Self::new(1.0 / self.hi, 1.0 / self.lo)
        }
    }

    fn div(self, o: Self) -> Self {
        self.mul(o.recip())
    }

    fn powi(self, p: i32) -> Self {
        if p == 0 {
            return Self::point(1.0);
        }
        if p < 0 {
            return self.powi(-p).recip();
        }
        let a = self.lo.powi(p);
        let b = self.hi.powi(p);
        if p % 2 == 0 && self.lo <= 0.0 && self.hi >= 0.0 {
            Self::new(0.0, a.max(b))
        } else if p % 2 == 0 && self.hi < 0.0 {
            Self::new(b, a)
        } else {
            Self::new(a.min(b), a.max(b))
        }
    }

    fn cos(self) -> Self {
        if !(self.hi - self.lo).is_finite() || self.hi - self.lo >= 2.0 * PI {
            return Self::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        // maxima at 2kπ, minima at (2k+1)π
        if (self.lo / (2.0 * PI)).ceil() * 2.0 * PI <= self.hi {
            hi = 1.0;
        }
        if ((self.lo - PI) / (2.0 * PI)).ceil() * 2.0 * PI + PI <= self.hi {
            lo = -1.0;
        }
        Self::new(lo, hi)
    }

    fn sin(self) -> Self {
        self.sub(Self::point(PI / 2.0)).cos()
    }

    fn exp(self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp())
    }

    fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Self::new(0.0, self.magnitude())
        }
    }

    fn sqrt(self) -> Self {
        Self::new(self.lo.max(0.0).sqrt(), self.hi.max(0.0).sqrt())
    }
}

/// Interval value together with interval bounds on every partial derivative.
#[derive(Debug, Clone)]
struct Enclosure {
    value: Interval,
    grad: Vec<Interval>,
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, p) => a.eval(x).powi(*p),
            Expr::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    fn enclose(&self, dom: &BoxRegion) -> Enclosure {
        let d = dom.dim();
        let zero = || vec![Interval::point(0.0); d];
        match self {
            Expr::Const(c) => Enclosure {
                value: Interval::point(*c),
                grad: zero(),
            },
            Expr::Var(i) => {
                let mut grad = zero();
                grad[*i] = Interval::point(1.0);
                Enclosure {
                    value: Interval::new(dom.lo[*i], dom.hi[*i]),
                    grad,
                }
            }
            Expr::Neg(a) => {
                let e = a.enclose(dom);
                Enclosure {
                    value: e.value.neg(),
                    grad: e.grad.into_iter().map(Interval::neg).collect(),
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (ea, eb) = (a.enclose(dom), b.enclose(dom));
                let sub = matches!(self, Expr::Sub(..));
                let comb = |p: Interval, q: Interval| if sub { p.sub(q) } else { p.add(q) };
                Enclosure {
                    value: comb(ea.value, eb.value),
                    grad: ea.grad.iter().zip(&eb.grad).map(|(p, q)| comb(*p, *q)).collect(),
                }
            }
            Expr::Mul(a, b) => {
                let (ea, eb) = (a.enclose(dom), b.enclose(dom));
                Enclosure {
                    value: ea.value.mul(eb.value),
                    grad: ea
                        .grad
                        .iter()
                        .zip(&eb.grad)
                        .map(|(ga, gb)| ga.mul(eb.value).add(ea.value.mul(*gb)))
                        .collect(),
                }
            }
            Expr::Div(a, b) => {
                let (ea, eb) = (a.enclose(dom), b.enclose(dom));
                let inv = eb.value.recip();
                let inv2 = eb.value.powi(2).recip();
                Enclosure {
                    value: ea.value.div(eb.value),
                    grad: ea
                        .grad
                        .iter()
                        .zip(&eb.grad)
                        .map(|(ga, gb)| ga.mul(inv).sub(ea.value.mul(*gb).mul(inv2)))
                        .collect(),
                }
            }
            Expr::Pow(a, p) => {
                let e = a.enclose(dom);
                let outer = Interval::point(*p as f64).mul(e.value.powi(p - 1));
                Enclosure {
                    value: e.value.powi(*p),
                    grad: e.grad.iter().map(|g| outer.mul(*g)).collect(),
                }
            }
            Expr::Call(f, a) => {
                let e = a.enclose(dom);
                let (value, outer) = match f {
                    Func::Sin => (e.value.sin(), e.value.cos()),
                    Func::Cos => (e.value.cos(), e.value.sin().neg()),
                    Func::Exp => (e.value.exp(), e.value.exp()),
                    Func::Abs => (
                        e.value.abs(),
                        if e.value.lo > 0.0 {
                            Interval::point(1.0)
                        } else if e.value.hi < 0.0 {
                            Interval::point(-1.0)
                        } else {
                            Interval::new(-1.0, 1.0)
                        },
                    ),
                    Func::Sqrt => {
                        let s = e.value.sqrt();
                        (s, Interval::point(0.5).mul(s.recip()))
                    }
                };
                Enclosure {
                    value,
                    grad: e.grad.iter().map(|g| outer.mul(*g)).collect(),
                }
            }
        }
    }

    /// Euclidean Lipschitz bound on the (convex) box from interval gradient bounds.
    pub fn lipschitz_bound(&self, dom: &BoxRegion) -> Result<f64, ExprError> {
        if self.arity() > dom.dim() {
            return Err(ExprError::VariableOutOfRange {
                index: self.arity() - 1,
                dim: dom.dim(),
            });
        }
        let e = self.enclose(dom);
        let l = e.grad.iter().map(|g| g.magnitude().powi(2)).sum::<f64>().sqrt();
        if l.is_finite() {
            Ok(l)
        } else {
            Err(ExprError::UnboundedDerivative)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, p) => write!(f, "({a}^{p})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Abs => "abs",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    at: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.at < self.src.len() && self.src[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.at).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.at,
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.at += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.at += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.at += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.at += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.at += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.at += 1;
            let negative = if self.peek() == Some(b'-') {
                self.at += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.at;
            while self.at < self.src.len() && self.src[self.at].is_ascii_digit() {
                self.at += 1;
            }
            if start == self.at {
                return self.err("exponent must be an integer literal");
            }
            let text = std::str::from_utf8(&self.src[start..self.at]).expect("ascii digits");
            let p: i32 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: "exponent too large".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), if negative { -p } else { p }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.at += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.at += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character {:?}", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.at;
        while self.at < self.src.len() && (self.src[self.at].is_ascii_digit() || self.src[self.at] == b'.') {
            self.at += 1;
        }
        if self.at < self.src.len() && matches!(self.src[self.at], b'e' | b'E') {
            let mut e = self.at + 1;
            if e < self.src.len() && matches!(self.src[e], b'+' | b'-') {
                e += 1;
            }
            if e < self.src.len() && self.src[e].is_ascii_digit() {
                while e < self.src.len() && self.src[e].is_ascii_digit() {
                    e += 1;
                }
                self.at = e;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.at]).expect("ascii");
        text.parse()
            .map(Expr::Const)
            .map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("bad number {text}"),
            })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.at;
        while self.at < self.src.len() && self.src[self.at].is_ascii_alphanumeric() {
            self.at += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.at]).expect("ascii");
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(func) = func {
            if self.peek() != Some(b'(') {
                return self.err(format!("expected '(' after {name}"));
            }
            self.at += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err("expected ')'");
            }
            self.at += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        match name {
            "pi" => Ok(Expr::Const(PI)),
            "x" => Ok(Expr::Var(0)),
            _ => match name.strip_prefix('x').map(str::parse::<usize>) {
                Some(Ok(i)) => Ok(Expr::Var(i)),
                _ => Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("unknown identifier {name}"),
                }),
            },
        }
    }
}

/// Parses an expression and checks its variables against `dim`.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        at: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    if e.arity() > dim {
        return Err(ExprError::VariableOutOfRange {
            index: e.arity() - 1,
            dim,
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxRegion {
        BoxRegion::unit(1)
    }

    #[test]
    fn evaluates() {
        let e = parse_expr("3*x^2 - cos(pi*x) + abs(x - 0.5)/2", 1).unwrap();
        let x = 0.25;
        let want = 3.0 * x * x - (PI * x).cos() + (x - 0.5f64).abs() / 2.0;
        assert!((e.eval(&[x]) - want).abs() < 1e-15);
        assert_eq!(parse_expr("x1 * x0", 2).unwrap().eval(&[2.0, 3.0]), 6.0);
    }

    #[test]
    fn lipschitz_bounds() {
        assert_eq!(parse_expr("x", 1).unwrap().lipschitz_bound(&unit()).unwrap(), 1.0);
        assert_eq!(parse_expr("x^2", 1).unwrap().lipschitz_bound(&unit()).unwrap(), 2.0);
        assert_eq!(parse_expr("5", 1).unwrap().lipschitz_bound(&unit()).unwrap(), 0.0);
        let c = parse_expr("cos(3*x)", 1).unwrap().lipschitz_bound(&unit()).unwrap();
        assert!(c >= 3.0 * 3f64.sin() && c <= 3.0 + 1e-12, "{c}");
        let a = parse_expr("abs(x - 0.5)", 1).unwrap().lipschitz_bound(&unit()).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(
            parse_expr("sqrt(x)", 1).unwrap().lipschitz_bound(&unit()),
            Err(ExprError::UnboundedDerivative)
        );
        let two = BoxRegion::unit(2);
        let l = parse_expr("x0 + x1", 2).unwrap().lipschitz_bound(&two).unwrap();
        assert!((l - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn interval_cos_range() {
        let r = Interval::new(-0.5, 0.5).cos();
        assert_eq!(r.hi, 1.0);
        assert!((r.lo - 0.5f64.cos()).abs() < 1e-15);
        let r = Interval::new(3.0, 3.5).cos();
        assert_eq!(r.lo, -1.0);
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_expr("x +", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("foo(x)", 1), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expr("x^y", 1), Err(ExprError::Syntax { .. })));
        assert_eq!(
            parse_expr("x3", 2),
            Err(ExprError::VariableOutOfRange { index: 3, dim: 2 })
        );
    }
}
