//! Tiny expression grammar for prescribed velocities.
//!
//! Grammar: numbers, the variable `t`, `+ - * /`, parentheses, `sin`, `cos`,
//! `exp`, and `^` with a constant exponent. Expressions carry an exact
//! symbolic time derivative, which the nonlinear forcing needs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::T => t,
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Neg(a) => -a.eval(t),
            Expr::Pow(a, c) => a.eval(t).powf(*c),
            Expr::Sin(a) => a.eval(t).sin(),
            Expr::Cos(a) => a.eval(t).cos(),
            Expr::Exp(a) => a.eval(t).exp(),
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn deriv(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            T => Num(1.0),
            Add(a, b) => Add(Box::new(a.deriv()), Box::new(b.deriv())),
            Sub(a, b) => Sub(Box::new(a.deriv()), Box::new(b.deriv())),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.deriv()), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.deriv()))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.deriv()), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.deriv()))),
                )),
                Box::new(Pow(b.clone(), 2.0)),
            ),
            Neg(a) => Neg(Box::new(a.deriv())),
            Pow(a, c) => Mul(
                Box::new(Mul(Box::new(Num(*c)), Box::new(Pow(a.clone(), c - 1.0)))),
                Box::new(a.deriv()),
            ),
            Sin(a) => Mul(Box::new(Cos(a.clone())), Box::new(a.deriv())),
            Cos(a) => Neg(Box::new(Mul(Box::new(Sin(a.clone())), Box::new(a.deriv())))),
            Exp(a) => Mul(Box::new(Exp(a.clone())), Box::new(a.deriv())),
        }
    }

    /// Constant value, if the expression does not involve `t`.
    fn const_value(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            Expr::T => None,
            Expr::Add(a, b) => Some(a.const_value()? + b.const_value()?),
            Expr::Sub(a, b) => Some(a.const_value()? - b.const_value()?),
            Expr::Mul(a, b) => Some(a.const_value()? * b.const_value()?),
            Expr::Div(a, b) => Some(a.const_value()? / b.const_value()?),
            Expr::Neg(a) => Some(-a.const_value()?),
            Expr::Pow(a, c) => Some(a.const_value()?.powf(*c)),
            Expr::Sin(a) => Some(a.const_value()?.sin()),
            Expr::Cos(a) => Some(a.const_value()?.cos()),
            Expr::Exp(a) => Some(a.const_value()?.exp()),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Expr {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.power()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp_expr = self.unary()?;
            let c = exp_expr
                .const_value()
                .ok_or_else(|| self.err("exponent must be a constant"))?;
            return Ok(Expr::Pow(Box::new(base), c));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, 't', function or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err("malformed number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "t" => Ok(Expr::T),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(match name {
                    "sin" => Expr::Sin(Box::new(arg)),
                    "cos" => Expr::Cos(Box::new(arg)),
                    _ => Expr::Exp(Box::new(arg)),
                })
            }
            other => Err(self.err(&format!("unknown identifier '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_and_evaluates() {
        let e = parse("0.3*sin(t) + (1+t)^-0.5").unwrap();
        let t = 2.0;
        assert_relative_eq!(e.eval(t), 0.3 * t.sin() + 3.0f64.powf(-0.5), epsilon = 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for src in [
            "0.3*sin(t)",
            "(1+t)^-0.5",
            "exp(-0.2*t)*cos(2*t)",
            "t*t - 1/(1+t)",
            "-t^3",
        ] {
            let e = parse(src).unwrap();
            let d = e.deriv();
            for &t in &[0.0, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (e.eval(t + h) - e.eval(t - h)) / (2.0 * h);
                assert!(
                    (d.eval(t) - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                    "{src} at t={t}: {} vs {}",
                    d.eval(t),
                    fd
                );
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("sin(t").is_err());
        assert!(parse("2 +* 3").is_err());
        assert!(parse("t^t").is_err()); // non-constant exponent
        assert!(parse("foo(t)").is_err());
        assert!(parse("1 2").is_err());
    }
}
