//! Polynomial expressions in parameter components, used for custom families.
//!
//! Grammar: numbers, `i`, `l0`, `l1`, ..., `+ - * ^` and parentheses.
//! Exponents must be nonnegative integer literals.

use std::fmt;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Param(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(Error::InvalidInput(format!("trailing input in expression '{src}'")));
        }
        Ok(e)
    }

    pub fn eval(&self, lambda: &[C64]) -> Result<C64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Param(k) => *lambda.get(*k).ok_or_else(|| Error::InvalidInput(format!("parameter l{k} out of range")))?,
            Expr::Add(a, b) => a.eval(lambda)? + b.eval(lambda)?,
            Expr::Sub(a, b) => a.eval(lambda)? - b.eval(lambda)?,
            Expr::Mul(a, b) => a.eval(lambda)? * b.eval(lambda)?,
            Expr::Neg(a) => -a.eval(lambda)?,
            Expr::Pow(a, n) => a.eval(lambda)?.powu(*n),
        })
    }

    /// Largest parameter index referenced, if any.
    pub fn max_param(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Param(k) => Some(*k),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_param().max(b.max_param()),
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_param(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Expr::Const(c) => write!(f, "({}+{}*i)", c.re, c.im),
            Expr::Param(k) => write!(f, "l{k}"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    I,
    Param(usize),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::InvalidInput(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c == 'i' {
            out.push(Tok::I);
            i += 1;
        } else if c == 'l' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let k: usize = s.parse().map_err(|_| Error::InvalidInput("expected index after 'l'".into()))?;
            out.push(Tok::Param(k));
        } else if "+-*^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::InvalidInput(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            if self.eat('+') {
                e = Expr::Add(Box::new(e), Box::new(self.product()?));
            } else if self.eat('-') {
                e = Expr::Sub(Box::new(e), Box::new(self.product()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.eat('*') {
            e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            match self.tokens.get(self.pos).cloned() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    self.pos += 1;
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                _ => Err(Error::InvalidInput("exponent must be an integer literal in 0..=64".into())),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Num(v)) => Ok(Expr::Const(C64::new(v, 0.0))),
            Some(Tok::I) => Ok(Expr::Const(C64::new(0.0, 1.0))),
            Some(Tok::Param(k)) => Ok(Expr::Param(k)),
            Some(Tok::Op('(')) => {
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(Error::InvalidInput("missing ')'".into()));
                }
                Ok(e)
            }
            _ => Err(Error::InvalidInput("unexpected end or token in expression".into())),
        }
    }
}
