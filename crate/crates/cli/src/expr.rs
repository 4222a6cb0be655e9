//! Infix polynomial literals such as `x1^8 + x1^2 + x1*x2 + x2^2`.
//!
//! Grammar: numbers (integers or decimals), variables `x1..xn`, binary `+ - *`,
//! unary `-`, `^` with a nonnegative integer exponent, and parentheses.

use sosrelax::{PolyError, Polynomial};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, msg: &str| ExprError::Syntax {
        col,
        msg: msg.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| err(col, &format!("bad number '{text}'")))?;
            out.push((col, Tok::Num(v)));
        } else if c == 'x' {
            i += 1;
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<usize>() {
                Ok(k) if k >= 1 => out.push((col, Tok::Var(k))),
                _ => return Err(err(col, "variables are written x1, x2, ...")),
            }
        } else if "+-*^()".contains(c) {
            out.push((col, Tok::Op(c)));
            i += 1;
        } else {
            return Err(err(col, &format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ast {
    Num(f64),
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.0)
    }

    fn fail<T>(&self, msg: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            col: self.col(),
            msg: msg.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Ast::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Ast::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op('*')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    self.pos += 1;
                    return Ok(Ast::Pow(Box::new(base), v as u32));
                }
                _ => return self.fail("expected a nonnegative integer exponent"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Ast::Num(v))
            }
            Some(Tok::Var(k)) => {
                self.pos += 1;
                Ok(Ast::Var(k))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if let Some(Tok::Op(')')) = self.peek() {
                    self.pos += 1;
                    Ok(e)
                } else {
                    self.fail("expected ')'")
                }
            }
            Some(_) => self.fail("expected a number, a variable or '('"),
            None => self.fail("unexpected end of input"),
        }
    }
}

fn max_var(a: &Ast) -> usize {
    match a {
        Ast::Num(_) => 0,
        Ast::Var(k) => *k,
        Ast::Neg(x) | Ast::Pow(x, _) => max_var(x),
        Ast::Add(x, y) | Ast::Sub(x, y) | Ast::Mul(x, y) => max_var(x).max(max_var(y)),
    }
}

fn build(a: &Ast, n: usize) -> Result<Polynomial, PolyError> {
    Ok(match a {
        Ast::Num(v) => Polynomial::constant(n, *v)?,
        Ast::Var(k) => Polynomial::variable(n, k - 1)?,
        Ast::Neg(x) => build(x, n)?.scale(-1.0),
        Ast::Add(x, y) => build(x, n)?.add(&build(y, n)?)?,
        Ast::Sub(x, y) => build(x, n)?.sub(&build(y, n)?)?,
        Ast::Mul(x, y) => build(x, n)?.mul(&build(y, n)?)?,
        Ast::Pow(x, e) => build(x, n)?.pow(*e)?,
    })
}

/// Parses `src` into a polynomial in `n` variables, or in as many variables
/// as the highest index used when `n` is `None`.
pub fn parse_polynomial(src: &str, n: Option<usize>) -> Result<Polynomial, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.chars().count() + 1,
    };
    let ast = p.expr()?;
    if p.pos != p.toks.len() {
        return p.fail("unexpected trailing input");
    }
    let used = max_var(&ast);
    let n = match n {
        Some(n) if n < used => {
            return Err(ExprError::Syntax {
                col: 1,
                msg: format!("x{used} used but only {n} variables declared"),
            })
        }
        Some(n) => n,
        None => used.max(1),
    };
    Ok(build(&ast, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let p = parse_polynomial("x1^8 + x1^2 + x1*x2 + x2^2", None).unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.evaluate(&[1.0, 2.0]).unwrap(), 1.0 + 1.0 + 2.0 + 4.0);
        let q = parse_polynomial("-(x1 - 2.5)^2 * 3", Some(3)).unwrap();
        assert_eq!(q.num_vars(), 3);
        assert_eq!(q.evaluate(&[0.5, 0.0, 0.0]).unwrap(), -12.0);
        assert_eq!(parse_polynomial("-1", None).unwrap().evaluate(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn reports_columns() {
        match parse_polynomial("x1 + * x2", None) {
            Err(ExprError::Syntax { col, .. }) => assert_eq!(col, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_polynomial("x0", None), Err(ExprError::Syntax { col: 1, .. })));
        assert!(parse_polynomial("(x1", None).is_err());
        assert!(parse_polynomial("x1^x2", None).is_err());
        assert!(parse_polynomial("x3", Some(2)).is_err());
    }
}
