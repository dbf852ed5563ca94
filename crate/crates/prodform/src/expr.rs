//! Small expression grammar for inline map definitions: +, -, *, /, sin,
//! cos, sinh, cosh, sqrt, numeric constants, pi, and chart variables x1..xm.
//! Evaluation is generic over the jet scalar, so inline maps get exact
//! derivatives like the built-in families.

use crate::error::{Error, Result};
use crate::jet::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sinh(Box<Expr>),
    Cosh(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Expr::Const(v) => S::constant(*v),
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Sin(a) => a.eval(vars).sin(),
            Expr::Cos(a) => a.eval(vars).cos(),
            Expr::Sinh(a) => a.eval(vars).sinh(),
            Expr::Cosh(a) => a.eval(vars).cosh(),
            Expr::Sqrt(a) => a.eval(vars).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::Parse {
                    line: 0,
                    msg: format!("bad number '{text}' at column {start}"),
                })?;
                out.push(Token::Num(v));
            }
            _ if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected character '{other}' at column {i}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Parse { line: 0, msg: format!("expected {t:?}, got {got:?}") }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Minus) => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Token::Plus) => {
                self.bump();
                self.factor()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "sin" | "cos" | "sinh" | "cosh" | "sqrt" => {
                    self.expect(Token::LParen)?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Token::RParen)?;
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        "sinh" => Expr::Sinh(arg),
                        "cosh" => Expr::Cosh(arg),
                        _ => Expr::Sqrt(arg),
                    })
                }
                v if v.starts_with('x') => {
                    let idx: usize = v[1..].parse().map_err(|_| Error::Parse {
                        line: 0,
                        msg: format!("unknown identifier '{v}'"),
                    })?;
                    if idx == 0 || idx > self.nvars {
                        return Err(Error::Parse {
                            line: 0,
                            msg: format!("variable {v} out of range 1..{}", self.nvars),
                        });
                    }
                    Ok(Expr::Var(idx - 1))
                }
                other => {
                    Err(Error::Parse { line: 0, msg: format!("unknown identifier '{other}'") })
                }
            },
            got => Err(Error::Parse { line: 0, msg: format!("unexpected token {got:?}") }),
        }
    }
}

/// Parse one component expression over chart variables x1..x`nvars`.
pub fn parse_expr(src: &str, nvars: usize) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens: &tokens, pos: 0, nvars };
    let e = p.expr()?;
    if p.pos != tokens.len() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("trailing input after expression: {:?}", &tokens[p.pos..]),
        });
    }
    Ok(e)
}

/// Chart map defined by one expression per flat coordinate.
pub struct ExprChart {
    pub nvars: usize,
    pub components: Vec<Expr>,
}

impl ExprChart {
    pub fn parse(nvars: usize, sources: &[String]) -> Result<Self> {
        let components = sources
            .iter()
            .map(|s| parse_expr(s, nvars))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExprChart { nvars, components })
    }

    fn dim_in(&self) -> usize {
        self.nvars
    }
    fn dim_out(&self) -> usize {
        self.components.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.components.iter().map(|e| e.eval(x)).collect()
    }
}

crate::impl_chart_map!(ExprChart);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = parse_expr("cos(x1) * cos(x2) + 0.5 * sqrt(1 + x1 * x1)", 2).unwrap();
        let v = e.eval(&[0.3f64, -0.2]);
        let expect = 0.3f64.cos() * 0.2f64.cos() + 0.5 * (1.0 + 0.09f64).sqrt();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-x1 + 2 * 3 - 4 / 2", 1).unwrap();
        assert!((e.eval(&[1.0f64]) - 3.0).abs() < 1e-15);
        let e = parse_expr("2 - -3", 1).unwrap();
        assert!((e.eval(&[0.0f64]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn pi_and_scientific_notation() {
        let e = parse_expr("sin(pi / 2) + 1e-3", 1).unwrap();
        assert!((e.eval(&[0.0f64]) - 1.001).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_identifiers_and_bad_vars() {
        assert!(parse_expr("tan(x1)", 1).is_err());
        assert!(parse_expr("x3", 2).is_err());
        assert!(parse_expr("x0", 2).is_err());
        assert!(parse_expr("1 +", 1).is_err());
        assert!(parse_expr("(1 + 2", 1).is_err());
    }

    #[test]
    fn jet_derivatives_match_hand_computation() {
        use crate::jet::Jet1;
        let e = parse_expr("sin(x1) * cosh(x2)", 2).unwrap();
        let j = e.eval(&[Jet1::var(0.4, 0, 2), Jet1::var(-0.7, 1, 2)]);
        assert!((j.d[0] - 0.4f64.cos() * 0.7f64.cosh()).abs() < 1e-14);
        assert!((j.d[1] - 0.4f64.sin() * -(0.7f64.sinh())).abs() < 1e-14);
    }
}
