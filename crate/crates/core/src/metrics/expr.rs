//! Closed-form expression grammar for coefficient fields and angular profiles.
//!
//! Grammar: numbers, variables `x1`, `x2`, `r2` (= x1²+x2²) and `t` (angle),
//! operators `+ - * / ^` with the usual precedence, parentheses, and the
//! functions `sin`, `cos`, `exp`, `sqrt`. Which variables are admissible
//! depends on where the expression appears: base fields use `x1/x2/r2`,
//! angular profiles use `t`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    X1,
    X2,
    R2,
    T,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X1 => x1,
            Expr::X2 => x2,
            Expr::R2 => x1 * x1 + x2 * x2,
            Expr::T => t,
            Expr::Add(a, b) => a.eval(x1, x2, t) + b.eval(x1, x2, t),
            Expr::Sub(a, b) => a.eval(x1, x2, t) - b.eval(x1, x2, t),
            Expr::Mul(a, b) => a.eval(x1, x2, t) * b.eval(x1, x2, t),
            Expr::Div(a, b) => a.eval(x1, x2, t) / b.eval(x1, x2, t),
            Expr::Pow(a, b) => a.eval(x1, x2, t).powf(b.eval(x1, x2, t)),
            Expr::Neg(a) => -a.eval(x1, x2, t),
            Expr::Sin(a) => a.eval(x1, x2, t).sin(),
            Expr::Cos(a) => a.eval(x1, x2, t).cos(),
            Expr::Exp(a) => a.eval(x1, x2, t).exp(),
            Expr::Sqrt(a) => a.eval(x1, x2, t).sqrt(),
        }
    }

    pub fn uses_position(&self) -> bool {
        match self {
            Expr::X1 | Expr::X2 | Expr::R2 => true,
            Expr::Const(_) | Expr::T => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_position() || b.uses_position(),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Sqrt(a) => {
                a.uses_position()
            }
        }
    }

    pub fn uses_angle(&self) -> bool {
        match self {
            Expr::T => true,
            Expr::Const(_) | Expr::X1 | Expr::X2 | Expr::R2 => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_angle() || b.uses_angle(),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Sqrt(a) => {
                a.uses_angle()
            }
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
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
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
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number literal '{text}'")))?;
                tokens.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            _ => {
                return Err(Error::Config(format!(
                    "unexpected character '{c}' in expression '{src}'"
                )))
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, tok: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Config(format!(
                "expected {tok:?}, found {other:?} in '{}'",
                self.src
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
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
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // Unary minus binds looser than `^`, so -2^2 = -(2^2).
    fn factor(&mut self) -> Result<Expr> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        if let Some(Token::Plus) = self.peek() {
            self.pos += 1;
            return self.factor();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            let exponent = self.factor()?; // right-associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(value)) => Ok(Expr::Const(value)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x1" => Ok(Expr::X1),
                "x2" => Ok(Expr::X2),
                "r2" => Ok(Expr::R2),
                "t" => Ok(Expr::T),
                "sin" | "cos" | "exp" | "sqrt" => {
                    self.expect(Token::LParen)?;
                    let inner = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(Box::new(inner)),
                        "cos" => Expr::Cos(Box::new(inner)),
                        "exp" => Expr::Exp(Box::new(inner)),
                        _ => Expr::Sqrt(Box::new(inner)),
                    })
                }
                other => Err(Error::Config(format!(
                    "unknown identifier '{other}' in '{}'",
                    self.src
                ))),
            },
            other => Err(Error::Config(format!(
                "unexpected token {other:?} in '{}'",
                self.src
            ))),
        }
    }
}

/// Parse one expression; the whole string must be consumed.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Config("empty expression".into()));
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        src,
    };
    let expr = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(Error::Config(format!(
            "trailing input after expression in '{src}'"
        )));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_field_expressions() {
        let e = parse_expr("4/(1+r2)^2").unwrap();
        assert!((e.eval(0.0, 0.0, 0.0) - 4.0).abs() < 1e-15);
        assert!((e.eval(1.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let f = parse_expr("0.2*x1/(1+r2)").unwrap();
        assert!((f.eval(1.0, 2.0, 0.0) - 0.2 / 6.0).abs() < 1e-15);
        assert!(f.uses_position());
        assert!(!f.uses_angle());
    }

    #[test]
    fn parses_profiles_and_precedence() {
        let h = parse_expr("1 + 0.1*cos(3*t)").unwrap();
        assert!((h.eval(0.0, 0.0, 0.0) - 1.1).abs() < 1e-15);
        assert!(h.uses_angle());
        // Right-associative power, unary minus.
        let p = parse_expr("-2^2").unwrap();
        assert!((p.eval(0.0, 0.0, 0.0) + 4.0).abs() < 1e-15);
        let q = parse_expr("2^3^2").unwrap();
        assert!((q.eval(0.0, 0.0, 0.0) - 512.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_identifiers() {
        assert!(parse_expr("foo(1)").is_err());
        assert!(parse_expr("x3 + 1").is_err());
        assert!(parse_expr("1 +").is_err());
        assert!(parse_expr("(1").is_err());
    }
}
