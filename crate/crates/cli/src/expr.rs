//! Tiny arithmetic expression grammar for time-dependent coefficients:
//! +, -, *, /, sin, cos, exp, numeric constants, pi, and the variables
//! t, x, y, z (base coordinates in the flat chart).

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// 0 = t, 1..=3 = x, y, z.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64, coords: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(0) => t,
            Expr::Var(i) => coords.get(i - 1).copied().unwrap_or(0.0),
            Expr::Add(a, b) => a.eval(t, coords) + b.eval(t, coords),
            Expr::Sub(a, b) => a.eval(t, coords) - b.eval(t, coords),
            Expr::Mul(a, b) => a.eval(t, coords) * b.eval(t, coords),
            Expr::Div(a, b) => a.eval(t, coords) / b.eval(t, coords),
            Expr::Neg(a) => -a.eval(t, coords),
            Expr::Sin(a) => a.eval(t, coords).sin(),
            Expr::Cos(a) => a.eval(t, coords).cos(),
            Expr::Exp(a) => a.eval(t, coords).exp(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.is_constant(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(0) => write!(f, "t"),
            Expr::Var(1) => write!(f, "x"),
            Expr::Var(2) => write!(f, "y"),
            Expr::Var(3) => write!(f, "z"),
            Expr::Var(_) => write!(f, "0"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

/// Parse error with the column (0-based) inside the expression string.
#[derive(Debug, Clone)]
pub struct ExprError {
    pub col: usize,
    pub msg: String,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    End,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let at = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, at));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit()
                        || self.src[self.pos] == b'.'
                        || self.src[self.pos] == b'e'
                        || self.src[self.pos] == b'E'
                        || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                            && self.pos > start
                            && (self.src[self.pos - 1] == b'e' || self.src[self.pos - 1] == b'E')))
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let val: f64 = text.parse().map_err(|_| ExprError {
                    col: start,
                    msg: format!("bad number literal '{text}'"),
                })?;
                Tok::Num(val)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(
                    std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string(),
                )
            }
            other => {
                return Err(ExprError {
                    col: at,
                    msg: format!("unexpected character '{}'", other as char),
                })
            }
        };
        Ok((tok, at))
    }
}

pub struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut lex = Lexer::new(src);
        let mut toks = Vec::new();
        loop {
            let (t, at) = lex.next()?;
            let end = t == Tok::End;
            toks.push((t, at));
            if end {
                break;
            }
        }
        let mut p = Parser { toks, idx: 0 };
        let e = p.expr()?;
        let (tok, at) = p.peek();
        if tok != Tok::End {
            return Err(ExprError { col: at, msg: "trailing input after expression".into() });
        }
        Ok(e)
    }

    fn peek(&self) -> (Tok, usize) {
        self.toks[self.idx].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let (tok, at) = self.peek();
        match tok {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                let (close, cat) = self.bump();
                if close != Tok::RParen {
                    return Err(ExprError { col: cat, msg: "expected ')'".into() });
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "t" => Ok(Expr::Var(0)),
                    "x" => Ok(Expr::Var(1)),
                    "y" => Ok(Expr::Var(2)),
                    "z" => Ok(Expr::Var(3)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        let (open, oat) = self.bump();
                        if open != Tok::LParen {
                            return Err(ExprError {
                                col: oat,
                                msg: format!("expected '(' after {name}"),
                            });
                        }
                        let arg = self.expr()?;
                        let (close, cat) = self.bump();
                        if close != Tok::RParen {
                            return Err(ExprError { col: cat, msg: "expected ')'".into() });
                        }
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(Box::new(arg)),
                            "cos" => Expr::Cos(Box::new(arg)),
                            _ => Expr::Exp(Box::new(arg)),
                        })
                    }
                    other => Err(ExprError {
                        col: at,
                        msg: format!(
                            "unknown identifier '{other}' (whitelist: t x y z pi sin cos exp)"
                        ),
                    }),
                }
            }
            Tok::End => Err(ExprError { col: at, msg: "unexpected end of expression".into() }),
            _ => Err(ExprError { col: at, msg: "unexpected token".into() }),
        }
    }
}
