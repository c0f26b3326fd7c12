//! Recursive-descent parser for the map DSL.
//!
//! ```text
//! map       := component ((';' | ',') component)*
//! component := expr 'mod' '1'
//! expr      := term (('+' | '-') term)*
//! term      := factor ('*' factor)*
//! factor    := number | 'pi' | var | '-' factor
//!            | 'sin' '(' expr ')' | 'cos' '(' expr ')' | '(' expr ')'
//! var       := 'x' digits          (1-based coordinate index)
//! number    := digits ('.' digits)?
//! ```

use super::ast::Expr;
use crate::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Sep,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(_) => "number".into(),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Sep => "separator".into(),
        Tok::End => "end of input".into(),
    }
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, Error> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b';' | b',' => out.push((Tok::Sep, start)),
            b'0'..=b'9' | b'.' => {
                let mut int = String::new();
                let mut frac = String::new();
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    int.push(bytes[i] as char);
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        frac.push(bytes[i] as char);
                        i += 1;
                    }
                }
                if int.is_empty() && frac.is_empty() {
                    return Err(syntax(start, "malformed number"));
                }
                let digits = format!("{int}{frac}");
                let n: BigInt = digits
                    .parse()
                    .map_err(|_| syntax(start, "malformed number"))?;
                let d = BigInt::from(10).pow(frac.len() as u32);
                out.push((Tok::Num(BigRational::new(n, d)), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character '{ch}'")));
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        syntax(
            self.at(),
            format!("expected {wanted}, found {}", describe(self.peek())),
        )
    }

    fn expect(&mut self, t: Tok, wanted: &str) -> Result<(), Error> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn map(&mut self) -> Result<Vec<Expr>, Error> {
        let mut comps = vec![self.component()?];
        while *self.peek() == Tok::Sep {
            self.bump();
            comps.push(self.component()?);
        }
        if *self.peek() != Tok::End {
            return Err(self.unexpected("';' or end of input"));
        }
        Ok(comps)
    }

    fn component(&mut self) -> Result<Expr, Error> {
        let e = self.expr()?;
        match self.peek() {
            Tok::Ident(s) if s == "mod" => {
                self.bump();
            }
            _ => return Err(self.unexpected("'mod 1'")),
        }
        match self.peek() {
            Tok::Num(q) if q.is_one() => {
                self.bump();
                Ok(e)
            }
            _ => Err(self.unexpected("'1' after 'mod'")),
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
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

    fn term(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, Error> {
        let at = self.at();
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Expr::Num(q))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "pi" => Ok(Expr::Pi),
                    "sin" | "cos" => {
                        self.expect(Tok::LParen, "'(' after function name")?;
                        let e = self.expr()?;
                        self.expect(Tok::RParen, "')'")?;
                        Ok(if name == "sin" {
                            Expr::Sin(Box::new(e))
                        } else {
                            Expr::Cos(Box::new(e))
                        })
                    }
                    v if v.starts_with('x') && v.len() > 1 && v[1..].bytes().all(|b| b.is_ascii_digit()) => {
                        let index: usize = v[1..]
                            .parse()
                            .map_err(|_| syntax(at, "variable index too large"))?;
                        if index == 0 || index > self.dim {
                            return Err(Error::DimensionMismatch {
                                index,
                                dim: self.dim,
                            });
                        }
                        Ok(Expr::Var(index - 1))
                    }
                    _ => Err(syntax(at, format!("unknown identifier '{name}'"))),
                }
            }
            _ => Err(self.unexpected("a number, variable, function or '('")),
        }
    }
}

/// Parses DSL source into one expression per output coordinate.
pub fn parse_components(src: &str, dim: usize) -> Result<Vec<Expr>, Error> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, dim };
    let comps = p.map()?;
    if comps.len() != dim {
        return Err(syntax(
            src.len(),
            format!("expected {dim} component(s), found {}", comps.len()),
        ));
    }
    Ok(comps)
}

/// Parses a decimal literal such as `0.3` or `-0.125` exactly.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let toks = lex(body).ok()?;
    match toks.as_slice() {
        [(Tok::Num(q), _), (Tok::End, _)] => Some(if neg { -q.clone() } else { q.clone() }),
        _ => None,
    }
}
