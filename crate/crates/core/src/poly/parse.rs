// Recursive-descent parser for the polynomial grammar:
//
//   expr     := term (('+' | '-') term)*
//   term     := factor ('*' factor)*
//   factor   := base ('^' uint)?
//   base     := rational | var | '(' expr ')' | '-' factor
//   rational := int ('/' uint)?
//
// U+2212 (minus sign) is accepted as '-'.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use super::{PolyExpr, Rational};

const MAX_EXPONENT: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownVariable(String),
    BadExponent(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownVariable(name) => write!(f, "unknown variable `{name}`"),
            ParseErrorKind::BadExponent(msg) => write!(f, "bad exponent: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    Dot,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "number `{n}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn syntax(offset: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        offset,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(pos, ch)) = it.peek() {
        let tok = match ch {
            c if c.is_whitespace() => {
                it.next();
                continue;
            }
            '0'..='9' => {
                let mut end = pos;
                while let Some(&(p, c)) = it.peek() {
                    if !c.is_ascii_digit() {
                        break;
                    }
                    end = p + c.len_utf8();
                    it.next();
                }
                let n: BigInt = src[pos..end].parse().expect("ascii digits");
                out.push((pos, Tok::Int(n)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = pos;
                while let Some(&(p, c)) = it.peek() {
                    if !(c.is_ascii_alphanumeric() || c == '_') {
                        break;
                    }
                    end = p + c.len_utf8();
                    it.next();
                }
                out.push((pos, Tok::Ident(src[pos..end].to_string())));
                continue;
            }
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            '/' => Tok::Slash,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '.' => Tok::Dot,
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        it.next();
        out.push((pos, tok));
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a, S> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn nvars(&self) -> usize {
        self.vars.len()
    }

    fn expr(&mut self) -> Result<PolyExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<PolyExpr, ParseError> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<PolyExpr, ParseError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let (at, tok) = self.bump();
        let bad = |msg: String| ParseError {
            offset: at,
            kind: ParseErrorKind::BadExponent(msg),
        };
        match tok {
            Tok::Int(n) => {
                if *self.peek() == Tok::Dot || *self.peek() == Tok::Slash {
                    return Err(bad("exponent must be a nonnegative integer".into()));
                }
                let e = u32::try_from(&n)
                    .ok()
                    .filter(|&e| e <= MAX_EXPONENT)
                    .ok_or_else(|| bad(format!("exponent {n} exceeds {MAX_EXPONENT}")))?;
                Ok(base.pow(e))
            }
            Tok::Minus => Err(bad("negative exponents are not polynomial".into())),
            Tok::Dot => Err(bad("exponent must be a nonnegative integer".into())),
            other => Err(syntax(at, format!("expected exponent after `^`, found {other}"))),
        }
    }

    fn base(&mut self) -> Result<PolyExpr, ParseError> {
        let (at, tok) = self.bump();
        match tok {
            Tok::Int(n) => {
                if *self.peek() == Tok::Dot {
                    return Err(syntax(self.offset(), "decimal literals are not supported; use a/b"));
                }
                let mut value = Rational::from_integer(n);
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let (dat, dtok) = self.bump();
                    match dtok {
                        Tok::Int(d) if d.is_zero() => {
                            return Err(syntax(dat, "zero denominator"));
                        }
                        Tok::Int(d) => value /= Rational::from_integer(d),
                        other => return Err(syntax(dat, format!("expected denominator, found {other}"))),
                    }
                }
                Ok(PolyExpr::constant(self.nvars(), value))
            }
            Tok::Ident(name) => match self.vars.iter().position(|v| v.as_ref() == name) {
                Some(i) => Ok(PolyExpr::var(self.nvars(), i)),
                None => Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::UnknownVariable(name),
                }),
            },
            Tok::LParen => {
                let inner = self.expr()?;
                let (cat, close) = self.bump();
                if close != Tok::RParen {
                    return Err(syntax(cat, format!("expected `)`, found {close}")));
                }
                Ok(inner)
            }
            Tok::Minus => Ok(-self.factor()?),
            other => Err(syntax(at, format!("unexpected {other}"))),
        }
    }
}

/// Parses `src` into a canonical polynomial over the ordered variables `vars`.
pub fn parse_poly<S: AsRef<str>>(src: &str, vars: &[S]) -> Result<PolyExpr, ParseError> {
    let toks = tokenize(src)?;
    let mut parser = Parser { toks, pos: 0, vars };
    if *parser.peek() == Tok::End {
        return Err(syntax(0, "empty expression"));
    }
    let p = parser.expr()?;
    let (at, tok) = parser.bump();
    if tok != Tok::End {
        return Err(syntax(at, format!("unexpected {tok}")));
    }
    Ok(p)
}
