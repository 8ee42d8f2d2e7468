//! Restricted expression grammar for scalar coefficients.
//!
//! An expression is a sum of terms; each term is a product of a numeric
//! coefficient, a power of `x` and at most one time factor built on
//! `u(t) = (t - a)(b - t)`:
//!
//! ```text
//! expr     := ["+"|"-"] term (("+"|"-") term)*
//! term     := factor ("*" factor)*
//! factor   := number | "x" ["^" integer]
//!           | "[(t-a)(b-t)]^" exponent      real power, odd root for negative u
//!           | "|(t-a)(b-t)|^" exponent      power of |u|
//! exponent := number | "(" number "/" number ")"
//! ```
//!
//! `[u]^(p/q)` is the real `q`-th root raised to `p` and needs `q` odd;
//! decimal exponents are read as reduced fractions, so `0.2` means `1/5`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum PowerMode {
    /// `sign(u)^numerator * |u|^exponent`.
    RealRoot {
        numerator: i64,
    },
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFactor {
    a: f64,
    b: f64,
    exponent: f64,
    mode: PowerMode,
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        let u = (t - self.a) * (self.b - t);
        let mag = u.abs().powf(self.exponent);
        match self.mode {
            PowerMode::Modulus => mag,
            PowerMode::RealRoot { numerator } => {
                if u < 0.0 && numerator % 2 != 0 {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    x_pow: u32,
    time: Option<TimeFactor>,
}

/// A parsed scalar coefficient `h(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    terms: Vec<Term>,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            source,
        };
        let terms = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.trim().to_string(),
            terms,
        })
    }

    pub fn zero() -> Self {
        Self {
            source: "0".into(),
            terms: Vec::new(),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.time.is_none())
    }

    /// Smallest time exponent among the terms, if any.
    pub fn min_time_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter_map(|t| t.time.map(|f| f.exponent))
            .min_by(f64::total_cmp)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let tf = term.time.map_or(1.0, |f| f.eval(t));
                term.coef * tf * x.powi(term.x_pow as i32)
            })
            .sum()
    }

    /// `dh/dx`.
    pub fn derivative(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|term| term.x_pow > 0)
            .map(|term| {
                let tf = term.time.map_or(1.0, |f| f.eval(t));
                term.coef * tf * term.x_pow as f64 * x.powi(term.x_pow as i32 - 1)
            })
            .sum()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    X,
    T,
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bar,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let tok = match c {
            ' ' | '\t' | '\n' => {
                i += 1;
                continue;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                out.push((Tok::Num(chars[start..i].iter().collect()), start));
                continue;
            }
            'x' => Tok::X,
            't' => Tok::T,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            '/' => Tok::Slash,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '|' => Tok::Bar,
            other => {
                return Err(Error::config(format!(
                    "expression {src:?}: unexpected character {other:?} at offset {i}"
                )))
            }
        };
        out.push((tok, i));
        i += 1;
    }
    Ok(out)
}

/// Exponent as written: a rational when exactly representable.
struct Exponent {
    value: f64,
    ratio: Option<(i64, i64)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn decimal_ratio(s: &str) -> Option<(i64, i64)> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 12 {
        return None;
    }
    let den = 10i64.pow(frac.len() as u32);
    let num: i64 = format!("{int}{frac}").parse().ok()?;
    let g = gcd(num, den).max(1);
    Some((num / g, den / g))
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let at = self
            .tokens
            .get(self.pos)
            .map_or(self.source.len(), |(_, off)| *off);
        Error::config(format!(
            "expression {:?}: {msg} at offset {at}",
            self.source
        ))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {tok:?}")))
        }
    }

    fn number(&mut self) -> Result<(f64, String)> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                self.pos += 1;
                let v = s
                    .parse::<f64>()
                    .map_err(|_| self.error(&format!("bad number {s:?}")))?;
                Ok((v, s))
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn expr(&mut self) -> Result<Vec<Term>> {
        let mut terms = Vec::new();
        let mut sign = if self.eat(&Tok::Minus) {
            -1.0
        } else {
            self.eat(&Tok::Plus);
            1.0
        };
        loop {
            let mut term = self.term()?;
            term.coef *= sign;
            terms.push(term);
            if self.eat(&Tok::Plus) {
                sign = 1.0;
            } else if self.eat(&Tok::Minus) {
                sign = -1.0;
            } else {
                break;
            }
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<Term> {
        let mut term = Term {
            coef: 1.0,
            x_pow: 0,
            time: None,
        };
        loop {
            self.factor(&mut term)?;
            if !self.eat(&Tok::Star) {
                break;
            }
        }
        Ok(term)
    }

    fn factor(&mut self, term: &mut Term) -> Result<()> {
        match self.peek() {
            Some(Tok::Num(_)) => {
                term.coef *= self.number()?.0;
            }
            Some(Tok::X) => {
                self.pos += 1;
                let pow = if self.eat(&Tok::Caret) {
                    let (v, s) = self.number()?;
                    if v.fract() != 0.0 || v < 0.0 || v > 64.0 {
                        return Err(self.error(&format!(
                            "x exponent must be a small non-negative integer, got {s}"
                        )));
                    }
                    v as u32
                } else {
                    1
                };
                term.x_pow += pow;
            }
            Some(Tok::LBracket) | Some(Tok::Bar) => {
                let modulus = self.peek() == Some(&Tok::Bar);
                self.pos += 1;
                let (a, b) = self.pair()?;
                self.expect(if modulus { Tok::Bar } else { Tok::RBracket })?;
                self.expect(Tok::Caret)?;
                let exp = self.exponent()?;
                let mode = if modulus {
                    PowerMode::Modulus
                } else {
                    match exp.ratio {
                        Some((num, den)) if den % 2 != 0 => PowerMode::RealRoot { numerator: num },
                        _ => {
                            return Err(self.error(
                                "real power of (t-a)(b-t) needs a rational exponent with odd denominator; use |(t-a)(b-t)|^p",
                            ))
                        }
                    }
                };
                if term.time.is_some() {
                    return Err(self.error("at most one time factor per term"));
                }
                term.time = Some(TimeFactor {
                    a,
                    b,
                    exponent: exp.value,
                    mode,
                });
            }
            _ => return Err(self.error("expected a number, x, or a time factor")),
        }
        Ok(())
    }

    fn signed_number(&mut self) -> Result<f64> {
        let neg = self.eat(&Tok::Minus);
        let v = self.number()?.0;
        Ok(if neg { -v } else { v })
    }

    /// `(t - a)(b - t)`
    fn pair(&mut self) -> Result<(f64, f64)> {
        self.expect(Tok::LParen)?;
        self.expect(Tok::T)?;
        let a = if self.eat(&Tok::Minus) {
            self.number()?.0
        } else if self.eat(&Tok::Plus) {
            -self.number()?.0
        } else {
            return Err(self.error("expected (t-a)"));
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::LParen)?;
        let b = self.signed_number()?;
        self.expect(Tok::Minus)?;
        self.expect(Tok::T)?;
        self.expect(Tok::RParen)?;
        Ok((a, b))
    }

    fn exponent(&mut self) -> Result<Exponent> {
        let exp = if self.eat(&Tok::LParen) {
            let (n, ns) = self.number()?;
            self.expect(Tok::Slash)?;
            let (d, ds) = self.number()?;
            self.expect(Tok::RParen)?;
            if d == 0.0 {
                return Err(self.error("zero denominator"));
            }
            let ratio = match (ns.parse::<i64>(), ds.parse::<i64>()) {
                (Ok(n), Ok(d)) => {
                    let g = gcd(n, d).max(1);
                    Some((n / g, d / g))
                }
                _ => None,
            };
            Exponent {
                value: n / d,
                ratio,
            }
        } else {
            let (v, s) = self.number()?;
            Exponent {
                value: v,
                ratio: decimal_ratio(&s),
            }
        };
        Ok(exp)
    }
}
