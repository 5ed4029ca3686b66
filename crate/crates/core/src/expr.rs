//! Small expression language used by system, provider and recurrence files.
//!
//! Grammar: integers, variables (`x`, `n`, `ep`/`eps`), `+ - * / ^`,
//! parentheses and nested harmonic sums `S_1(n)`, `S_{2,-1}(n)`, `S[1,1](n)`.

use std::collections::HashMap;

use crate::arith::{rational, BiPoly, Poly, RatFunc, Rational, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Rational),
    Sym(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Harmonic(Vec<i64>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(String),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push((start, Tok::Int(chars[start..i].iter().collect())));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()[]{},_".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::parse(
                format!("column {}", i + 1),
                format!("unexpected character '{c}'"),
            ));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let col = self
            .toks
            .get(self.pos)
            .map(|(c, _)| c + 1)
            .unwrap_or(self.src.chars().count() + 1);
        Error::parse(format!("'{}' column {col}", self.src), msg)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
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
            // right-associative, exponent may carry a sign
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn signed_int(&mut self) -> Result<i64> {
        let neg = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Int(s)) => {
                self.pos += 1;
                let v: i64 = s.parse().map_err(|_| self.err("integer too large"))?;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.err("expected an integer")),
        }
    }

    fn harmonic_indices(&mut self) -> Result<Vec<i64>> {
        let close = if self.eat('[') {
            ']'
        } else if self.eat('_') {
            if self.eat('{') {
                '}'
            } else {
                return Ok(vec![self.signed_int()?]);
            }
        } else {
            return Err(self.err("expected harmonic-sum indices"));
        };
        let mut idx = vec![self.signed_int()?];
        while self.eat(',') {
            idx.push(self.signed_int()?);
        }
        self.expect(close)?;
        Ok(idx)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Int(s)) => {
                self.pos += 1;
                let v: dashu::integer::IBig = s.parse().map_err(|_| self.err("bad integer"))?;
                Ok(Expr::Num(Rational::from(v)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "S" {
                    let idx = self.harmonic_indices()?;
                    if idx.contains(&0) {
                        return Err(self.err("harmonic-sum index 0 is undefined"));
                    }
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Harmonic(idx, Box::new(arg)));
                }
                let name = if name == "eps" { "ep".to_string() } else { name };
                Ok(Expr::Sym(name))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(self.err("expected a number, variable or '('")),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    if p.toks.is_empty() {
        return Err(Error::parse(format!("'{src}'"), "empty expression"));
    }
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

impl Expr {
    /// Interpret as a rational function in `outer` and `ep`.
    pub fn to_ratfunc(&self, outer: Var) -> Result<RatFunc> {
        let loc = || format!("expression in {} and ep", outer.name());
        Ok(match self {
            Expr::Num(v) => RatFunc::constant(outer, v.clone()),
            Expr::Sym(s) if s == outer.name() => RatFunc::from_poly(BiPoly::var(outer)),
            Expr::Sym(s) if s == "ep" => RatFunc::from_poly(BiPoly::eps(outer)),
            Expr::Sym(s) => return Err(Error::parse(loc(), format!("unknown variable '{s}'"))),
            Expr::Add(a, b) => &a.to_ratfunc(outer)? + &b.to_ratfunc(outer)?,
            Expr::Sub(a, b) => &a.to_ratfunc(outer)? - &b.to_ratfunc(outer)?,
            Expr::Mul(a, b) => &a.to_ratfunc(outer)? * &b.to_ratfunc(outer)?,
            Expr::Div(a, b) => {
                let d = b.to_ratfunc(outer)?;
                if d.is_zero() {
                    return Err(Error::parse(loc(), "zero denominator"));
                }
                (&a.to_ratfunc(outer)? / &d)?
            }
            Expr::Neg(a) => -&a.to_ratfunc(outer)?,
            Expr::Pow(a, e) => {
                let e = e.to_ratfunc(outer)?;
                let k = constant_integer(&e)
                    .ok_or_else(|| Error::parse(loc(), "exponent must be an integer constant"))?;
                let base = a.to_ratfunc(outer)?;
                let mut acc = RatFunc::one(outer);
                for _ in 0..k.unsigned_abs() {
                    acc = &acc * &base;
                }
                if k < 0 {
                    if acc.is_zero() {
                        return Err(Error::parse(loc(), "zero denominator"));
                    }
                    acc = acc.inv()?;
                }
                acc
            }
            Expr::Harmonic(..) => {
                return Err(Error::parse(
                    loc(),
                    "harmonic sums are only allowed in moment providers",
                ))
            }
        })
    }

    /// Interpret as a polynomial; fails when a denominator remains.
    pub fn to_bipoly(&self, outer: Var) -> Result<BiPoly> {
        let r = self.to_ratfunc(outer)?;
        if !r.den().is_constant() {
            return Err(Error::parse(
                format!("expression in {} and ep", outer.name()),
                "expected a polynomial",
            ));
        }
        let c = r.den().term(0, 0);
        Ok(r.num().scale(&(Rational::ONE / c)))
    }

    /// Evaluate at integer `n` (no `x`/`ep`); harmonic sums looked up in `cache`.
    pub fn eval_at(&self, n: i64, cache: &mut HarmonicCache) -> Result<Rational> {
        let loc = || format!("evaluation at n = {n}");
        Ok(match self {
            Expr::Num(v) => v.clone(),
            Expr::Sym(s) if s == "n" => rational::int(n),
            Expr::Sym(s) => return Err(Error::parse(loc(), format!("unknown variable '{s}'"))),
            Expr::Add(a, b) => a.eval_at(n, cache)? + b.eval_at(n, cache)?,
            Expr::Sub(a, b) => a.eval_at(n, cache)? - b.eval_at(n, cache)?,
            Expr::Mul(a, b) => a.eval_at(n, cache)? * b.eval_at(n, cache)?,
            Expr::Div(a, b) => {
                let d = b.eval_at(n, cache)?;
                if d.is_zero() {
                    return Err(Error::DivisionByZero(loc()));
                }
                a.eval_at(n, cache)? / d
            }
            Expr::Neg(a) => -a.eval_at(n, cache)?,
            Expr::Pow(a, e) => {
                let e = e.eval_at(n, cache)?;
                if !rational::is_integer(&e) {
                    return Err(Error::parse(loc(), "non-integer exponent"));
                }
                let k: i64 = i64::try_from(e.numerator())
                    .map_err(|_| Error::parse(loc(), "exponent too large"))?;
                let b = a.eval_at(n, cache)?;
                let p = rational::pow(&b, k.unsigned_abs() as usize);
                if k < 0 {
                    if p.is_zero() {
                        return Err(Error::DivisionByZero(loc()));
                    }
                    Rational::ONE / p
                } else {
                    p
                }
            }
            Expr::Harmonic(idx, arg) => {
                let a = arg.eval_at(n, cache)?;
                if !rational::is_integer(&a) || rational::is_negative(&a) {
                    return Err(Error::parse(loc(), "harmonic-sum argument must be a nonnegative integer"));
                }
                let m = usize::try_from(a.numerator())
                    .map_err(|_| Error::parse(loc(), "argument too large"))?;
                cache.value(idx, m)?
            }
        })
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Num(v) if v.is_zero())
    }
}

fn constant_integer(r: &RatFunc) -> Option<i64> {
    if !r.den().is_one() || !r.num().is_constant() {
        return None;
    }
    let c = r.num().term(0, 0);
    if !rational::is_integer(&c) {
        return None;
    }
    i64::try_from(c.numerator()).ok()
}

/// Harmonic sum `S_{a1,...,ak}(n)`; `S(0) = 0` for a nonempty index list.
pub fn harmonic_sum(indices: &[i64], n: usize) -> Result<Rational> {
    HarmonicCache::default().value(indices, n)
}

/// Memoized harmonic-sum prefixes, grown on demand, so a stream of `mu`
/// values costs `O(mu * depth)` operations.
#[derive(Default, Debug, Clone)]
pub struct HarmonicCache {
    streams: HashMap<Vec<i64>, Vec<Rational>>,
}

impl HarmonicCache {
    pub fn value(&mut self, indices: &[i64], n: usize) -> Result<Rational> {
        if indices.is_empty() {
            return Ok(Rational::ONE);
        }
        if indices.contains(&0) {
            return Err(Error::InvalidArgument(
                "harmonic-sum index 0 is undefined".into(),
            ));
        }
        self.extend(indices, n);
        Ok(self.streams[indices][n].clone())
    }

    fn extend(&mut self, indices: &[i64], n: usize) {
        let have = self.streams.get(indices).map(|s| s.len()).unwrap_or(0);
        if have > n {
            return;
        }
        let tail = &indices[1..];
        if !tail.is_empty() {
            self.extend(tail, n);
        }
        let a = indices[0];
        let w = a.unsigned_abs() as usize;
        let mut stream = self.streams.remove(indices).unwrap_or_else(|| vec![Rational::ZERO]);
        for i in stream.len()..=n {
            let tail_val = if tail.is_empty() {
                Rational::ONE
            } else {
                self.streams[tail][i].clone()
            };
            let mut term = tail_val / rational::pow(&rational::int(i as i64), w);
            if a < 0 && i % 2 == 1 {
                term = -term;
            }
            let next = &stream[i - 1] + term;
            stream.push(next);
        }
        self.streams.insert(indices.to_vec(), stream);
    }
}

/// Polynomial in eps from an expression (helper for eps-only inputs).
pub fn parse_eps_poly(src: &str) -> Result<Poly> {
    let b = parse_expr(src)?.to_bipoly(Var::X)?;
    if b.outer_deg0() > 0 {
        return Err(Error::parse(format!("'{src}'"), "expected a polynomial in ep only"));
    }
    Ok(b.coeff(0))
}
