//! Dense univariate polynomials over the rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use dashu::base::UnsignedAbs;
use dashu::integer::IBig;
use serde::{Deserialize, Serialize};

use super::rational::{self, Rational};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    X,
    N,
    Eps,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::N => "n",
            Var::Eps => "ep",
        }
    }
}

/// Dense polynomial, coefficients by ascending degree, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    var: Var,
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn zero(var: Var) -> Self {
        Poly {
            var,
            coeffs: Vec::new(),
        }
    }

    pub fn one(var: Var) -> Self {
        Self::constant(var, Rational::ONE)
    }

    pub fn constant(var: Var, c: Rational) -> Self {
        Self::new(var, vec![c])
    }

    /// The polynomial `var`.
    pub fn var(var: Var) -> Self {
        Self::monomial(var, Rational::ONE, 1)
    }

    pub fn monomial(var: Var, c: Rational, degree: usize) -> Self {
        let mut coeffs = vec![Rational::ZERO; degree + 1];
        coeffs[degree] = c;
        Self::new(var, coeffs)
    }

    pub fn new(var: Var, mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { var, coeffs }
    }

    pub fn from_ints(var: Var, coeffs: &[i64]) -> Self {
        Self::new(var, coeffs.iter().map(|&c| rational::int(c)).collect())
    }

    /// Product of `(var - r)` over the given roots.
    pub fn from_roots(var: Var, roots: &[i64]) -> Self {
        roots.iter().fold(Self::one(var), |acc, &r| {
            &acc * &Self::from_ints(var, &[-r, 1])
        })
    }

    pub fn variable(&self) -> Var {
        self.var
    }

    pub fn with_var(mut self, var: Var) -> Self {
        self.var = var;
        self
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Rational> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial mapped to 0.
    pub fn deg0(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or(Rational::ZERO)
    }

    pub fn coeff_ref(&self, i: usize) -> Option<&Rational> {
        self.coeffs.get(i)
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or(Rational::ZERO)
    }

    /// Index of the lowest nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn eval(&self, at: &Rational) -> Rational {
        let mut acc = Rational::ZERO;
        for c in self.coeffs.iter().rev() {
            acc = &acc * at + c;
        }
        acc
    }

    pub fn eval_int(&self, at: i64) -> Rational {
        self.eval(&rational::int(at))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.var);
        }
        Poly {
            var: self.var,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Multiply by `var^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![Rational::ZERO; k];
        coeffs.extend(self.coeffs.iter().cloned());
        Poly {
            var: self.var,
            coeffs,
        }
    }

    /// Divide by `var^k`, dropping the low coefficients (exact only when they vanish).
    pub fn shift_down(&self, k: usize) -> Self {
        Self::new(self.var, self.coeffs.iter().skip(k).cloned().collect())
    }

    pub fn truncate(&self, len: usize) -> Self {
        Self::new(self.var, self.coeffs.iter().take(len).cloned().collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.var,
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * rational::int(i as i64))
                .collect(),
        )
    }

    /// `p(var + h)`.
    pub fn shift_arg(&self, h: &Rational) -> Self {
        // Horner in the ring: acc = acc*(var+h) + c
        let lin = Poly::new(self.var, vec![h.clone(), Rational::ONE]);
        let mut acc = Poly::zero(self.var);
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &lin) + &Poly::constant(self.var, c.clone());
        }
        acc
    }

    pub fn shift_arg_int(&self, h: i64) -> Self {
        self.shift_arg(&rational::int(h))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = Rational::ONE / self.leading();
        self.scale(&inv)
    }

    pub fn div_rem(&self, divisor: &Poly) -> Result<(Poly, Poly)> {
        let dd = divisor
            .degree()
            .ok_or_else(|| Error::DivisionByZero("polynomial division by zero".into()))?;
        let lead_inv = Rational::ONE / divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Poly::zero(self.var), self.clone()));
        }
        let mut quot = vec![Rational::ZERO; rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let c = &rem[i + dd] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= &c * dc;
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        Ok((Poly::new(self.var, quot), Poly::new(self.var, rem)))
    }

    /// Exact quotient, `None` if the division leaves a remainder.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(divisor).ok()?;
        r.is_zero().then_some(q)
    }

    /// Monic gcd; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let prim = |p: &Poly| {
            Poly::new(
                p.var,
                p.primitive_integer().into_iter().map(Rational::from).collect(),
            )
        };
        let mut a = prim(self);
        let mut b = prim(other);
        while !b.is_zero() {
            if b.is_constant() {
                return Poly::one(self.var);
            }
            let (_, r) = a.div_rem(&b).expect("nonzero divisor");
            a = b;
            // primitive remainders keep the coefficients small
            b = prim(&r);
        }
        a.monic()
    }

    /// Integer multiple with content 1 and positive leading coefficient.
    pub fn primitive_integer(&self) -> Vec<IBig> {
        if self.is_zero() {
            return Vec::new();
        }
        let l = rational::denominator_lcm(self.coeffs.iter());
        let lr = Rational::from(IBig::from(l));
        let ints: Vec<IBig> = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c * &lr;
                v.numerator().clone()
            })
            .collect();
        let g = IBig::from(rational::integer_content(ints.iter()));
        let sign_neg = ints.last().map(|c| c < &IBig::ZERO).unwrap_or(false);
        ints.into_iter()
            .map(|c| {
                let q = c / &g;
                if sign_neg {
                    -q
                } else {
                    q
                }
            })
            .collect()
    }

    pub fn pow(&self, e: usize) -> Poly {
        let mut acc = Poly::one(self.var);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Falling-factorial style product `(n + lo)(n + lo + 1)...(n + hi)` in `var`; empty product is 1.
    pub fn rising_range(var: Var, lo: i64, hi: i64) -> Poly {
        let mut acc = Poly::one(var);
        let mut k = lo;
        while k <= hi {
            acc = &acc * &Poly::from_ints(var, &[k, 1]);
            k += 1;
        }
        acc
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(match (self.coeffs.get(i), rhs.coeffs.get(i)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        Poly::new(pick_var(self, rhs), out)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            var: self.var,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero(pick_var(self, rhs));
        }
        let mut out = vec![Rational::ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(pick_var(self, rhs), out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

fn pick_var(a: &Poly, b: &Poly) -> Var {
    debug_assert!(
        a.var == b.var || a.is_constant() || b.is_constant(),
        "mixing {:?} and {:?}",
        a.var,
        b.var
    );
    if a.is_constant() {
        b.var
    } else {
        a.var
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_univariate(f, &self.coeffs, self.var.name())
    }
}

pub(crate) fn write_univariate(
    f: &mut fmt::Formatter<'_>,
    coeffs: &[Rational],
    name: &str,
) -> fmt::Result {
    let mut first = true;
    for (i, c) in coeffs.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let neg = rational::is_negative(c);
        let a = rational::abs(c);
        if first {
            if neg {
                write!(f, "-")?;
            }
        } else {
            write!(f, "{}", if neg { " - " } else { " + " })?;
        }
        first = false;
        let mono = match i {
            0 => String::new(),
            1 => name.to_string(),
            _ => format!("{name}^{i}"),
        };
        if mono.is_empty() {
            write!(f, "{}", rational::format_rational(&a))?;
        } else if a.is_one() {
            write!(f, "{mono}")?;
        } else {
            write!(f, "{}*{mono}", rational::format_rational(&a))?;
        }
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

/// Monic gcd of a family; errors when every member is zero.
pub fn poly_content(polys: &[Poly]) -> Result<Poly> {
    let var = polys.first().map(|p| p.var).unwrap_or(Var::X);
    let mut g = Poly::zero(var);
    for p in polys {
        g = g.gcd(p);
        if g.is_one() {
            break;
        }
    }
    if g.is_zero() {
        return Err(Error::Degenerate(
            "all coefficients vanish (degenerate ODE)".into(),
        ));
    }
    Ok(g)
}

/// All nonnegative integer roots, ascending.
pub fn nonnegative_integer_roots(p: &Poly) -> Result<Vec<u64>> {
    if p.is_zero() {
        return Err(Error::Degenerate("zero polynomial has every root".into()));
    }
    let mut roots = Vec::new();
    let val = p.valuation().unwrap_or(0);
    if val > 0 {
        roots.push(0);
    }
    let q = p.shift_down(val);
    if q.is_constant() {
        return Ok(roots);
    }
    let ints = q.primitive_integer();
    let c0 = (&ints[0]).unsigned_abs();
    // Cauchy bound: 1 + max |a_i / a_d|.
    let lead = ints.last().unwrap().unsigned_abs();
    let mut max_ratio = dashu::integer::UBig::ZERO;
    for c in &ints[..ints.len() - 1] {
        let r = (c.unsigned_abs() + &lead - dashu::integer::UBig::ONE) / &lead;
        if r > max_ratio {
            max_ratio = r;
        }
    }
    let bound = max_ratio + dashu::integer::UBig::ONE;
    let limit = if c0 < bound { c0 } else { bound };
    let limit: u64 = u64::try_from(&limit).map_err(|_| {
        Error::InvalidArgument("integer-root search bound exceeds u64".into())
    })?;
    let c0_small = u64::try_from((&ints[0]).unsigned_abs()).ok();
    for m in 1..=limit {
        if let Some(c) = c0_small {
            if c % m != 0 {
                continue;
            }
        } else if ((&ints[0]).unsigned_abs() % m) != 0 {
            continue;
        }
        let v = eval_int_poly(&ints, m);
        if v.is_zero() {
            roots.push(m);
        }
    }
    Ok(roots)
}

fn eval_int_poly(coeffs: &[IBig], at: u64) -> IBig {
    let x = IBig::from(at);
    let mut acc = IBig::ZERO;
    for c in coeffs.iter().rev() {
        acc = acc * &x + c;
    }
    acc
}

/// Smallest `delta` with `p(n) != 0` for all integers `n >= delta`.
pub fn start_index_delta(leading: &Poly) -> Result<usize> {
    let roots = nonnegative_integer_roots(leading)?;
    Ok(roots.last().map(|&r| r as usize + 1).unwrap_or(0))
}
