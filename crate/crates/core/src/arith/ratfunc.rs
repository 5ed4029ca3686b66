//! Rational functions in (outer, eps).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::bipoly::BiPoly;
use super::poly::{Poly, Var};
use super::rational::Rational;
use crate::error::{Error, Result};

/// `num / den`, reduced by the bivariate gcd, with `den` normalized
/// (leading eps-coefficient of its leading outer coefficient is 1).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatFunc {
    num: BiPoly,
    den: BiPoly,
}

impl RatFunc {
    pub fn new(num: BiPoly, den: BiPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero("rational function with zero denominator".into()));
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: BiPoly, den: BiPoly) -> Self {
        let outer = den.outer();
        if num.is_zero() {
            return RatFunc {
                num: BiPoly::zero(outer),
                den: BiPoly::one(outer),
            };
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = if g.is_one() {
            (num, den)
        } else {
            (
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            )
        };
        let l = d.leading().leading();
        if !l.is_one() {
            let inv = Rational::ONE / l;
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        RatFunc { num: n, den: d }
    }

    pub fn from_poly(p: BiPoly) -> Self {
        let outer = p.outer();
        RatFunc {
            num: p,
            den: BiPoly::one(outer),
        }
    }

    pub fn zero(outer: Var) -> Self {
        Self::from_poly(BiPoly::zero(outer))
    }

    pub fn one(outer: Var) -> Self {
        Self::from_poly(BiPoly::one(outer))
    }

    pub fn constant(outer: Var, c: Rational) -> Self {
        Self::from_poly(BiPoly::constant(outer, c))
    }

    pub fn num(&self) -> &BiPoly {
        &self.num
    }

    pub fn den(&self) -> &BiPoly {
        &self.den
    }

    pub fn outer(&self) -> Var {
        self.den.outer()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// Sum of numerator and denominator total degrees; pivot-size measure.
    pub fn total_degree(&self) -> usize {
        self.num.total_degree() + self.den.total_degree()
    }

    pub fn inv(&self) -> Result<Self> {
        RatFunc::new(self.den.clone(), self.num.clone())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.outer());
        }
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    /// Derivative with respect to the outer variable.
    pub fn derivative(&self) -> Self {
        let n = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let d = &self.den * &self.den;
        Self::reduce(n, d)
    }

    /// Evaluate at an integer value of the outer variable, eps kept symbolic
    /// (only valid when the result is a polynomial in eps).
    pub fn eval_outer_int(&self, at: i64) -> Option<(Poly, Poly)> {
        let d = self.den.eval_outer_int(at);
        if d.is_zero() {
            return None;
        }
        Some((self.num.eval_outer_int(at), d))
    }

    /// Evaluate an eps-free rational function at an integer; `None` at a pole.
    pub fn eval_rational(&self, at: &Rational, eps: &Rational) -> Option<Rational> {
        let d = self.den.eval_eps(eps).eval(at);
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval_eps(eps).eval(at) / d)
    }

    /// `r(outer + h)`.
    pub fn shift_outer(&self, h: i64) -> Self {
        RatFunc {
            num: self.num.shift_outer(h),
            den: self.den.shift_outer(h),
        }
    }
}

impl Add for &RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return RatFunc::reduce(&self.num + &rhs.num, self.den.clone());
        }
        RatFunc::reduce(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &RatFunc) -> RatFunc {
        self + &(-rhs)
    }
}

impl Neg for &RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &RatFunc) -> RatFunc {
        if self.is_zero() || rhs.is_zero() {
            return RatFunc::zero(self.outer());
        }
        RatFunc::reduce(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Div for &RatFunc {
    type Output = Result<RatFunc>;
    fn div(self, rhs: &RatFunc) -> Result<RatFunc> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero("rational function divided by zero".into()));
        }
        Ok(RatFunc::reduce(&self.num * &rhs.den, &self.den * &rhs.num))
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::int;

    fn bp(terms: &[(usize, usize, i64)]) -> BiPoly {
        BiPoly::from_terms(
            Var::X,
            &terms
                .iter()
                .map(|&(a, b, c)| (a, b, int(c)))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn reduces_and_normalizes() {
        // (x^2 - 1) / (2x - 2) = (x + 1)/2
        let r = RatFunc::new(bp(&[(2, 0, 1), (0, 0, -1)]), bp(&[(1, 0, 2), (0, 0, -2)])).unwrap();
        assert!(r.is_polynomial());
        assert_eq!(r.num(), &bp(&[(1, 0, 1), (0, 0, 1)]).scale(&crate::arith::rational::frac(1, 2)));
        assert!(RatFunc::new(bp(&[(0, 0, 1)]), BiPoly::zero(Var::X)).is_err());
    }

    #[test]
    fn field_ops() {
        let a = RatFunc::new(bp(&[(0, 0, 1)]), bp(&[(1, 0, -1), (0, 0, 1)])).unwrap();
        let b = RatFunc::new(bp(&[(0, 1, 1)]), bp(&[(1, 0, 1), (0, 1, 1)])).unwrap();
        let s = &(&a + &b) - &b;
        assert_eq!(s, a);
        let q = (&(&a * &b) / &b).unwrap();
        assert_eq!(q, a);
        // d/dx 1/(1-x) = 1/(1-x)^2
        let d = a.derivative();
        assert_eq!(d, &a * &a);
    }
}
