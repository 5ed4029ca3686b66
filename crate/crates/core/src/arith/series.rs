//! Truncated Laurent series in eps.
//!
//! A series with window `[l, r]` knows its coefficients for orders `l..=r`
//! exactly; orders below `l` are zero and orders above `r` are unknown.
//! Every operation returns only the window it can vouch for.

use std::fmt;

use super::poly::{Poly, Var};
use super::rational::{self, Rational};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EpsSeries {
    low: i64,
    coeffs: Vec<Rational>,
}

impl EpsSeries {
    /// Coefficients for orders `low, low+1, ...`; at least one coefficient.
    pub fn new(low: i64, coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "eps window must be nonempty");
        EpsSeries { low, coeffs }
    }

    /// The zero series known on `[low, high]`.
    pub fn zero(low: i64, high: i64) -> Self {
        assert!(low <= high);
        Self::new(low, vec![Rational::ZERO; (high - low + 1) as usize])
    }

    /// A constant known on `[0, high]` (or `[high, high]` when `high < 0`, i.e. zero there).
    pub fn constant(c: Rational, high: i64) -> Self {
        if high < 0 {
            return Self::zero(high, high);
        }
        let mut coeffs = vec![Rational::ZERO; high as usize + 1];
        coeffs[0] = c;
        Self::new(0, coeffs)
    }

    /// Polynomial in eps, known on `[0, high]`.
    pub fn from_poly(p: &Poly, high: i64) -> Self {
        if high < 0 {
            return Self::zero(high, high);
        }
        Self::new(0, (0..=high as usize).map(|i| p.coeff(i)).collect())
    }

    pub fn low(&self) -> i64 {
        self.low
    }

    pub fn high(&self) -> i64 {
        self.low + self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Coefficient of `eps^k`; zero below the window, `None` above it.
    pub fn coeff(&self, k: i64) -> Option<Rational> {
        if k < self.low {
            Some(Rational::ZERO)
        } else if k > self.high() {
            None
        } else {
            Some(self.coeffs[(k - self.low) as usize].clone())
        }
    }

    /// Order of the first nonzero coefficient inside the window.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| self.low + i as i64)
    }

    pub fn is_zero_window(&self) -> bool {
        self.valuation().is_none()
    }

    /// Restrict to `[low, high]`; fails when asking above the known window.
    pub fn restrict(&self, low: i64, high: i64) -> Result<Self> {
        if high > self.high() {
            return Err(Error::WindowShortfall {
                what: "eps series".into(),
                needed: high,
                available: self.high(),
            });
        }
        Ok(Self::new(
            low,
            (low..=high).map(|k| self.coeff(k).unwrap()).collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Self {
        let low = self.low.min(other.low);
        let high = self.high().min(other.high());
        Self::new(
            low,
            (low..=high)
                .map(|k| self.coeff(k).unwrap() + other.coeff(k).unwrap())
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        Self::new(self.low, self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.low, self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let low = self.low + other.low;
        let high = (self.high() + other.low).min(other.high() + self.low);
        let len = (high - low + 1) as usize;
        let mut out = vec![Rational::ZERO; len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(len - i) {
                out[i + j] += a * b;
            }
        }
        Self::new(low, out)
    }

    /// Multiply by a polynomial in eps (exact, so the window length is kept).
    pub fn mul_poly(&self, p: &Poly) -> Self {
        if p.is_zero() {
            return Self::zero(self.low, self.high());
        }
        let v = p.valuation().unwrap() as i64;
        let mut out = vec![Rational::ZERO; self.coeffs.len()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, pc) in p.coeffs().iter().enumerate().skip(v as usize) {
                let src = i as i64 - (j as i64 - v);
                if src < 0 {
                    break;
                }
                *o += pc * &self.coeffs[src as usize];
            }
        }
        Self::new(self.low + v, out)
    }

    /// Truncated Laurent division. The result's lowest order is
    /// `self.low - val(other)`; its precision is the smaller of the two
    /// operands' relative precisions.
    pub fn div(&self, other: &Self) -> Result<Self> {
        let vb = other
            .valuation()
            .ok_or_else(|| Error::DivisionByZero("eps series with zero window".into()))?;
        let b: Vec<Rational> = (vb..=other.high())
            .map(|k| other.coeff(k).unwrap())
            .collect();
        let len = (self.coeffs.len()).min(b.len());
        let inv_b0 = Rational::ONE / &b[0];
        let mut out: Vec<Rational> = Vec::with_capacity(len);
        for i in 0..len {
            let mut acc = self.coeffs[i].clone();
            for j in 1..=i {
                if j < b.len() {
                    acc -= &b[j] * &out[i - j];
                }
            }
            out.push(acc * &inv_b0);
        }
        Ok(Self::new(self.low - vb, out))
    }

    /// Multiply by `eps^u` (u may be negative).
    pub fn shift(&self, u: i64) -> Self {
        Self::new(self.low + u, self.coeffs.clone())
    }

    /// `1 / p(eps)` known up to order `high`.
    pub fn inverse_of_poly(p: &Poly, high: i64) -> Result<Self> {
        let v = p
            .valuation()
            .ok_or_else(|| Error::DivisionByZero("inverse of zero polynomial".into()))?;
        let v = v as i64;
        let span = (high + v).max(0);
        let num = Self::constant(Rational::ONE, span);
        let den = Self::from_poly(p, span + v);
        num.div(&den)
    }
}

impl fmt::Display for EpsSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = self.low + i as i64;
            let mono = match k {
                0 => String::new(),
                1 => "*ep".into(),
                _ => format!("*ep^{k}"),
            };
            parts.push(format!("{}{}", rational::format_rational(c), mono));
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        write!(f, "{} + O(ep^{})", parts.join(" + "), self.high() + 1)
    }
}

/// Convenience: the eps polynomial as a plain `Poly` (helper for tests and callers).
pub fn eps_poly(coeffs: &[i64]) -> Poly {
    Poly::from_ints(Var::Eps, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::int;

    fn s(low: i64, c: &[i64]) -> EpsSeries {
        EpsSeries::new(low, c.iter().map(|&v| int(v)).collect())
    }

    #[test]
    fn monomial_shift_and_mul() {
        // (eps^-1 + 1) * eps = 1 + eps
        let a = s(-1, &[1, 1]);
        let eps = s(1, &[1, 0]);
        let p = a.mul(&eps);
        assert_eq!(p.low(), 0);
        assert_eq!(p.coeff(0).unwrap(), int(1));
        assert_eq!(p.coeff(1).unwrap(), int(1));
        let sh = s(0, &[1, 1]).shift(-2);
        assert_eq!((sh.low(), sh.high()), (-2, -1));
        assert_eq!(sh.coeffs(), &[int(1), int(1)]);
    }

    #[test]
    fn geometric_series() {
        // oracle: 1/(1-eps) = sum eps^k
        let one = EpsSeries::constant(int(1), 3);
        let den = s(0, &[1, -1, 0, 0]);
        let q = one.div(&den).unwrap();
        assert_eq!(q, s(0, &[1, 1, 1, 1]));
        let inv = EpsSeries::inverse_of_poly(&eps_poly(&[1, -1]), 3).unwrap();
        assert_eq!(inv, s(0, &[1, 1, 1, 1]));
    }

    #[test]
    fn division_lowers_order() {
        let a = s(0, &[1, 2, 3]);
        let b = s(0, &[0, 2, 1]); // 2 eps + eps^2, relative precision 1
        let q = a.div(&b).unwrap();
        assert_eq!(q.low(), -1);
        assert_eq!(q.high(), 0);
        assert!(s(0, &[0, 0]).div(&a).is_ok());
        assert!(a.div(&s(0, &[0, 0])).is_err());
    }
}
