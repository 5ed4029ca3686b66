//! Thin helpers around the arbitrary-precision rationals.

use dashu::base::{Sign, UnsignedAbs};
use dashu::integer::{IBig, UBig};
use dashu::rational::RBig;

use crate::error::{Error, Result};

/// Exact rational number, always stored reduced with a positive denominator.
pub type Rational = RBig;

/// Arbitrary-precision integer.
pub type Integer = IBig;

pub fn int(v: i64) -> Rational {
    Rational::from(v)
}

pub fn frac(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    let r = Rational::from_parts(IBig::from(num), UBig::from(den.unsigned_abs()));
    if den < 0 {
        -r
    } else {
        r
    }
}

pub fn from_integer(v: IBig) -> Rational {
    Rational::from(v)
}

pub fn is_negative(r: &Rational) -> bool {
    r.sign() == Sign::Negative && !r.is_zero()
}

pub fn abs(r: &Rational) -> Rational {
    if is_negative(r) {
        -r.clone()
    } else {
        r.clone()
    }
}

pub fn is_integer(r: &Rational) -> bool {
    r.denominator().is_one()
}

/// `p/q`, or `p` when `q = 1`.
pub fn format_rational(r: &Rational) -> String {
    if r.denominator().is_one() {
        r.numerator().to_string()
    } else {
        format!("{}/{}", r.numerator(), r.denominator())
    }
}

pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::parse(format!("'{t}'"), "expected an integer or p/q");
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (t, None),
    };
    let n: IBig = num.parse().map_err(|_| bad())?;
    match den {
        None => Ok(Rational::from(n)),
        Some(d) => {
            let d: IBig = d.parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::parse(format!("'{t}'"), "zero denominator"));
            }
            let neg = d.sign() == Sign::Negative;
            let r = Rational::from_parts(n, d.unsigned_abs());
            Ok(if neg { -r } else { r })
        }
    }
}

pub fn pow(base: &Rational, exp: usize) -> Rational {
    let mut acc = Rational::ONE;
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &b;
        }
        e >>= 1;
        if e > 0 {
            b = &b * &b;
        }
    }
    acc
}

/// lcm of the denominators of a slice of rationals.
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> UBig {
    use dashu::base::Gcd;
    let mut acc = UBig::ONE;
    for v in values {
        let d = v.denominator();
        if d.is_one() {
            continue;
        }
        let g = (&acc).gcd(d);
        acc = &acc / &g * d;
    }
    acc
}

/// gcd of the numerators of a slice of integers (non-negative result).
pub fn integer_content<'a>(values: impl IntoIterator<Item = &'a IBig>) -> UBig {
    use dashu::base::Gcd;
    let mut acc = UBig::ZERO;
    for v in values {
        if v.is_zero() {
            continue;
        }
        acc = if acc.is_zero() {
            v.unsigned_abs()
        } else {
            (&acc).gcd(&v.unsigned_abs())
        };
    }
    acc
}
