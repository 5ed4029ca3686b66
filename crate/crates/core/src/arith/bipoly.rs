//! Polynomials in an outer variable (x or n) with coefficients in Q[eps].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::poly::{Poly, Var};
use super::rational::{self, Rational};

/// Dense by ascending outer degree; each coefficient is a polynomial in eps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BiPoly {
    outer: Var,
    coeffs: Vec<Poly>,
}

impl BiPoly {
    pub fn zero(outer: Var) -> Self {
        BiPoly {
            outer,
            coeffs: Vec::new(),
        }
    }

    pub fn one(outer: Var) -> Self {
        Self::constant(outer, Rational::ONE)
    }

    pub fn constant(outer: Var, c: Rational) -> Self {
        Self::new(outer, vec![Poly::constant(Var::Eps, c)])
    }

    pub fn new(outer: Var, mut coeffs: Vec<Poly>) -> Self {
        debug_assert!(outer != Var::Eps);
        for c in coeffs.iter_mut() {
            if c.variable() != Var::Eps {
                *c = std::mem::replace(c, Poly::zero(Var::Eps)).with_var(Var::Eps);
            }
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        BiPoly { outer, coeffs }
    }

    /// Outer variable itself.
    pub fn var(outer: Var) -> Self {
        Self::from_outer(&Poly::var(outer))
    }

    pub fn eps(outer: Var) -> Self {
        Self::from_eps(outer, &Poly::var(Var::Eps))
    }

    /// Lift an eps-free polynomial in the outer variable.
    pub fn from_outer(p: &Poly) -> Self {
        Self::new(
            p.variable(),
            p.coeffs()
                .iter()
                .map(|c| Poly::constant(Var::Eps, c.clone()))
                .collect(),
        )
    }

    /// Lift a polynomial in eps (constant in the outer variable).
    pub fn from_eps(outer: Var, p: &Poly) -> Self {
        Self::new(outer, vec![p.clone().with_var(Var::Eps)])
    }

    /// From `(outer_degree, eps_degree, coefficient)` triples.
    pub fn from_terms(outer: Var, terms: &[(usize, usize, Rational)]) -> Self {
        let mut out = Self::zero(outer);
        for (a, b, c) in terms {
            out = &out + &Self::monomial(outer, c.clone(), *a, *b);
        }
        out
    }

    pub fn monomial(outer: Var, c: Rational, outer_deg: usize, eps_deg: usize) -> Self {
        let mut coeffs = vec![Poly::zero(Var::Eps); outer_deg + 1];
        coeffs[outer_deg] = Poly::monomial(Var::Eps, c, eps_deg);
        Self::new(outer, coeffs)
    }

    pub fn outer(&self) -> Var {
        self.outer
    }

    pub fn with_outer(mut self, outer: Var) -> Self {
        self.outer = outer;
        self
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    /// Coefficient of `outer^i` as a polynomial in eps.
    pub fn coeff(&self, i: usize) -> Poly {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| Poly::zero(Var::Eps))
    }

    /// Coefficient of `outer^a eps^b`.
    pub fn term(&self, a: usize, b: usize) -> Rational {
        self.coeffs
            .get(a)
            .map(|p| p.coeff(b))
            .unwrap_or(Rational::ZERO)
    }

    /// Nonzero terms as `(outer_degree, eps_degree, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &Rational)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(a, p)| {
            p.coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(move |(b, c)| (a, b, c))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Constant in both variables.
    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1 && self.coeffs.first().is_none_or(|c| c.is_constant())
    }

    pub fn outer_degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn outer_deg0(&self) -> usize {
        self.outer_degree().unwrap_or(0)
    }

    pub fn eps_degree(&self) -> Option<usize> {
        self.coeffs.iter().filter_map(|c| c.degree()).max()
    }

    pub fn total_degree(&self) -> usize {
        self.terms().map(|(a, b, _)| a + b).max().unwrap_or(0)
    }

    /// Leading outer coefficient (a polynomial in eps).
    pub fn leading(&self) -> Poly {
        self.coeffs
            .last()
            .cloned()
            .unwrap_or_else(|| Poly::zero(Var::Eps))
    }

    /// Smallest eps power present; `None` for zero.
    pub fn eps_valuation(&self) -> Option<usize> {
        self.coeffs.iter().filter_map(|c| c.valuation()).min()
    }

    /// Smallest outer power present; `None` for zero.
    pub fn outer_valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// Divide by `eps^u` (drops lower terms; exact when `u <= eps_valuation`).
    pub fn div_eps_pow(&self, u: usize) -> Self {
        Self::new(
            self.outer,
            self.coeffs.iter().map(|c| c.shift_down(u)).collect(),
        )
    }

    pub fn mul_eps_pow(&self, u: usize) -> Self {
        Self::new(
            self.outer,
            self.coeffs.iter().map(|c| c.shift_up(u)).collect(),
        )
    }

    /// Divide by `outer^k` (drops lower terms).
    pub fn div_outer_pow(&self, k: usize) -> Self {
        Self::new(self.outer, self.coeffs.iter().skip(k).cloned().collect())
    }

    pub fn mul_outer_pow(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![Poly::zero(Var::Eps); k];
        coeffs.extend(self.coeffs.iter().cloned());
        Self::new(self.outer, coeffs)
    }

    /// The eps = 0 specialization, a polynomial in the outer variable.
    pub fn at_eps_zero(&self) -> Poly {
        Poly::new(self.outer, self.coeffs.iter().map(|c| c.coeff(0)).collect())
    }

    /// The coefficient of `eps^b`, a polynomial in the outer variable.
    pub fn eps_coeff(&self, b: usize) -> Poly {
        Poly::new(self.outer, self.coeffs.iter().map(|c| c.coeff(b)).collect())
    }

    pub fn eval_eps(&self, e: &Rational) -> Poly {
        Poly::new(self.outer, self.coeffs.iter().map(|c| c.eval(e)).collect())
    }

    /// Evaluate the outer variable, leaving a polynomial in eps.
    pub fn eval_outer(&self, at: &Rational) -> Poly {
        let mut acc = Poly::zero(Var::Eps);
        for c in self.coeffs.iter().rev() {
            acc = &acc.scale(at) + c;
        }
        acc
    }

    pub fn eval_outer_int(&self, at: i64) -> Poly {
        self.eval_outer(&rational::int(at))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.outer, self.coeffs.iter().map(|p| p.scale(c)).collect())
    }

    pub fn scale_eps_poly(&self, c: &Poly) -> Self {
        Self::new(self.outer, self.coeffs.iter().map(|p| p * c).collect())
    }

    /// Derivative with respect to the outer variable.
    pub fn derivative(&self) -> Self {
        Self::new(
            self.outer,
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.scale(&rational::int(i as i64)))
                .collect(),
        )
    }

    /// `p(outer + h, eps)`.
    pub fn shift_outer(&self, h: i64) -> Self {
        let lin = BiPoly::from_outer(&Poly::from_ints(self.outer, &[h, 1]));
        let mut acc = BiPoly::zero(self.outer);
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &lin) + &BiPoly::from_eps(self.outer, c);
        }
        acc
    }

    /// gcd of the eps-coefficients (monic in eps), the content over Q[eps].
    pub fn eps_content(&self) -> Poly {
        let mut g = Poly::zero(Var::Eps);
        for c in &self.coeffs {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Exact division by a polynomial in eps; `None` if not exact.
    pub fn div_eps_poly(&self, d: &Poly) -> Option<Self> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            out.push(c.div_exact(d)?);
        }
        Some(Self::new(self.outer, out))
    }

    /// Pseudo-remainder of `self` by `d` with respect to the outer variable.
    fn pseudo_rem(&self, d: &BiPoly) -> BiPoly {
        let dd = d.outer_degree().expect("nonzero divisor");
        let lc = d.leading();
        let mut r = self.clone();
        while let Some(rd) = r.outer_degree() {
            if rd < dd {
                break;
            }
            let rl = r.leading();
            // r = lc*r - rl * outer^(rd-dd) * d
            let t = d.scale_eps_poly(&rl).mul_outer_pow(rd - dd);
            r = &r.scale_eps_poly(&lc) - &t;
        }
        r
    }

    /// Primitive part over Q[eps] (divide by eps-content).
    pub fn primitive_part(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let c = self.eps_content();
        self.div_eps_poly(&c).expect("content divides")
    }

    /// Normalize so the leading eps coefficient of the leading outer coefficient is 1.
    pub fn normalized(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.leading().leading();
        self.scale(&(Rational::ONE / l))
    }

    /// Normalized gcd in Q[outer, eps]; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &BiPoly) -> BiPoly {
        if self.is_zero() {
            return other.normalized();
        }
        if other.is_zero() {
            return self.normalized();
        }
        let ca = self.eps_content();
        let cb = other.eps_content();
        let c = ca.gcd(&cb);
        let a = self.div_eps_poly(&ca).unwrap();
        let b = other.div_eps_poly(&cb).unwrap();
        let g = if a.outer_deg0() == 0 || b.outer_deg0() == 0 {
            BiPoly::one(self.outer)
        } else {
            gcd_by_interpolation(&a, &b).unwrap_or_else(|| gcd_prs(a, b))
        };
        g.scale_eps_poly(&c).normalized()
    }

    /// Exact division; `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &BiPoly) -> Option<BiPoly> {
        let dd = d.outer_degree()?;
        let lc = d.leading();
        let mut r = self.clone();
        let mut q = BiPoly::zero(self.outer);
        while let Some(rd) = r.outer_degree() {
            if rd < dd {
                return None;
            }
            let c = r.leading().div_exact(&lc)?;
            let t = BiPoly::from_eps(self.outer, &c).mul_outer_pow(rd - dd);
            r = &r - &(&t * d);
            q = &q + &t;
        }
        Some(q)
    }

    /// Rational content (gcd of all numerators over lcm of denominators) made 1, sign kept.
    pub fn rational_primitive(&self) -> (Rational, BiPoly) {
        if self.is_zero() {
            return (Rational::ONE, self.clone());
        }
        let all: Vec<Rational> = self.terms().map(|(_, _, c)| c.clone()).collect();
        let l = rational::denominator_lcm(all.iter());
        let lr = Rational::from(dashu::integer::IBig::from(l));
        let nums: Vec<dashu::integer::IBig> =
            all.iter().map(|c| (c * &lr).numerator().clone()).collect();
        let g = rational::integer_content(nums.iter());
        let factor = Rational::from(dashu::integer::IBig::from(g)) / lr;
        (factor.clone(), self.scale(&(Rational::ONE / factor)))
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, rhs: &BiPoly) -> BiPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let outer = if self.is_zero() { rhs.outer } else { self.outer };
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(match (self.coeffs.get(i), rhs.coeffs.get(i)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        BiPoly::new(outer, out)
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: &BiPoly) -> BiPoly {
        self + &(-rhs)
    }
}

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        BiPoly {
            outer: self.outer,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let outer = if self.is_constant() { rhs.outer } else { self.outer };
        if self.is_zero() || rhs.is_zero() {
            return BiPoly::zero(outer);
        }
        let mut out = vec![Poly::zero(Var::Eps); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        BiPoly::new(outer, out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for BiPoly {
            type Output = BiPoly;
            fn $m(self, rhs: BiPoly) -> BiPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Primitive remainder sequence for eps-primitive inputs. Exact but its
/// intermediate eps-degrees grow quickly; used only as a fallback.
fn gcd_prs(mut a: BiPoly, mut b: BiPoly) -> BiPoly {
    if a.outer_deg0() < b.outer_deg0() {
        std::mem::swap(&mut a, &mut b);
    }
    while !b.is_zero() {
        let r = a.pseudo_rem(&b);
        a = b;
        b = r.primitive_part().rational_primitive().1;
    }
    if a.outer_deg0() == 0 {
        BiPoly::one(a.outer)
    } else {
        a.primitive_part()
    }
}

/// Brown-style gcd of eps-primitive inputs with positive outer degree:
/// univariate gcds at integer values of eps, scaled by the gcd of the
/// leading coefficients and interpolated, then checked by division.
/// A coprime image at a point keeping both leading coefficients proves
/// that no factor involving the outer variable is shared.
fn gcd_by_interpolation(a: &BiPoly, b: &BiPoly) -> Option<BiPoly> {
    let (la, lb) = (a.leading(), b.leading());
    let gamma = la.gcd(&lb);
    let bound = gamma.degree().unwrap_or(0)
        + a.eps_degree().unwrap_or(0).min(b.eps_degree().unwrap_or(0));
    let mut best: Option<usize> = None;
    let mut pts: Vec<(Rational, Poly)> = Vec::new();
    for t in 0..(2 * bound as i64 + 64) {
        let e = Rational::from(if t % 2 == 0 { t / 2 } else { -(t + 1) / 2 });
        if la.eval(&e).is_zero() || lb.eval(&e).is_zero() {
            continue;
        }
        let g = a.eval_eps(&e).gcd(&b.eval_eps(&e));
        let d = g.degree().unwrap_or(0);
        if d == 0 {
            return Some(BiPoly::one(a.outer));
        }
        match best {
            Some(bd) if d > bd => continue,
            Some(bd) if d == bd => {}
            _ => {
                best = Some(d);
                pts.clear();
            }
        }
        pts.push((e.clone(), g.scale(&gamma.eval(&e))));
        if pts.len() > bound {
            let coeffs = (0..=d)
                .map(|i| {
                    let vals: Vec<(Rational, Rational)> =
                        pts.iter().map(|(x, p)| (x.clone(), p.coeff(i))).collect();
                    interpolate(&vals)
                })
                .collect();
            let cand = BiPoly::new(a.outer, coeffs).primitive_part();
            if a.div_exact(&cand).is_some() && b.div_exact(&cand).is_some() {
                return Some(cand);
            }
        }
    }
    None
}

/// Polynomial in eps through the given points (Newton form).
fn interpolate(pts: &[(Rational, Rational)]) -> Poly {
    let n = pts.len();
    let mut dd: Vec<Rational> = pts.iter().map(|(_, y)| y.clone()).collect();
    for j in 1..n {
        for i in (j..n).rev() {
            dd[i] = (&dd[i] - &dd[i - 1]) / (&pts[i].0 - &pts[i - j].0);
        }
    }
    let mut acc = Poly::constant(Var::Eps, dd[n - 1].clone());
    for i in (0..n - 1).rev() {
        let lin = Poly::new(Var::Eps, vec![-pts[i].0.clone(), Rational::ONE]);
        acc = &(&acc * &lin) + &Poly::constant(Var::Eps, dd[i].clone());
    }
    acc
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let o = self.outer.name();
        for (a, p) in self.coeffs.iter().enumerate().rev() {
            for (b, c) in p.coeffs().iter().enumerate().rev() {
                if c.is_zero() {
                    continue;
                }
                let neg = rational::is_negative(c);
                let abs = rational::abs(c);
                if first {
                    if neg {
                        write!(f, "-")?;
                    }
                } else {
                    write!(f, "{}", if neg { " - " } else { " + " })?;
                }
                first = false;
                let mut parts = Vec::new();
                if !abs.is_one() || (a == 0 && b == 0) {
                    parts.push(rational::format_rational(&abs));
                }
                match a {
                    0 => {}
                    1 => parts.push(o.to_string()),
                    _ => parts.push(format!("{o}^{a}")),
                }
                match b {
                    0 => {}
                    1 => parts.push("ep".to_string()),
                    _ => parts.push(format!("ep^{b}")),
                }
                write!(f, "{}", parts.join("*"))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
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
    fn gcd_bivariate() {
        // (x + ep) * (x - 1) and (x + ep) * (ep*x + 2)
        let g = bp(&[(1, 0, 1), (0, 1, 1)]);
        let a = &g * &bp(&[(1, 0, 1), (0, 0, -1)]);
        let b = &g * &bp(&[(1, 1, 1), (0, 0, 2)]);
        assert_eq!(a.gcd(&b), g.normalized());
        // pure eps content
        let e = bp(&[(0, 1, 1)]);
        let a2 = &e * &bp(&[(1, 0, 1), (0, 0, 3)]);
        let b2 = &e * &bp(&[(2, 0, 1)]);
        assert_eq!(a2.gcd(&b2), e);
        assert!(bp(&[(1, 0, 1)]).gcd(&bp(&[(0, 0, 5)])).is_one());
    }

    #[test]
    fn interpolation_agrees_with_prs() {
        // leading coefficients vanish at ep = 0, so that point is skipped
        let g = bp(&[(2, 1, 1), (1, 2, -3), (0, 0, 2), (0, 3, 1)]);
        let a = &g * &bp(&[(3, 1, 2), (1, 0, 1), (0, 2, -1)]);
        let b = &g * &bp(&[(2, 2, 1), (0, 1, 5), (0, 0, 1)]);
        let fast = gcd_by_interpolation(&a.primitive_part(), &b.primitive_part()).unwrap();
        let slow = gcd_prs(a.primitive_part(), b.primitive_part());
        assert_eq!(fast.normalized(), slow.normalized());
        assert_eq!(a.gcd(&b), g.primitive_part().normalized());
        // coprime inputs of moderate size stay fast
        let p = bp(&[(6, 4, 3), (5, 2, -1), (3, 5, 2), (1, 1, 7), (0, 0, 1)]);
        let q = bp(&[(5, 3, 1), (4, 6, -2), (2, 2, 3), (0, 4, 1), (0, 0, -4)]);
        assert!(p.gcd(&q).is_one());
    }

    #[test]
    fn exact_division_and_shift() {
        let g = bp(&[(1, 0, 1), (0, 1, 1)]);
        let h = bp(&[(2, 1, 3), (0, 0, -1)]);
        let prod = &g * &h;
        assert_eq!(prod.div_exact(&g).unwrap(), h);
        assert!(h.div_exact(&g).is_none());
        let s = h.shift_outer(2);
        assert_eq!(s.eval_outer_int(1), h.eval_outer_int(3));
        assert_eq!(format!("{}", h), "3*x^2*ep - 1");
    }
}
