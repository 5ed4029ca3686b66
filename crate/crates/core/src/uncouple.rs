//! Gauss uncoupling of `D_x f = A f + g` into triangular scalar stages, and
//! evaluation of linear differential operators on moment streams.
//!
//! The operator matrix `D - A` is reduced over the Ore ring `K(x, ep)[D]`
//! column by column from the last component down. The pivot row of each
//! column becomes the stage of that component; it involves only components
//! with smaller index, so the stages are solved for `f_1, f_2, ...` in turn.

use std::collections::BTreeSet;
use std::fmt;

use crate::arith::{rational, BiPoly, RatFunc, Rational, Var};
use crate::error::{Error, Result};
use crate::stream::LayeredStream;
use crate::system::CoupledSystem;

/// Input of a right-hand-side term: a provider `g_i` or a component `f_m`
/// solved by an earlier stage (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Provider(usize),
    Component(usize),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Provider(i) => write!(f, "g{}", i + 1),
            Source::Component(m) => write!(f, "f{}", m + 1),
        }
    }
}

/// `coef * D_x^deriv source`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinTerm {
    pub coef: RatFunc,
    pub deriv: usize,
    pub source: Source,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinOpCombination {
    pub terms: Vec<LinTerm>,
}

impl LinOpCombination {
    /// Add a term, merging with an existing one on the same `(deriv, source)`.
    pub fn push(&mut self, coef: RatFunc, deriv: usize, source: Source) {
        if coef.is_zero() {
            return;
        }
        if let Some(t) = self
            .terms
            .iter_mut()
            .find(|t| t.deriv == deriv && t.source == source)
        {
            t.coef = &t.coef + &coef;
            self.terms.retain(|t| !t.coef.is_zero());
            return;
        }
        self.terms.push(LinTerm {
            coef,
            deriv,
            source,
        });
    }

    pub fn sources(&self) -> BTreeSet<Source> {
        self.terms.iter().map(|t| t.source).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, f: &RatFunc) -> Self {
        let mut out = Self::default();
        for t in &self.terms {
            out.push(&t.coef * f, t.deriv, t.source);
        }
        out
    }
}

impl fmt::Display for LinOpCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let d = match t.deriv {
                    0 => String::new(),
                    1 => "D ".into(),
                    k => format!("D^{k} "),
                };
                format!("({}) {d}{}", t.coef, t.source)
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `sum_i alphas[i] D^i f_component = rhs`, with polynomial `alphas`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarStage {
    pub component: usize,
    pub alphas: Vec<BiPoly>,
    pub rhs: LinOpCombination,
}

impl ScalarStage {
    pub fn order(&self) -> usize {
        self.alphas.len() - 1
    }
}

impl fmt::Display for ScalarStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let j = self.component + 1;
        let lhs: Vec<String> = self
            .alphas
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| match i {
                0 => format!("({a}) f{j}"),
                1 => format!("({a}) D f{j}"),
                _ => format!("({a}) D^{i} f{j}"),
            })
            .collect();
        write!(f, "{} = {}", lhs.join(" + "), self.rhs)
    }
}

/// Stages in solve order: each stage's rhs references only providers and
/// components of earlier stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UncoupledSystem {
    pub stages: Vec<ScalarStage>,
}

impl UncoupledSystem {
    pub fn orders(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.order()).collect()
    }

    pub fn stage_of(&self, component: usize) -> Option<&ScalarStage> {
        self.stages.iter().find(|s| s.component == component)
    }
}

/// Linear differential operator `sum_i c_i(x, ep) D^i` (coefficients on the left).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operator {
    coeffs: Vec<RatFunc>,
}

impl Operator {
    pub fn new(mut coeffs: Vec<RatFunc>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Operator { coeffs }
    }

    pub fn zero() -> Self {
        Operator { coeffs: Vec::new() }
    }

    pub fn constant(c: RatFunc) -> Self {
        Self::new(vec![c])
    }

    /// `D_x`.
    pub fn d() -> Self {
        Self::new(vec![RatFunc::zero(Var::X), RatFunc::one(Var::X)])
    }

    pub fn coeffs(&self) -> &[RatFunc] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> RatFunc {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| RatFunc::zero(Var::X))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn order(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> RatFunc {
        self.coeffs
            .last()
            .cloned()
            .unwrap_or_else(|| RatFunc::zero(Var::X))
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| &self.coeff(i) + &other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| &self.coeff(i) - &other.coeff(i)).collect())
    }

    /// `c * self`.
    pub fn left_mul(&self, c: &RatFunc) -> Self {
        Self::new(self.coeffs.iter().map(|a| c * a).collect())
    }

    /// `D * self`, using `D c = c D + c'`.
    pub fn left_mul_d(&self) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![RatFunc::zero(Var::X); n + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] = &out[i + 1] + c;
            out[i] = &out[i] + &c.derivative();
        }
        Self::new(out)
    }

    pub fn left_mul_d_pow(&self, k: usize) -> Self {
        let mut p = self.clone();
        for _ in 0..k {
            p = p.left_mul_d();
        }
        p
    }

    /// Composition `self * other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut acc = Self::zero();
        for (i, c) in self.coeffs.iter().enumerate() {
            acc = acc.add(&other.left_mul_d_pow(i).left_mul(c));
        }
        acc
    }
}

/// Stages plus, per stage, the row of multipliers `U` with
/// `stage = U (D - A)` up to the scalar factor recorded in the stage.
pub struct Uncoupling {
    pub system: UncoupledSystem,
    pub transforms: Vec<Vec<Operator>>,
    pub factors: Vec<RatFunc>,
}

pub fn gauss_uncouple(sys: &CoupledSystem) -> Result<UncoupledSystem> {
    let coefs: Vec<RatFunc> = (0..sys.size()).map(|i| sys.provider_coefficient(i)).collect();
    Ok(gauss_uncouple_weighted(sys.matrix(), &coefs)?.system)
}

/// Uncouple a matrix `A`, keeping the elimination multipliers for inspection.
pub fn gauss_uncouple_matrix(a: &[Vec<RatFunc>]) -> Result<Uncoupling> {
    let ones = vec![RatFunc::one(Var::X); a.len()];
    gauss_uncouple_weighted(a, &ones)
}

/// Uncouple `D f = A f + diag(weights) g`.
pub fn gauss_uncouple_weighted(a: &[Vec<RatFunc>], weights: &[RatFunc]) -> Result<Uncoupling> {
    let n = a.len();
    let mut m: Vec<Vec<Operator>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let minus_a = Operator::constant(-&a[r][c]);
                    if r == c {
                        Operator::d().add(&minus_a)
                    } else {
                        minus_a
                    }
                })
                .collect()
        })
        .collect();
    let mut u: Vec<Vec<Operator>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|i| {
                    if r == i {
                        Operator::constant(RatFunc::one(Var::X))
                    } else {
                        Operator::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut pivots = Vec::with_capacity(n);
    for col in (0..n).rev() {
        let piv = loop {
            let cands: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&r| !m[r][col].is_zero())
                .collect();
            let piv = *cands
                .iter()
                .min_by_key(|&&r| {
                    let e = &m[r][col];
                    (e.order().unwrap(), e.leading().total_degree(), r)
                })
                .ok_or_else(|| {
                    Error::Degenerate(format!("no pivot for component f{}", col + 1))
                })?;
            if cands.len() == 1 {
                break piv;
            }
            let po = m[piv][col].order().unwrap();
            let plc = m[piv][col].leading();
            for &q in cands.iter().filter(|&&q| q != piv) {
                while let Some(qo) = m[q][col].order() {
                    if qo < po {
                        break;
                    }
                    let f = (&m[q][col].leading() / &plc)?;
                    let k = qo - po;
                    for c in 0..n {
                        let t = m[piv][c].left_mul_d_pow(k).left_mul(&f);
                        m[q][c] = m[q][c].sub(&t);
                    }
                    for i in 0..n {
                        let t = u[piv][i].left_mul_d_pow(k).left_mul(&f);
                        u[q][i] = u[q][i].sub(&t);
                    }
                }
            }
        };
        active.retain(|&r| r != piv);
        pivots.push((col, piv));
    }
    pivots.reverse();
    let mut stages = Vec::with_capacity(n);
    let mut transforms = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    for (col, r) in pivots {
        debug_assert!((col + 1..n).all(|c| m[r][c].is_zero()));
        let p = &m[r][col];
        let mut rhs = LinOpCombination::default();
        for (i, op) in u[r].iter().enumerate() {
            let op = match weights[i].is_one() {
                true => op.clone(),
                false => op.compose(&Operator::constant(weights[i].clone())),
            };
            for (d, c) in op.coeffs().iter().enumerate() {
                rhs.push(c.clone(), d, Source::Provider(i));
            }
        }
        for (c, op) in m[r].iter().enumerate().take(col) {
            for (d, coef) in op.coeffs().iter().enumerate() {
                rhs.push(-coef, d, Source::Component(c));
            }
        }
        let (alphas, factor) = clear_denominators(p.coeffs());
        stages.push(ScalarStage {
            component: col,
            alphas,
            rhs: rhs.scale(&factor),
        });
        transforms.push(u[r].clone());
        factors.push(factor);
    }
    Ok(Uncoupling {
        system: UncoupledSystem { stages },
        transforms,
        factors,
    })
}

/// Multiply by the lcm of the denominators and divide out the rational
/// content; returns the polynomial coefficients and the factor applied.
fn clear_denominators(coeffs: &[RatFunc]) -> (Vec<BiPoly>, RatFunc) {
    let mut l = BiPoly::one(Var::X);
    for c in coeffs {
        let g = l.gcd(c.den());
        l = &l * &c.den().div_exact(&g).expect("gcd divides");
    }
    let polys: Vec<BiPoly> = coeffs
        .iter()
        .map(|c| c.num() * &l.div_exact(c.den()).expect("lcm is a multiple"))
        .collect();
    let all: Vec<Rational> = polys
        .iter()
        .flat_map(|p| p.terms().map(|(_, _, c)| c.clone()).collect::<Vec<_>>())
        .collect();
    let dl = Rational::from(dashu::integer::IBig::from(rational::denominator_lcm(all.iter())));
    let nums: Vec<dashu::integer::IBig> = all
        .iter()
        .map(|c| (c * &dl).numerator().clone())
        .collect();
    let g = Rational::from(dashu::integer::IBig::from(rational::integer_content(nums.iter())));
    let content = g / dl;
    let inv = Rational::ONE / &content;
    let polys = polys.iter().map(|p| p.scale(&inv)).collect();
    let factor = RatFunc::new(l.scale(&inv), BiPoly::one(Var::X)).expect("nonzero");
    (polys, factor)
}

/// Split a denominator as `x^kq * ep^vq * unit` with `unit(0, 0) != 0`.
pub fn split_denominator(q: &BiPoly) -> Result<(usize, usize, BiPoly)> {
    let kq = q.outer_valuation().unwrap_or(0);
    let q1 = q.div_outer_pow(kq);
    let vq = q1.eps_valuation().unwrap_or(0);
    let unit = q1.div_eps_pow(vq);
    if unit.term(0, 0).is_zero() {
        return Err(Error::NonExpandable(format!(
            "denominator {q} mixes x and ep at the expansion point"
        )));
    }
    Ok((kq, vq, unit))
}

/// How a term moves eps-orders and lengths: the result at order `K` needs the
/// source at orders `<= K - eps_shift`, with `extra_len` more moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermShape {
    pub eps_shift: i64,
    pub extra_len: usize,
}

pub fn term_shape(t: &LinTerm) -> Result<TermShape> {
    let (kq, vq, _) = split_denominator(t.coef.den())?;
    let bmin = t.coef.num().eps_valuation().unwrap_or(0);
    Ok(TermShape {
        eps_shift: bmin as i64 - vq as i64,
        extra_len: t.deriv + kq,
    })
}

/// Apply one term to a stream.
pub fn apply_term(t: &LinTerm, s: &LayeredStream) -> Result<LayeredStream> {
    let (kq, vq, unit) = split_denominator(t.coef.den())?;
    let mut r = s.derivative(t.deriv).mul_bipoly(t.coef.num());
    if !unit.is_one() {
        r = r.div_unit(&unit)?;
    }
    Ok(r.shift_eps(-(vq as i64)).shift_x_down(kq))
}

/// Moments of `op` applied to the source streams, on orders
/// `low .. low + lens.len()` with `lens[i]` moments at order `low + i`.
pub fn apply_linop<'a>(
    op: &LinOpCombination,
    streams: &dyn Fn(Source) -> Option<&'a LayeredStream>,
    low: i64,
    lens: &[usize],
    what: &str,
) -> Result<LayeredStream> {
    let mut acc = LayeredStream::zero(low, lens);
    for t in &op.terms {
        let s = streams(t.source).ok_or_else(|| {
            Error::InvalidArgument(format!("{what}: no stream for {}", t.source))
        })?;
        acc = acc.add(&apply_term(t, s)?);
    }
    acc.restrict(low, lens, what)
}
