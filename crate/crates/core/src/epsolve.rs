//! Closed-form solving of eps-expanded recurrences, layer by layer.
//!
//! The built-in base solver finds rational solutions `F(n) = z(n)/U(n)`
//! (Abramov's universal denominator, then polynomial solutions with an
//! indicial degree bound). A layer without such a solution switches that
//! layer and every higher one to moments computed by the engine.

use std::fmt;

use crate::arith::poly::nonnegative_integer_roots;
use crate::arith::{BiPoly, Poly, RatFunc, Rational, Var};
use crate::engine::{eps_layered_propagate, propagate, LayeredStream};
use crate::error::{Error, Result};
use crate::ode2rec::{EpsRecurrence, Recurrence};
use crate::system::{EpsWindow, InitialValues};

/// A sequence equal to `f(n)` for `n >= n0`, with explicit values below `n0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedForm {
    pub f: RatFunc,
    pub n0: usize,
    pub exceptional: Vec<Rational>,
}

impl ClosedForm {
    pub fn rational(f: RatFunc) -> Result<Self> {
        let n0 = pole_bound(f.den())?;
        let exceptional = (0..n0).map(|_| Rational::ZERO).collect();
        let mut cf = ClosedForm { f, n0, exceptional };
        // below n0 the sequence is only defined where f has no pole
        for n in 0..n0 {
            cf.exceptional[n] = cf.eval_f(n).unwrap_or(Rational::ZERO);
        }
        Ok(cf)
    }

    pub fn zero() -> Self {
        ClosedForm {
            f: RatFunc::zero(Var::N),
            n0: 0,
            exceptional: Vec::new(),
        }
    }

    fn eval_f(&self, n: usize) -> Option<Rational> {
        self.f
            .eval_rational(&Rational::from(n as i64), &Rational::ZERO)
    }

    pub fn value(&self, n: usize) -> Rational {
        if n < self.n0 {
            self.exceptional[n].clone()
        } else {
            self.eval_f(n).expect("no poles at or above n0")
        }
    }

    pub fn values(&self, len: usize) -> Vec<Rational> {
        (0..len).map(|n| self.value(n)).collect()
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} for n >= {}", self.f, self.n0)?;
        if !self.exceptional.is_empty() {
            let vals: Vec<String> = self
                .exceptional
                .iter()
                .map(crate::arith::rational::format_rational)
                .collect();
            write!(f, "; F(0..{}) = [{}]", self.n0 - 1, vals.join(", "))?;
        }
        Ok(())
    }
}

/// First index past every nonnegative integer root of `den`.
fn pole_bound(den: &BiPoly) -> Result<usize> {
    let d = den.at_eps_zero();
    if d.is_constant() {
        return Ok(0);
    }
    Ok(nonnegative_integer_roots(&d)?
        .last()
        .map_or(0, |&r| r as usize + 1))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolutionExpr {
    Rational(ClosedForm),
    /// Moments from the engine.
    MomentFallback(Vec<Rational>),
}

impl SolutionExpr {
    pub fn kind(&self) -> &'static str {
        match self {
            SolutionExpr::Rational(_) => "rational-in-n",
            SolutionExpr::MomentFallback(_) => "moment-fallback",
        }
    }
}

/// Right-hand side of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerRhs {
    Closed(ClosedForm),
    Stream(Vec<Rational>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredSolution {
    pub window: EpsWindow,
    /// Highest order solved in closed form; `window.low - 1` when none.
    pub lambda_max: i64,
    pub layers: Vec<SolutionExpr>,
}

impl LayeredSolution {
    pub fn layer(&self, k: i64) -> Option<&SolutionExpr> {
        self.window
            .contains(k)
            .then(|| &self.layers[(k - self.window.low) as usize])
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("lambda_max {}\n", self.lambda_max);
        for (k, l) in self.window.orders().zip(&self.layers) {
            match l {
                SolutionExpr::Rational(cf) => s += &format!("eps^{k}: {cf}\n"),
                SolutionExpr::MomentFallback(v) => {
                    s += &format!("eps^{k}: moment-fallback ({} moments)\n", v.len())
                }
            }
        }
        s
    }
}

/// Cauchy bound on the absolute value of the roots.
fn root_bound(p: &Poly) -> u64 {
    let lead = p.leading();
    let mut best = Rational::ZERO;
    for c in &p.coeffs()[..p.coeffs().len() - 1] {
        let r = crate::arith::rational::abs(&(c / &lead));
        if r > best {
            best = r;
        }
    }
    let ceil = (best.numerator() + best.denominator() - dashu::integer::IBig::ONE)
        / dashu::integer::IBig::from(best.denominator().clone());
    u64::try_from(&ceil).unwrap_or(u64::MAX - 1) + 1
}

/// Universal denominator of rational solutions of `sum_i a_i(n) y(n+i) = poly`.
pub fn universal_denominator(coeffs: &[Poly]) -> Result<Poly> {
    let d = coeffs.len() - 1;
    let mut a = coeffs[d].shift_arg_int(-(d as i64));
    let mut b = coeffs[0].clone();
    let one = Poly::one(Var::N);
    if a.is_constant() || b.is_constant() {
        return Ok(one);
    }
    let limit = root_bound(&a).saturating_add(root_bound(&b));
    if limit > 100_000 {
        return Err(Error::InvalidArgument(format!(
            "dispersion search bound {limit} too large"
        )));
    }
    let disp: Vec<u64> = (0..=limit)
        .filter(|&h| !a.gcd(&b.shift_arg_int(h as i64)).is_constant())
        .collect();
    let mut u = one;
    for &h in disp.iter().rev() {
        let g = a.gcd(&b.shift_arg_int(h as i64));
        if g.is_constant() {
            continue;
        }
        a = a.div_exact(&g).expect("gcd divides");
        b = b.div_exact(&g.shift_arg_int(-(h as i64))).expect("shifted gcd divides");
        for i in 0..=h {
            u = &u * &g.shift_arg_int(-(i as i64));
        }
    }
    Ok(u)
}

/// Exact solution set of `m z = rhs`: a particular solution and a nullspace basis.
fn solve_affine(
    m: &[Vec<Rational>],
    rhs: &[Rational],
    cols: usize,
) -> Option<(Vec<Rational>, Vec<Vec<Rational>>)> {
    let mut rows: Vec<Vec<Rational>> = m
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut v = r.clone();
            v.push(b.clone());
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut pr = 0;
    for c in 0..cols {
        let Some(sel) = (pr..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(pr, sel);
        let inv = Rational::ONE / &rows[pr][c];
        for v in rows[pr].iter_mut() {
            *v *= &inv;
        }
        let pivot = rows[pr].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != pr && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        pr += 1;
    }
    if rows[pr..].iter().any(|r| !r[cols].is_zero()) {
        return None;
    }
    let mut part = vec![Rational::ZERO; cols];
    for (i, &c) in pivots.iter().enumerate() {
        part[c] = rows[i][cols].clone();
    }
    let null = (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![Rational::ZERO; cols];
            v[f] = Rational::ONE;
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = -rows[i][f].clone();
            }
            v
        })
        .collect();
    Some((part, null))
}

/// Degree bound for polynomial solutions of `sum_i c_i(n) z(n+i) = r(n)`.
fn polynomial_degree_bound(c: &[Poly], r: &Poly) -> Result<Option<usize>> {
    // sum_i c_i E^i = sum_k q_k Delta^k with q_k = sum_i binom(i, k) c_i
    let d = c.len() - 1;
    let mut q = vec![Poly::zero(Var::N); d + 1];
    for (i, ci) in c.iter().enumerate() {
        let mut binom = Rational::ONE;
        for (k, qk) in q.iter_mut().enumerate().take(i + 1) {
            *qk = &*qk + &ci.scale(&binom);
            binom = binom * Rational::from((i - k) as i64) / Rational::from(k as i64 + 1);
        }
    }
    let b = q
        .iter()
        .enumerate()
        .filter_map(|(k, qk)| qk.degree().map(|dg| dg as i64 - k as i64))
        .max()
        .ok_or_else(|| Error::Degenerate("recurrence with zero operator".into()))?;
    // indicial polynomial sum lc(q_k) N (N-1) ... (N-k+1) over k with deg q_k - k = b
    let mut ind = Poly::zero(Var::N);
    for (k, qk) in q.iter().enumerate() {
        if qk.degree().map(|dg| dg as i64 - k as i64) == Some(b) {
            let ff = Poly::rising_range(Var::N, -(k as i64) + 1, 0);
            ind = &ind + &ff.scale(&qk.leading());
        }
    }
    let mut bound: Option<i64> = r.degree().map(|dr| dr as i64 - b);
    for root in nonnegative_integer_roots(&ind)? {
        bound = Some(bound.map_or(root as i64, |x| x.max(root as i64)));
    }
    Ok(bound.filter(|&x| x >= 0).map(|x| x as usize))
}

/// Rational solution of `sum_i a_i(n) F(n+i) = rhs(n)` that matches the
/// sequence fixed by `init`, or `None` when no such solution exists.
pub fn solve_rational(
    rec: &Recurrence,
    rhs: &ClosedForm,
    init: &[Rational],
) -> Result<Option<ClosedForm>> {
    let d = rec.order();
    let bn = rhs.f.num().at_eps_zero().with_var(Var::N);
    let bd = rhs.f.den().at_eps_zero().with_var(Var::N);
    let a: Vec<Poly> = rec.coeffs().iter().map(|c| c * &bd).collect();
    let u = universal_denominator(&a)?;

    // z = U y: c_i = a_i L / U(n+i), r = L bn with L = lcm U(n+i)
    let shifted: Vec<Poly> = (0..=d).map(|i| u.shift_arg_int(i as i64)).collect();
    let mut l = Poly::one(Var::N);
    for s in &shifted {
        let g = l.gcd(s);
        l = &l * &s.div_exact(&g).expect("gcd divides");
    }
    let c: Vec<Poly> = a
        .iter()
        .zip(&shifted)
        .map(|(ai, s)| ai * &l.div_exact(s).expect("lcm multiple"))
        .collect();
    let r = &l * &bn;

    // sequence values that the solution must reproduce
    let lead_roots = nonnegative_integer_roots(rec.leading())?;
    let n0 = [
        pole_bound(&BiPoly::from_outer(&u))?,
        lead_roots.last().map_or(0, |&x| x as usize + d),
        rhs.n0 + d,
        pole_bound(rhs.f.den())? + d,
    ]
    .into_iter()
    .max()
    .unwrap();
    let need = n0 + d.max(1);
    let b: Vec<Rational> = rhs.values(need.saturating_sub(d).max(1));
    let seq = propagate(rec, &b, init, need - 1)?;

    let candidates: (Vec<Poly>, Poly) = match polynomial_degree_bound(&c, &r)? {
        None => (Vec::new(), Poly::zero(Var::N)),
        Some(nmax) => {
            let basis: Vec<Poly> = (0..=nmax)
                .map(|j| {
                    let mut acc = Poly::zero(Var::N);
                    for (i, ci) in c.iter().enumerate() {
                        let sh = Poly::from_ints(Var::N, &[i as i64, 1]).pow(j);
                        acc = &acc + &(ci * &sh);
                    }
                    acc
                })
                .collect();
            let rows = basis
                .iter()
                .map(|p| p.deg0())
                .chain([r.deg0()])
                .max()
                .unwrap()
                + 1;
            let m: Vec<Vec<Rational>> = (0..rows)
                .map(|t| basis.iter().map(|p| p.coeff(t)).collect())
                .collect();
            let rv: Vec<Rational> = (0..rows).map(|t| r.coeff(t)).collect();
            match solve_affine(&m, &rv, nmax + 1) {
                None => return Ok(None),
                Some((part, null)) => (
                    null.into_iter().map(|v| Poly::new(Var::N, v)).collect(),
                    Poly::new(Var::N, part),
                ),
            }
        }
    };
    let (null, part) = candidates;
    if r.is_zero() && part.is_zero() && null.is_empty() {
        // only the zero solution
        if seq[n0..].iter().all(|v| v.is_zero()) {
            return Ok(Some(finish(RatFunc::zero(Var::N), n0, &seq)));
        }
        return Ok(None);
    }
    // match z/U against the sequence at n0 .. n0 + max(d, 1) - 1
    let pts: Vec<usize> = (n0..need).collect();
    let m: Vec<Vec<Rational>> = pts
        .iter()
        .map(|&n| null.iter().map(|z| z.eval_int(n as i64)).collect())
        .collect();
    let rv: Vec<Rational> = pts
        .iter()
        .map(|&n| &seq[n] * u.eval_int(n as i64) - part.eval_int(n as i64))
        .collect();
    let Some((coef, _)) = solve_affine(&m, &rv, null.len()) else {
        return Ok(None);
    };
    let mut z = part;
    for (ci, zi) in coef.iter().zip(&null) {
        z = &z + &zi.scale(ci);
    }
    let f = RatFunc::new(BiPoly::from_outer(&z), BiPoly::from_outer(&u))?;
    Ok(Some(finish(f, n0, &seq)))
}

fn finish(f: RatFunc, n0: usize, seq: &[Rational]) -> ClosedForm {
    let mut cf = ClosedForm {
        f,
        n0,
        exceptional: seq[..n0].to_vec(),
    };
    // drop exceptional values the formula already reproduces
    while cf.n0 > 0 && cf.eval_f(cf.n0 - 1).as_ref() == Some(&seq[cf.n0 - 1]) {
        cf.n0 -= 1;
        cf.exceptional.pop();
    }
    cf
}

/// Solve layer by layer. Layer `k` has the `ep`-free recurrence `a_i(n, 0)`
/// and rhs `rhs_k - sum_{b >= 1} [ep^b] a_i(n) F_{k-b}(n+i)`; a closed form
/// is attempted while every earlier layer and the rhs are closed forms.
/// Initial values are read from component 0; fallback layers get `mu + 1`
/// moments.
pub fn eps_layer_solve(
    rec: &EpsRecurrence,
    rhs: &[LayerRhs],
    init: &InitialValues,
    window: EpsWindow,
    mu: usize,
) -> Result<LayeredSolution> {
    if rhs.len() != window.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rhs layers for a window of {} orders",
            rhs.len(),
            window.len()
        )));
    }
    let base = rec.at_eps_zero();
    let mut corrections: Vec<(usize, usize, RatFunc)> = Vec::new();
    for (i, a) in rec.coeffs().iter().enumerate() {
        for b in 1..=a.eps_degree().unwrap_or(0) {
            let c = a.eps_coeff(b);
            if !c.is_zero() {
                corrections.push((b, i, RatFunc::from_poly(BiPoly::from_outer(&c))));
            }
        }
    }
    let mut closed: Vec<ClosedForm> = Vec::new();
    for (idx, k) in window.orders().enumerate() {
        let LayerRhs::Closed(r) = &rhs[idx] else {
            break;
        };
        // updated rhs in closed form
        let mut f = r.f.clone();
        let mut n0 = r.n0;
        let mut parts: Vec<(usize, &RatFunc, &ClosedForm)> = Vec::new();
        for (b, i, c) in &corrections {
            let src = k - *b as i64;
            if src < window.low {
                continue;
            }
            let prev = &closed[(src - window.low) as usize];
            f = &f - &(c * &prev.f.shift_outer(*i as i64));
            n0 = n0.max(prev.n0.saturating_sub(*i));
            parts.push((*i, c, prev));
        }
        n0 = n0.max(pole_bound(f.den())?);
        let exceptional = (0..n0)
            .map(|n| {
                let mut v = r.value(n);
                for (i, c, prev) in &parts {
                    let cv = c
                        .eval_rational(&Rational::from(n as i64), &Rational::ZERO)
                        .expect("polynomial");
                    v -= cv * prev.value(n + i);
                }
                v
            })
            .collect();
        let layer_rhs = ClosedForm { f, n0, exceptional };
        match solve_rational(&base, &layer_rhs, init.get(0, k))? {
            Some(sol) => closed.push(sol),
            None => break,
        }
    }
    let lambda_max = window.low + closed.len() as i64 - 1;
    let mut layers: Vec<SolutionExpr> = closed.into_iter().map(SolutionExpr::Rational).collect();
    if layers.len() < window.len() {
        let lens = crate::engine::eps_layer_lengths(rec, window, mu);
        let dp = base.order();
        let stream = LayeredStream::new(
            window.low,
            rhs.iter()
                .zip(&lens)
                .map(|(r, &len)| {
                    let n = len.saturating_sub(dp);
                    match r {
                        LayerRhs::Closed(cf) => Ok(cf.values(n)),
                        LayerRhs::Stream(v) if v.len() >= n => Ok(v[..n].to_vec()),
                        LayerRhs::Stream(v) => Err(Error::InsufficientLength {
                            what: "layer rhs stream".into(),
                            extra: n - v.len(),
                        }),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        );
        let lm = eps_layered_propagate(rec, &stream, init, 0, window, mu)?;
        for k in (lambda_max + 1)..=window.high {
            layers.push(SolutionExpr::MomentFallback(lm.layer(k).unwrap().to_vec()));
        }
    }
    Ok(LayeredSolution {
        window,
        lambda_max,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int};
    use crate::expr::parse_expr;

    fn rf(s: &str) -> RatFunc {
        parse_expr(s).unwrap().to_ratfunc(Var::N).unwrap()
    }

    fn bn(s: &str) -> BiPoly {
        parse_expr(s).unwrap().to_bipoly(Var::N).unwrap()
    }

    fn closed(s: &str) -> ClosedForm {
        ClosedForm::rational(rf(s)).unwrap()
    }

    #[test]
    fn rational_examples() {
        let r = Recurrence::from_ints(&[&[-1], &[1]]).unwrap();
        let s = solve_rational(&r, &closed("1"), &[int(0)]).unwrap().unwrap();
        assert_eq!(s.f, rf("n"));

        let r = Recurrence::from_ints(&[&[-1, -1], &[2, 1]]).unwrap();
        let s = solve_rational(&r, &ClosedForm::zero(), &[int(1)]).unwrap().unwrap();
        assert_eq!(s.f, rf("1/(n+1)"));

        let r = Recurrence::from_ints(&[&[-1], &[2]]).unwrap();
        assert!(solve_rational(&r, &ClosedForm::zero(), &[int(1)]).unwrap().is_none());
    }

    #[test]
    fn harmonic_numbers_are_not_rational() {
        let r = Recurrence::from_ints(&[&[1, 1], &[-3, -2], &[2, 1]]).unwrap();
        let s = solve_rational(&r, &ClosedForm::zero(), &[int(0), int(1)]).unwrap();
        assert!(s.is_none());
    }

    #[test]
    fn exceptional_values() {
        // (n - 2) F(n+1) = (n - 1) F(n): F(1) = F(0)/2, F(2) = 0, F(3) free
        let r = Recurrence::from_ints(&[&[1, -1], &[-2, 1]]).unwrap();
        let s = solve_rational(&r, &ClosedForm::zero(), &[int(2), int(1), int(0), int(4)])
            .unwrap()
            .unwrap();
        assert_eq!(s.f, rf("4*(n-2)"));
        // F(2) = 0 agrees with the formula
        assert_eq!((s.n0, s.exceptional.clone()), (2, vec![int(2), int(1)]));
        let vals = s.values(8);
        assert_eq!(vals[3..], [4, 8, 12, 16, 20].map(int));
    }

    #[test]
    fn solution_satisfies_recurrence() {
        // (n+1) F(n+1) - n F(n) = 1/(n+2)
        let r = Recurrence::from_ints(&[&[0, -1], &[1, 1]]).unwrap();
        // n F(n) = H(n+1) - 1 is not rational
        assert!(solve_rational(&r, &closed("1/(n+2)"), &[int(0)]).unwrap().is_none());
        // (n+1) F(n+1) - n F(n) = n + 1 gives F(n) = (n + 1)/2 for n >= 1
        let rhs = closed("n+1");
        let s = solve_rational(&r, &rhs, &[int(0)]).unwrap().unwrap();
        let v = s.values(30);
        for n in 0..29 {
            assert_eq!(r.eval_lhs(&v, n), rhs.value(n));
        }
        // (n+1) F(n+1) - n F(n) = 1 has F(n) = 1 for n >= 1
        let s = solve_rational(&r, &closed("1"), &[int(0)]).unwrap().unwrap();
        assert_eq!(s.f, rf("1"));
        assert_eq!(s.values(4), vec![int(0), int(1), int(1), int(1)]);
    }

    #[test]
    fn layered_examples() {
        let mut init = InitialValues::default();
        init.set(0, 0, vec![int(0)]);
        init.set(0, 1, vec![int(0)]);
        let w = EpsWindow::new(0, 1).unwrap();
        let r = EpsRecurrence::new(vec![bn("-1"), bn("1")], 0).unwrap();
        let rhs = vec![LayerRhs::Closed(ClosedForm::zero()), LayerRhs::Closed(closed("n"))];
        let sol = eps_layer_solve(&r, &rhs, &init, w, 10).unwrap();
        assert_eq!(sol.lambda_max, 1);
        match (&sol.layers[0], &sol.layers[1]) {
            (SolutionExpr::Rational(a), SolutionExpr::Rational(b)) => {
                assert!(a.f.is_zero());
                assert_eq!(b.f, rf("n*(n-1)/2"));
            }
            other => panic!("{other:?}"),
        }

        let mut init = InitialValues::default();
        init.set(0, 0, vec![int(1)]);
        init.set(0, 1, vec![int(0)]);
        let r = EpsRecurrence::new(vec![bn("-1-ep"), bn("n+1")], 0).unwrap();
        let rhs = vec![LayerRhs::Closed(ClosedForm::zero()); 2];
        let sol = eps_layer_solve(&r, &rhs, &init, w, 4).unwrap();
        assert_eq!(sol.lambda_max, -1);
        assert_eq!(
            sol.layers[0],
            SolutionExpr::MomentFallback(vec![int(1), int(1), frac(1, 2), frac(1, 6), frac(1, 24)])
        );
        assert_eq!(sol.layers[1].kind(), "moment-fallback");
    }

    #[test]
    fn degenerate_window_matches_base_solver() {
        let mut init = InitialValues::default();
        init.set(0, 0, vec![int(0)]);
        let r0 = Recurrence::from_ints(&[&[-1], &[1]]).unwrap();
        let sol = eps_layer_solve(
            &EpsRecurrence::from_recurrence(&r0),
            &[LayerRhs::Closed(closed("1"))],
            &init,
            EpsWindow::new(0, 0).unwrap(),
            5,
        )
        .unwrap();
        let direct = solve_rational(&r0, &closed("1"), &[int(0)]).unwrap().unwrap();
        assert_eq!(sol.layers[0], SolutionExpr::Rational(direct));
    }
}
