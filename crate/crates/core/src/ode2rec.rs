//! Scalar ODE stages to recurrences: normalization by common `ep^u` and
//! `p(x)` factors, coefficient comparison in `x`, order bounds and
//! initial-value requirements.

use std::fmt;

use crate::arith::{poly_content, start_index_delta, BiPoly, Poly, Rational, Var};
use crate::error::{Error, Result};
use crate::formats::RecurrenceFile;
use crate::uncouple::{LinOpCombination, ScalarStage};

/// What [`normalize_stage`] divided out: `ep^u` and `x^k p(x)` with `p(0) != 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizationRecord {
    pub u: usize,
    pub p: Poly,
    pub k: usize,
}

/// `ep^b * coef(x) * D^deriv` applied to the stage's own lower layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfTerm {
    pub eps: usize,
    pub deriv: usize,
    pub coef: Poly,
}

/// A stage after normalization. Layer `k` of the component satisfies
/// `sum_i lhs[i] D^i F_k = (rhs_{k+u} - sum self_terms F_{k-b}) / (x^k p)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedStage {
    pub component: usize,
    pub order: usize,
    /// `alpha_i / ep^u`.
    pub full: Vec<BiPoly>,
    /// `alpha_i(x, 0) / (x^k p(x))`, trailing zeros removed.
    pub lhs: Vec<Poly>,
    pub self_terms: Vec<SelfTerm>,
    pub rhs: LinOpCombination,
    pub record: NormalizationRecord,
}

pub fn normalize_stage(stage: &ScalarStage) -> Result<NormalizedStage> {
    let u = stage
        .alphas
        .iter()
        .filter_map(|a| a.eps_valuation())
        .min()
        .ok_or_else(|| {
            Error::Degenerate(format!(
                "stage for f{} has only zero coefficients",
                stage.component + 1
            ))
        })?;
    let full: Vec<BiPoly> = stage.alphas.iter().map(|a| a.div_eps_pow(u)).collect();
    let at0: Vec<Poly> = full.iter().map(|a| a.at_eps_zero()).collect();
    let nonzero: Vec<Poly> = at0.iter().filter(|p| !p.is_zero()).cloned().collect();
    let p0 = poly_content(&nonzero)?;
    let k = p0.valuation().unwrap_or(0);
    let p = p0.shift_down(k);
    let mut lhs: Vec<Poly> = at0
        .iter()
        .map(|a| a.div_exact(&p0).expect("content divides"))
        .collect();
    while lhs.last().is_some_and(|c| c.is_zero()) {
        lhs.pop();
    }
    let mut self_terms = Vec::new();
    for (i, a) in full.iter().enumerate() {
        for b in 1..=a.eps_degree().unwrap_or(0) {
            let coef = a.eps_coeff(b);
            if !coef.is_zero() {
                self_terms.push(SelfTerm {
                    eps: b,
                    deriv: i,
                    coef,
                });
            }
        }
    }
    Ok(NormalizedStage {
        component: stage.component,
        order: stage.order(),
        full,
        lhs,
        self_terms,
        rhs: stage.rhs.clone(),
        record: NormalizationRecord { u, p, k },
    })
}

/// `o + max_i deg_x alpha_i - deg p`.
pub fn order_bound(stage: &ScalarStage, record: &NormalizationRecord) -> usize {
    let maxdeg = stage.alphas.iter().map(|a| a.outer_deg0()).max().unwrap_or(0);
    (stage.order() + maxdeg).saturating_sub(record.p.deg0())
}

/// Linear recurrence `sum_i a_i(n, ep) F(n+i) = b(n)` with `ep`-content removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsRecurrence {
    coeffs: Vec<BiPoly>,
    shift: i64,
}

impl EpsRecurrence {
    /// `shift` is the `s_min` of the originating stage (0 when none).
    pub fn new(mut coeffs: Vec<BiPoly>, shift: i64) -> Result<Self> {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::Degenerate("recurrence with only zero coefficients".into()));
        }
        if coeffs.iter().any(|c| c.outer() != Var::N) {
            return Err(Error::InvalidArgument("recurrence coefficients must be in n and ep".into()));
        }
        let rec = EpsRecurrence { coeffs, shift };
        if rec.coeffs.iter().all(|c| c.at_eps_zero().is_zero()) {
            return Err(Error::InvalidArgument(
                "every coefficient is divisible by ep; divide out the common factor".into(),
            ));
        }
        Ok(rec)
    }

    /// Divide out the common `ep^u`; returns the recurrence and `u`.
    pub fn normalized(coeffs: Vec<BiPoly>, shift: i64) -> Result<(Self, usize)> {
        let u = coeffs
            .iter()
            .filter_map(|c| c.eps_valuation())
            .min()
            .ok_or_else(|| Error::Degenerate("recurrence with only zero coefficients".into()))?;
        let coeffs = coeffs.iter().map(|c| c.div_eps_pow(u)).collect();
        Ok((Self::new(coeffs, shift)?, u))
    }

    pub fn from_recurrence(rec: &Recurrence) -> Self {
        EpsRecurrence {
            coeffs: rec.coeffs.iter().map(BiPoly::from_outer).collect(),
            shift: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BiPoly] {
        &self.coeffs
    }

    /// Original support `[s_min, s_max]` of the shifts before re-indexing.
    pub fn support(&self) -> (i64, i64) {
        (self.shift, self.shift + self.order() as i64)
    }

    pub fn is_eps_free(&self) -> bool {
        self.coeffs.iter().all(|c| c.eps_degree().unwrap_or(0) == 0)
    }

    /// `a_i(n, 0)` for `i <= d'`.
    pub fn at_eps_zero(&self) -> Recurrence {
        let d_prime = self.meta().d_prime;
        Recurrence {
            coeffs: self.coeffs[..=d_prime]
                .iter()
                .map(|c| c.at_eps_zero())
                .collect(),
        }
    }

    pub fn meta(&self) -> RecurrenceMeta {
        let d = self.order();
        let d_prime = (0..=d)
            .rev()
            .find(|&i| !self.coeffs[i].at_eps_zero().is_zero())
            .expect("ep-content removed");
        let delta = start_index_delta(&self.coeffs[d_prime].at_eps_zero()).expect("nonzero");
        RecurrenceMeta::new(d, d_prime, delta)
    }

    pub fn to_file(&self) -> RecurrenceFile {
        RecurrenceFile {
            coeffs: self.coeffs.clone(),
            rhs: None,
        }
    }

    /// `sum_i a_i(n, e) F(n+i)` for a specialized `ep = e`.
    pub fn eval_lhs_at(&self, e: &Rational, f: &[Rational], n: usize) -> Rational {
        let mut acc = Rational::ZERO;
        for (i, a) in self.coeffs.iter().enumerate() {
            let c = a.eval_eps(e).eval_int(n as i64);
            acc += c * &f[n + i];
        }
        acc
    }
}

impl fmt::Display for EpsRecurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("({c}) F(n)"),
                _ => format!("({c}) F(n+{i})"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Linear recurrence `sum_i a_i(n) F(n+i) = b(n)` with `a_d != 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recurrence {
    coeffs: Vec<Poly>,
}

impl Recurrence {
    pub fn new(mut coeffs: Vec<Poly>) -> Result<Self> {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::Degenerate("recurrence with only zero coefficients".into()));
        }
        let coeffs = coeffs.into_iter().map(|c| c.with_var(Var::N)).collect();
        Ok(Recurrence { coeffs })
    }

    pub fn from_ints(coeffs: &[&[i64]]) -> Result<Self> {
        Self::new(coeffs.iter().map(|c| Poly::from_ints(Var::N, c)).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    pub fn leading(&self) -> &Poly {
        self.coeffs.last().unwrap()
    }

    pub fn meta(&self) -> RecurrenceMeta {
        let d = self.order();
        RecurrenceMeta::new(d, d, start_index_delta(self.leading()).expect("nonzero"))
    }

    /// `sum_i a_i(n) F(n+i)`.
    pub fn eval_lhs(&self, f: &[Rational], n: usize) -> Rational {
        let mut acc = Rational::ZERO;
        for (i, a) in self.coeffs.iter().enumerate() {
            if !a.is_zero() {
                acc += a.eval_int(n as i64) * &f[n + i];
            }
        }
        acc
    }

    pub fn to_file(&self) -> RecurrenceFile {
        EpsRecurrence::from_recurrence(self).to_file()
    }
}

impl fmt::Display for Recurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", EpsRecurrence::from_recurrence(self))
    }
}

/// Order data of a recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecurrenceMeta {
    pub d: usize,
    pub d_prime: usize,
    pub delta: usize,
    /// `max(d', delta)`.
    pub required_initial_count: usize,
}

impl RecurrenceMeta {
    pub fn new(d: usize, d_prime: usize, delta: usize) -> Self {
        RecurrenceMeta {
            d,
            d_prime,
            delta,
            required_initial_count: d_prime.max(delta),
        }
    }

    /// Number of leading values that forward propagation cannot produce:
    /// the first `d'` plus, when the leading coefficient vanishes at a
    /// nonnegative integer, everything up to index `delta - 1 + d'`.
    pub fn sufficient_initial_count(&self) -> usize {
        if self.delta > 0 {
            self.delta + self.d_prime
        } else {
            self.d_prime
        }
    }
}

pub fn recurrence_meta(rec: &EpsRecurrence) -> RecurrenceMeta {
    rec.meta()
}

/// Coefficient comparison in `x`: a monomial `c x^a ep^e D^b` contributes
/// `c ep^e (n-a+1)...(n-a+b) F(n+b-a)`; shifts are re-indexed to start at 0.
pub fn ode_to_recurrence(alphas: &[BiPoly]) -> Result<EpsRecurrence> {
    let mut parts: Vec<(i64, BiPoly)> = Vec::new();
    for (b, alpha) in alphas.iter().enumerate() {
        for (a, e, c) in alpha.terms() {
            let s = b as i64 - a as i64;
            let ff = Poly::rising_range(Var::N, 1 - a as i64, b as i64 - a as i64);
            let term = BiPoly::from_outer(&ff.scale(c)).mul_eps_pow(e);
            match parts.iter_mut().find(|(t, _)| *t == s) {
                Some((_, acc)) => *acc = &*acc + &term,
                None => parts.push((s, term)),
            }
        }
    }
    parts.retain(|(_, p)| !p.is_zero());
    let s_min = parts.iter().map(|(s, _)| *s).min().ok_or_else(|| {
        Error::Degenerate("differential equation with only zero coefficients".into())
    })?;
    let s_max = parts.iter().map(|(s, _)| *s).max().unwrap();
    let mut coeffs = vec![BiPoly::zero(Var::N); (s_max - s_min + 1) as usize];
    for (s, p) in parts {
        // a_i(m) = P_{i + s_min}(m - s_min)
        coeffs[(s - s_min) as usize] = p.shift_outer(-s_min);
    }
    let (rec, _) = EpsRecurrence::normalized(coeffs, s_min)?;
    Ok(rec)
}

/// Recurrence of an eps-free stage, given by univariate coefficients.
pub fn ode_to_recurrence_univariate(alphas: &[Poly]) -> Result<(Recurrence, i64)> {
    let bi: Vec<BiPoly> = alphas.iter().map(BiPoly::from_outer).collect();
    let rec = ode_to_recurrence(&bi)?;
    let shift = rec.support().0;
    let r = Recurrence::new(rec.coeffs().iter().map(|c| c.at_eps_zero()).collect())?;
    Ok((r, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::expr::parse_expr;

    fn bx(s: &str) -> BiPoly {
        parse_expr(s).unwrap().to_bipoly(Var::X).unwrap()
    }

    fn bn(s: &str) -> BiPoly {
        parse_expr(s).unwrap().to_bipoly(Var::N).unwrap()
    }

    fn stage(alphas: &[&str]) -> ScalarStage {
        ScalarStage {
            component: 0,
            alphas: alphas.iter().map(|s| bx(s)).collect(),
            rhs: LinOpCombination::default(),
        }
    }

    #[test]
    fn normalization_examples() {
        let n = normalize_stage(&stage(&["-(x-2)", "x-2"])).unwrap();
        assert_eq!(n.record.u, 0);
        assert_eq!(n.record.k, 0);
        assert_eq!(n.record.p, Poly::from_ints(Var::X, &[-2, 1]));
        assert_eq!(n.lhs, vec![Poly::from_ints(Var::X, &[-1]), Poly::from_ints(Var::X, &[1])]);

        let n = normalize_stage(&stage(&["-ep^2", "ep^2"])).unwrap();
        assert_eq!(n.record.u, 2);
        assert!(n.self_terms.is_empty());

        let n = normalize_stage(&stage(&["-x", "x"])).unwrap();
        assert_eq!((n.record.k, n.record.p.is_one()), (1, true));
        let (rec, _) = ode_to_recurrence_univariate(&n.lhs).unwrap();
        assert_eq!(rec.order(), 1);

        let n = normalize_stage(&stage(&["-1 - ep*x", "1"])).unwrap();
        assert_eq!(
            n.self_terms,
            vec![SelfTerm {
                eps: 1,
                deriv: 0,
                coef: Poly::from_ints(Var::X, &[0, -1])
            }]
        );
        assert!(normalize_stage(&stage(&["0", "0"])).is_err());
    }

    #[test]
    fn conversion_examples() {
        // D f - f = 0 -> (n+1) F(n+1) - F(n) = 0
        let r = ode_to_recurrence(&[bx("-1"), bx("1")]).unwrap();
        assert_eq!(r.coeffs(), &[bn("-1"), bn("n+1")]);
        assert_eq!(r.support(), (0, 1));
        // (1-x) D f - f = 0 -> (n+1) F(n+1) - (n+1) F(n) = 0
        let r = ode_to_recurrence(&[bx("-1"), bx("1-x")]).unwrap();
        assert_eq!(r.coeffs(), &[bn("-n-1"), bn("n+1")]);
        // x^2 D^2 f: n(n-1) F(n) at shift 0
        let r = ode_to_recurrence(&[bx("0"), bx("0"), bx("x^2")]).unwrap();
        assert_eq!(r.coeffs(), &[bn("n^2 - n")]);
    }

    #[test]
    fn meta_examples() {
        let r = ode_to_recurrence(&[bx("-1"), bx("1")]).unwrap();
        let m = recurrence_meta(&r);
        assert_eq!((m.d_prime, m.delta, m.required_initial_count), (1, 0, 1));

        let r = EpsRecurrence::new(vec![bn("1"), bn("n-3"), bn("ep*(n+1)")], 0).unwrap();
        let m = recurrence_meta(&r);
        assert_eq!((m.d, m.d_prime, m.delta, m.required_initial_count), (2, 1, 4, 4));
        assert_eq!(m.sufficient_initial_count(), 5);

        let r = ode_to_recurrence(&[bx("-1"), bx("1-x")]).unwrap();
        let m = recurrence_meta(&r);
        assert_eq!((m.d_prime, m.delta, m.required_initial_count), (1, 0, 1));
    }

    #[test]
    fn bound_examples() {
        let st = stage(&["-1", "1-x"]);
        let n = normalize_stage(&st).unwrap();
        assert_eq!(order_bound(&st, &n.record), 2);
        let r = ode_to_recurrence(&st.alphas).unwrap();
        assert!(r.order() <= 2);
    }

    #[test]
    fn reindexing_agrees_with_shift_support() {
        // x D f + f has shifts {0}; D^2 f + x f has shifts {-1, 2}
        let r = ode_to_recurrence(&[bx("x"), bx("0"), bx("1")]).unwrap();
        assert_eq!(r.support(), (-1, 2));
        // a_i(m) = P_{i-1}(m+1): check at m = 5 against direct evaluation
        // P_{-1}(n) = 1, P_2(n) = (n+1)(n+2)
        let m = 5i64;
        assert_eq!(r.coeffs()[0].eval_outer_int(m).coeff(0), int(1));
        assert_eq!(r.coeffs()[3].eval_outer_int(m).coeff(0), int((m + 2) * (m + 3)));
    }
}
