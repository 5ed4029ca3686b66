//! Coupled systems `D_x f = A(x, ep) f + g`, moment providers for `g`,
//! initial values and eps-windows.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::{rational, Poly, RatFunc, Rational, Var};
use crate::engine::{eps_layered_propagate, LayeredStream};
use crate::error::{Error, Result};
use crate::expr::{parse_eps_poly, parse_expr, Expr, HarmonicCache};
use crate::formats::{self, relocate, MomentFile, RecurrenceFile};
use crate::ode2rec::EpsRecurrence;

/// Inclusive range of eps-orders `[low, high]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpsWindow {
    pub low: i64,
    pub high: i64,
}

impl EpsWindow {
    pub fn new(low: i64, high: i64) -> Result<Self> {
        if low > high {
            return Err(Error::InvalidArgument(format!(
                "empty eps window [{low}, {high}]"
            )));
        }
        Ok(EpsWindow { low, high })
    }

    pub fn len(&self) -> usize {
        (self.high - self.low + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i64) -> bool {
        self.low <= k && k <= self.high
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<i64> {
        self.low..=self.high
    }
}

/// Initial values `c_{j,k,0}, c_{j,k,1}, ...` per (component, eps-order).
/// Components are 0-based here.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InitialValues {
    map: BTreeMap<(usize, i64), Vec<Rational>>,
}

impl InitialValues {
    pub fn set(&mut self, component: usize, order: i64, values: Vec<Rational>) {
        self.map.insert((component, order), values);
    }

    /// Values for `(component, order)`; empty when none were given.
    pub fn get(&self, component: usize, order: i64) -> &[Rational] {
        self.map
            .get(&(component, order))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, i64), &Vec<Rational>)> {
        self.map.iter().map(|(k, v)| (*k, v))
    }
}

/// Provider descriptor as it appears in a system document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderSpec {
    /// `value` is a polynomial in `ep`; `values` lists one constant per order.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<String>>,
        window: [i64; 2],
    },
    /// Expressions in `n` with harmonic sums, one per order from the window's low end;
    /// `expr` is shorthand for a single lowest layer.
    Harmonic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layers: Option<Vec<String>>,
        window: [i64; 2],
    },
    /// One moment file per order from the window's low end.
    File { paths: Vec<String>, window: [i64; 2] },
    /// Moments of a recurrence in `n` and `ep`, with initial values per order.
    Recurrence {
        path: String,
        initial: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rhs: Option<Box<ProviderSpec>>,
        window: [i64; 2],
    },
    /// `sum_t coef_t(n) * provider_t`.
    Composite {
        terms: Vec<CompositeTerm>,
        window: [i64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeTerm {
    pub coef: String,
    pub provider: ProviderSpec,
}

impl ProviderSpec {
    pub fn window(&self) -> [i64; 2] {
        match self {
            ProviderSpec::Constant { window, .. }
            | ProviderSpec::Harmonic { window, .. }
            | ProviderSpec::File { window, .. }
            | ProviderSpec::Recurrence { window, .. }
            | ProviderSpec::Composite { window, .. } => *window,
        }
    }

    pub fn zero() -> Self {
        ProviderSpec::Constant {
            value: Some("0".into()),
            values: None,
            window: [0, 0],
        }
    }
}

#[derive(Debug)]
enum Source {
    Constant(Vec<Rational>),
    Harmonic(Vec<Expr>),
    File(Vec<Vec<Rational>>),
    Recurrence {
        rec: EpsRecurrence,
        init: Vec<Vec<Rational>>,
        rhs: Option<Box<MomentProvider>>,
        cache: Mutex<Option<(usize, Vec<Vec<Rational>>)>>,
    },
    Composite(Vec<(Expr, MomentProvider)>),
}

/// A source of per-eps-order moment streams `G_k(0..=mu)` for one `g_i`.
#[derive(Debug)]
pub struct MomentProvider {
    spec: ProviderSpec,
    window: EpsWindow,
    source: Source,
}

impl MomentProvider {
    /// Build from a descriptor; relative file paths are resolved against `base`.
    pub fn from_spec(spec: &ProviderSpec, base: Option<&Path>) -> Result<Self> {
        let [l, r] = spec.window();
        let window = EpsWindow::new(l, r)?;
        let nlayers = window.len();
        let source = match spec {
            ProviderSpec::Constant { value, values, .. } => {
                let layers = match (value, values) {
                    (Some(v), None) => {
                        let p = parse_eps_poly(v)?;
                        if let Some(v) = p.valuation() {
                            let top = p.degree().unwrap() as i64;
                            if (v as i64) < l || top > r {
                                return Err(Error::InvalidArgument(format!(
                                    "constant '{}' has eps-orders outside its window [{l}, {r}]",
                                    spec_value(value)
                                )));
                            }
                        }
                        window.orders().map(|k| eps_coeff(&p, k)).collect()
                    }
                    (None, Some(vs)) => {
                        if vs.len() != nlayers {
                            return Err(Error::InvalidArgument(format!(
                                "constant provider lists {} values for {} eps-orders",
                                vs.len(),
                                nlayers
                            )));
                        }
                        vs.iter()
                            .map(|v| rational::parse_rational(v))
                            .collect::<Result<_>>()?
                    }
                    _ => {
                        return Err(Error::InvalidArgument(
                            "constant provider needs exactly one of 'value' or 'values'".into(),
                        ))
                    }
                };
                Source::Constant(layers)
            }
            ProviderSpec::Harmonic { expr, layers, .. } => {
                let srcs: Vec<String> = match (expr, layers) {
                    (Some(e), None) => vec![e.clone()],
                    (None, Some(ls)) => ls.clone(),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "harmonic provider needs exactly one of 'expr' or 'layers'".into(),
                        ))
                    }
                };
                if srcs.len() > nlayers {
                    return Err(Error::InvalidArgument(format!(
                        "harmonic provider lists {} layers for {} eps-orders",
                        srcs.len(),
                        nlayers
                    )));
                }
                let mut exprs = srcs
                    .iter()
                    .map(|s| parse_expr(s))
                    .collect::<Result<Vec<_>>>()?;
                exprs.resize(nlayers, Expr::Num(Rational::ZERO));
                Source::Harmonic(exprs)
            }
            ProviderSpec::File { paths, .. } => {
                if paths.len() != nlayers {
                    return Err(Error::InvalidArgument(format!(
                        "file provider lists {} paths for {} eps-orders",
                        paths.len(),
                        nlayers
                    )));
                }
                let layers = paths
                    .iter()
                    .map(|p| MomentFile::read(&formats::resolve(base, p)).map(|m| m.values))
                    .collect::<Result<_>>()?;
                Source::File(layers)
            }
            ProviderSpec::Recurrence {
                path, initial, rhs, ..
            } => {
                let file = RecurrenceFile::read(&formats::resolve(base, path))?;
                let (rec, u) = EpsRecurrence::normalized(file.coeffs.clone(), 0)?;
                if u != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "recurrence '{path}' has a common factor ep^{u}; divide it out"
                    )));
                }
                if initial.len() > nlayers {
                    return Err(Error::InvalidArgument(format!(
                        "recurrence provider lists {} initial layers for {} eps-orders",
                        initial.len(),
                        nlayers
                    )));
                }
                let mut init = initial
                    .iter()
                    .map(|vs| {
                        vs.iter()
                            .map(|v| rational::parse_rational(v))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                init.resize(nlayers, Vec::new());
                let rhs = match (rhs, &file.rhs) {
                    (Some(spec), _) => Some(Box::new(MomentProvider::from_spec(spec, base)?)),
                    (None, Some(p)) => Some(Box::new(MomentProvider::from_spec(
                        &ProviderSpec::File {
                            paths: vec![p.clone()],
                            window: [0, 0],
                        },
                        base,
                    )?)),
                    (None, None) => None,
                };
                Source::Recurrence {
                    rec,
                    init,
                    rhs,
                    cache: Mutex::new(None),
                }
            }
            ProviderSpec::Composite { terms, .. } => Source::Composite(
                terms
                    .iter()
                    .map(|t| {
                        Ok((
                            parse_expr(&t.coef)?,
                            MomentProvider::from_spec(&t.provider, base)?,
                        ))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(MomentProvider {
            spec: spec.clone(),
            window,
            source,
        })
    }

    pub fn constant(c: Rational) -> Self {
        let spec = ProviderSpec::Constant {
            value: None,
            values: Some(vec![rational::format_rational(&c)]),
            window: [0, 0],
        };
        Self::from_spec(&spec, None).expect("valid constant provider")
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    pub fn window(&self) -> EpsWindow {
        self.window
    }

    /// Number of moments available per order; `None` when unbounded.
    pub fn capacity(&self) -> Option<usize> {
        match &self.source {
            Source::File(layers) => layers.iter().map(|l| l.len()).min(),
            Source::Recurrence { rhs, .. } => rhs.as_ref().and_then(|r| r.capacity()),
            Source::Composite(terms) => terms.iter().filter_map(|(_, p)| p.capacity()).min(),
            _ => None,
        }
    }

    /// `G_k(0), ..., G_k(mu)`.
    pub fn moments(&self, k: i64, mu: usize) -> Result<Vec<Rational>> {
        if !self.window.contains(k) {
            return Err(Error::WindowShortfall {
                what: format!(
                    "provider window [{}, {}]",
                    self.window.low, self.window.high
                ),
                needed: k,
                available: if k > self.window.high {
                    self.window.high
                } else {
                    self.window.low
                },
            });
        }
        let idx = (k - self.window.low) as usize;
        match &self.source {
            Source::Constant(layers) => Ok(vec![layers[idx].clone(); mu + 1]),
            Source::Harmonic(exprs) => {
                let e = &exprs[idx];
                if e.is_zero_constant() {
                    return Ok(vec![Rational::ZERO; mu + 1]);
                }
                let mut cache = HarmonicCache::default();
                (0..=mu as i64).map(|n| e.eval_at(n, &mut cache)).collect()
            }
            Source::File(layers) => {
                let l = &layers[idx];
                if l.len() < mu + 1 {
                    return Err(Error::CapacityShortfall {
                        what: format!("file provider, eps-order {k}"),
                        needed: mu + 1,
                        available: l.len(),
                    });
                }
                Ok(l[..=mu].to_vec())
            }
            Source::Recurrence {
                rec,
                init,
                rhs,
                cache,
            } => {
                let mut guard = cache.lock().expect("provider cache");
                if let Some((have, layers)) = guard.as_ref() {
                    if *have >= mu {
                        return Ok(layers[idx][..=mu].to_vec());
                    }
                }
                let layers = self.run_recurrence(rec, init, rhs.as_deref(), mu)?;
                let out = layers[idx][..=mu].to_vec();
                *guard = Some((mu, layers));
                Ok(out)
            }
            Source::Composite(terms) => {
                let mut acc = vec![Rational::ZERO; mu + 1];
                for (coef, sub) in terms {
                    if k < sub.window.low {
                        continue;
                    }
                    let s = sub.moments(k, mu)?;
                    let mut cache = HarmonicCache::default();
                    for (n, (a, v)) in acc.iter_mut().zip(&s).enumerate() {
                        if v.is_zero() {
                            continue;
                        }
                        *a += coef.eval_at(n as i64, &mut cache)? * v;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// True when every order, inside the window or not, is zero.
    pub fn is_identically_zero(&self) -> bool {
        match &self.source {
            Source::Constant(layers) => layers.iter().all(|c| c.is_zero()),
            Source::Harmonic(exprs) => exprs.iter().all(|e| e.is_zero_constant()),
            Source::Composite(terms) => terms.iter().all(|(_, p)| p.is_identically_zero()),
            _ => false,
        }
    }

    /// Layer `k`, treating orders below the window as zero.
    pub fn layer_or_zero(&self, k: i64, mu: usize) -> Result<Vec<Rational>> {
        if k < self.window.low {
            Ok(vec![Rational::ZERO; mu + 1])
        } else {
            self.moments(k, mu)
        }
    }

    fn run_recurrence(
        &self,
        rec: &EpsRecurrence,
        init: &[Vec<Rational>],
        rhs: Option<&MomentProvider>,
        mu: usize,
    ) -> Result<Vec<Vec<Rational>>> {
        let w = self.window;
        let lens = crate::engine::eps_layer_lengths(rec, w, mu);
        let layers = w
            .orders()
            .zip(&lens)
            .map(|(k, &len)| {
                let need = len.saturating_sub(rec.meta().d_prime);
                match rhs {
                    Some(p) if need > 0 => p.layer_or_zero(k, need - 1),
                    _ => Ok(vec![Rational::ZERO; need]),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let rhs_stream = LayeredStream::new(w.low, layers);
        let mut iv = InitialValues::default();
        for (k, v) in w.orders().zip(init) {
            iv.set(0, k, v.clone());
        }
        let lm = eps_layered_propagate(rec, &rhs_stream, &iv, 0, w, mu)?;
        Ok(lm.layers)
    }
}

fn spec_value(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("")
}

fn eps_coeff(p: &Poly, k: i64) -> Rational {
    if k < 0 {
        Rational::ZERO
    } else {
        p.coeff(k as usize)
    }
}

/// `h_i D_x f_i = sum_j A_ij f_j + g_i` with `A` a square matrix of rational
/// functions in (x, ep) and optional row factors `h_i` (default 1).
#[derive(Debug)]
pub struct CoupledSystem {
    pub name: String,
    lhs: Vec<RatFunc>,
    raw: Vec<Vec<RatFunc>>,
    /// `A_ij / h_i`.
    matrix: Vec<Vec<RatFunc>>,
    rhs: Vec<MomentProvider>,
}

impl CoupledSystem {
    pub fn new(name: &str, matrix: Vec<Vec<RatFunc>>, rhs: Vec<MomentProvider>) -> Result<Self> {
        let lhs = vec![RatFunc::one(Var::X); matrix.len()];
        Self::with_lhs(name, lhs, matrix, rhs)
    }

    /// System with row factors: `lhs[i] D f_i = sum_j matrix[i][j] f_j + g_i`.
    pub fn with_lhs(
        name: &str,
        lhs: Vec<RatFunc>,
        matrix: Vec<Vec<RatFunc>>,
        rhs: Vec<MomentProvider>,
    ) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidSystem("empty matrix".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "matrix row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|e| e.outer() != Var::X) {
                return Err(Error::InvalidSystem("matrix entries must be in x and ep".into()));
            }
        }
        if rhs.len() != n {
            return Err(Error::InvalidSystem(format!(
                "{} rhs providers for a {n}x{n} system",
                rhs.len()
            )));
        }
        if lhs.len() != n {
            return Err(Error::InvalidSystem(format!(
                "{} row factors for a {n}x{n} system",
                lhs.len()
            )));
        }
        if let Some(i) = lhs.iter().position(|h| h.is_zero()) {
            return Err(Error::InvalidSystem(format!("row factor {} is zero", i + 1)));
        }
        let effective = matrix
            .iter()
            .zip(&lhs)
            .map(|(row, h)| {
                row.iter()
                    .map(|a| (a / h).expect("nonzero row factor"))
                    .collect()
            })
            .collect();
        Ok(CoupledSystem {
            name: name.to_string(),
            lhs,
            raw: matrix,
            matrix: effective,
            rhs,
        })
    }

    /// Homogeneous system `D_x f = A f`.
    pub fn homogeneous(name: &str, matrix: Vec<Vec<RatFunc>>) -> Result<Self> {
        let rhs = (0..matrix.len())
            .map(|_| MomentProvider::constant(Rational::ZERO))
            .collect();
        Self::new(name, matrix, rhs)
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    /// `A` with the row factors divided out, so that `D f = matrix f + ...`.
    pub fn matrix(&self) -> &[Vec<RatFunc>] {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> &RatFunc {
        &self.matrix[i][j]
    }

    pub fn row_factors(&self) -> &[RatFunc] {
        &self.lhs
    }

    /// Coefficient `1 / h_i` of `g_i` in `D f = matrix f + ...`.
    pub fn provider_coefficient(&self, i: usize) -> RatFunc {
        self.lhs[i].inv().expect("nonzero row factor")
    }

    pub fn providers(&self) -> &[MomentProvider] {
        &self.rhs
    }

    /// Whether `A` is singular as a matrix over the rational functions.
    pub fn is_singular(&self) -> bool {
        let n = self.size();
        let mut m: Vec<Vec<RatFunc>> = self.matrix.clone();
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
                return true;
            };
            m.swap(col, piv);
            let inv = m[col][col].inv().expect("nonzero pivot");
            for r in col + 1..n {
                if m[r][col].is_zero() {
                    continue;
                }
                let f = &m[r][col] * &inv;
                for c in col..n {
                    let t = &f * &m[col][c];
                    m[r][c] = &m[r][c] - &t;
                }
            }
        }
        false
    }

    /// Non-fatal remarks about the input.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.is_singular() {
            w.push("matrix A is singular over the rational functions".to_string());
        }
        w
    }

    /// The system document (inverse of [`parse_system`]).
    pub fn to_document(&self) -> String {
        let doc = SystemDocument {
            name: self.name.clone(),
            lambda: self.size(),
            lhs: if self.lhs.iter().all(|h| h.is_one()) {
                None
            } else {
                Some(self.lhs.iter().map(|h| h.to_string()).collect())
            },
            matrix: self
                .raw
                .iter()
                .map(|row| row.iter().map(|e| e.to_string()).collect())
                .collect(),
            rhs: self
                .rhs
                .iter()
                .map(|p| serde_json::to_value(p.spec()).expect("serializable"))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDocument {
    #[serde(default)]
    name: String,
    lambda: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lhs: Option<Vec<String>>,
    matrix: Vec<Vec<String>>,
    rhs: Vec<Value>,
}

/// Parse a system document (JSON). File providers resolve relative paths
/// against `base`.
pub fn parse_system(text: &str, base: Option<&Path>) -> Result<CoupledSystem> {
    let doc: SystemDocument = serde_json::from_str(text).map_err(|e| {
        Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    let n = doc.lambda;
    if n == 0 {
        return Err(Error::parse("lambda", "system size must be positive"));
    }
    if doc.matrix.len() != n {
        return Err(Error::parse(
            "matrix",
            format!("{} rows for lambda = {n}; the matrix must be square", doc.matrix.len()),
        ));
    }
    let mut matrix = Vec::with_capacity(n);
    for (i, row) in doc.matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::parse(
                format!("matrix[{i}]"),
                format!("{} entries for lambda = {n}; the matrix must be square", row.len()),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for (j, src) in row.iter().enumerate() {
            let loc = format!("matrix[{i}][{j}] '{src}'");
            let e = parse_expr(src)
                .and_then(|e| e.to_ratfunc(Var::X))
                .map_err(|e| relocate(e, loc))?;
            out.push(e);
        }
        matrix.push(out);
    }
    if doc.rhs.len() != n {
        return Err(Error::parse(
            "rhs",
            format!("{} providers for lambda = {n}", doc.rhs.len()),
        ));
    }
    let mut rhs = Vec::with_capacity(n);
    for (i, v) in doc.rhs.into_iter().enumerate() {
        let loc = format!("rhs[{i}]");
        let spec: ProviderSpec =
            serde_json::from_value(v).map_err(|e| Error::parse(loc.clone(), e.to_string()))?;
        rhs.push(MomentProvider::from_spec(&spec, base).map_err(|e| relocate(e, loc))?);
    }
    let lhs = match &doc.lhs {
        None => vec![RatFunc::one(Var::X); n],
        Some(ls) => {
            if ls.len() != n {
                return Err(Error::parse(
                    "lhs",
                    format!("{} row factors for lambda = {n}", ls.len()),
                ));
            }
            ls.iter()
                .enumerate()
                .map(|(i, src)| {
                    let h = parse_expr(src)
                        .and_then(|e| e.to_ratfunc(Var::X))
                        .map_err(|e| relocate(e, format!("lhs[{i}] '{src}'")))?;
                    if h.is_zero() {
                        return Err(Error::parse(format!("lhs[{i}]"), "row factor is zero"));
                    }
                    Ok(h)
                })
                .collect::<Result<_>>()?
        }
    };
    CoupledSystem::with_lhs(&doc.name, lhs, matrix, rhs)
}

pub fn read_system(path: &Path) -> Result<CoupledSystem> {
    let text = formats::read_text(path)?;
    parse_system(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int, BiPoly};

    fn doc(matrix: &str, rhs: &str) -> String {
        format!(r#"{{"lambda": 2, "matrix": {matrix}, "rhs": {rhs}}}"#)
    }

    const ZERO2: &str = r#"[{"kind":"constant","value":"0","window":[0,0]},
                            {"kind":"constant","value":"0","window":[0,0]}]"#;

    #[test]
    fn one_by_one() {
        let s = parse_system(
            r#"{"lambda":1,"matrix":[["1"]],"rhs":[{"kind":"constant","value":"0","window":[0,0]}]}"#,
            None,
        )
        .unwrap();
        assert_eq!(s.size(), 1);
        assert!(s.entry(0, 0).is_one());
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn denominators_survive_round_trip() {
        let s = parse_system(&doc(r#"[["0","1/(1-x)^2"],["0","0"]]"#, ZERO2), None).unwrap();
        let e = s.entry(0, 1);
        let one_minus_x = BiPoly::from_terms(Var::X, &[(0, 0, int(1)), (1, 0, int(-1))]);
        assert_eq!(e.den(), &(&one_minus_x * &one_minus_x));
        let again = parse_system(&s.to_document(), None).unwrap();
        assert_eq!(again.matrix(), s.matrix());
        assert_eq!(again.to_document(), s.to_document());
        assert!(s.is_singular());
    }

    #[test]
    fn row_factors() {
        let text = r#"{"lambda":1,"lhs":["1-x"],"matrix":[["1"]],
                       "rhs":[{"kind":"constant","value":"1","window":[0,0]}]}"#;
        let s = parse_system(text, None).unwrap();
        let one_minus_x = BiPoly::from_terms(Var::X, &[(0, 0, int(1)), (1, 0, int(-1))]);
        let h = RatFunc::from_poly(one_minus_x);
        assert!((&h * s.entry(0, 0)).is_one());
        assert!((&h * &s.provider_coefficient(0)).is_one());
        let again = parse_system(&s.to_document(), None).unwrap();
        assert_eq!(again.to_document(), s.to_document());
        assert!(s.to_document().contains("\"lhs\""));
        let e = parse_system(&text.replace("1-x", "0"), None).unwrap_err();
        assert!(e.to_string().contains("lhs[0]"), "{e}");
    }

    #[test]
    fn rejects_bad_documents() {
        let e = parse_system(&doc(r#"[["1/(x-x)","0"],["0","0"]]"#, ZERO2), None).unwrap_err();
        assert_eq!(e.class(), "parse-error");
        assert!(e.to_string().contains("matrix[0][0]"), "{e}");
        assert!(e.to_string().contains("zero denominator"), "{e}");

        let e = parse_system(&doc(r#"[["1","0"],["0"]]"#, ZERO2), None).unwrap_err();
        assert!(e.to_string().contains("matrix[1]"), "{e}");

        let bad = r#"[{"kind":"constant","value":"0","window":[0,0]},
                      {"kind":"spline","window":[0,0]}]"#;
        let e = parse_system(&doc(r#"[["1","0"],["0","1"]]"#, bad), None).unwrap_err();
        assert!(e.to_string().contains("rhs[1]"), "{e}");
        assert!(e.to_string().contains("spline"), "{e}");
    }

    #[test]
    fn provider_examples() {
        let c = MomentProvider::constant(int(1));
        assert_eq!(c.moments(0, 4).unwrap(), vec![int(1); 5]);
        assert!(c.moments(1, 4).is_err());

        let h = MomentProvider::from_spec(
            &ProviderSpec::Harmonic {
                expr: Some("S_1(n)".into()),
                layers: None,
                window: [0, 0],
            },
            None,
        )
        .unwrap();
        let m = h.moments(0, 3).unwrap();
        assert_eq!(m, vec![int(0), int(1), frac(3, 2), frac(11, 6)]);
        assert_eq!(h.moments(0, 3).unwrap(), m);

        let eps = MomentProvider::from_spec(
            &ProviderSpec::Constant {
                value: Some("2 - 3*ep".into()),
                values: None,
                window: [0, 2],
            },
            None,
        )
        .unwrap();
        assert_eq!(eps.moments(1, 1).unwrap(), vec![int(-3); 2]);
        assert_eq!(eps.moments(2, 0).unwrap(), vec![int(0)]);
    }

    #[test]
    fn file_capacity() {
        let dir = std::env::temp_dir().join(format!("lmm-sys-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mf = MomentFile::new((0..100).map(int).collect());
        mf.write(&dir.join("g.txt")).unwrap();
        let p = MomentProvider::from_spec(
            &ProviderSpec::File {
                paths: vec!["g.txt".into()],
                window: [0, 0],
            },
            Some(&dir),
        )
        .unwrap();
        assert_eq!(p.capacity(), Some(100));
        assert_eq!(p.moments(0, 99).unwrap().len(), 100);
        let e = p.moments(0, 200).unwrap_err();
        assert_eq!(e.class(), "capacity-shortfall");
        assert!(e.to_string().contains("short by 101"), "{e}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn composite_matches_post_hoc_combination() {
        let h = ProviderSpec::Harmonic {
            expr: Some("S_1(n)".into()),
            layers: None,
            window: [0, 0],
        };
        let one = ProviderSpec::Constant {
            value: Some("1".into()),
            values: None,
            window: [0, 0],
        };
        let comp = ProviderSpec::Composite {
            terms: vec![
                CompositeTerm {
                    coef: "1/(n+1)".into(),
                    provider: h.clone(),
                },
                CompositeTerm {
                    coef: "n^2".into(),
                    provider: one.clone(),
                },
            ],
            window: [0, 0],
        };
        let c = MomentProvider::from_spec(&comp, None).unwrap();
        let hs = MomentProvider::from_spec(&h, None).unwrap().moments(0, 10).unwrap();
        let got = c.moments(0, 10).unwrap();
        for n in 0..=10usize {
            let want = &hs[n] / int(n as i64 + 1) + int((n * n) as i64);
            assert_eq!(got[n], want);
        }
    }
}
