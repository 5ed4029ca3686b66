//! Moment propagation: single recurrences, eps-layered recurrences, the
//! whole uncoupling pipeline, and a direct coefficient-comparison oracle.

use std::collections::BTreeMap;

use crate::arith::{BiPoly, EpsSeries, Poly, Rational};
use crate::error::{Error, Result};
use crate::ode2rec::{
    normalize_stage, ode_to_recurrence_univariate, order_bound, EpsRecurrence, NormalizedStage,
    Recurrence, RecurrenceMeta,
};
use crate::system::{CoupledSystem, EpsWindow, InitialValues};
use crate::uncouple::{apply_linop, gauss_uncouple, term_shape, LinOpCombination, Source};

pub use crate::stream::LayeredStream;

/// Moments `F_{j,k}(0..=mu)` of one component for every order `k` of a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredMoments {
    pub component: usize,
    pub window: EpsWindow,
    pub mu: usize,
    pub layers: Vec<Vec<Rational>>,
}

impl LayeredMoments {
    pub fn layer(&self, k: i64) -> Option<&[Rational]> {
        if self.window.contains(k) {
            Some(&self.layers[(k - self.window.low) as usize])
        } else {
            None
        }
    }

    pub fn to_stream(&self) -> LayeredStream {
        LayeredStream::new(self.window.low, self.layers.clone())
    }
}

/// `F(0..=mu)` from `sum_i a_i(m) F(m+i) = rhs(m)`.
///
/// `init` must hold at least [`RecurrenceMeta::sufficient_initial_count`]
/// values (capped at `mu + 1`); further values are checked, not trusted.
pub fn propagate(
    rec: &Recurrence,
    rhs: &[Rational],
    init: &[Rational],
    mu: usize,
) -> Result<Vec<Rational>> {
    propagate_labeled(rec, rhs, init, mu, 0, 0)
}

/// [`propagate`] with the component (0-based) and eps-order used in errors.
pub fn propagate_labeled(
    rec: &Recurrence,
    rhs: &[Rational],
    init: &[Rational],
    mu: usize,
    component: usize,
    layer: i64,
) -> Result<Vec<Rational>> {
    let d = rec.order();
    let required = rec.meta().sufficient_initial_count().min(mu + 1);
    if init.len() < required {
        return Err(Error::InitShortfall {
            component: component + 1,
            layer,
            required,
            provided: init.len(),
        });
    }
    let steps = (mu + 1).saturating_sub(d);
    if rhs.len() < steps {
        return Err(Error::InsufficientLength {
            what: format!("rhs of f{}, eps-order {layer}", component + 1),
            extra: steps - rhs.len(),
        });
    }
    let mut f: Vec<Rational> = init.iter().take(mu + 1).cloned().collect();
    let coeffs = rec.coeffs();
    for m in 0..steps {
        let t = m + d;
        let mut s = rhs[m].clone();
        for (i, a) in coeffs[..d].iter().enumerate() {
            if a.is_zero() || f[m + i].is_zero() {
                continue;
            }
            s -= a.eval_int(m as i64) * &f[m + i];
        }
        let lead = coeffs[d].eval_int(m as i64);
        if t < f.len() {
            if lead.clone() * &f[t] != s {
                return Err(Error::InitInconsistent {
                    component: component + 1,
                    layer,
                    index: t,
                });
            }
        } else if lead.is_zero() {
            return Err(Error::InitShortfall {
                component: component + 1,
                layer,
                required: t + 1,
                provided: init.len(),
            });
        } else {
            f.push(s / lead);
        }
    }
    Ok(f)
}

/// How far below order `k` the eps-dependent part of `rec` reaches in `n`:
/// `max(i - d')` over the coefficients `[ep^b] a_i` with `b >= 1`.
fn eps_reach(rec: &EpsRecurrence) -> usize {
    let dp = rec.meta().d_prime as i64;
    rec.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.eps_degree().unwrap_or(0) >= 1)
        .map(|(i, _)| (i as i64 - dp).max(0) as usize)
        .max()
        .unwrap_or(0)
}

/// Per-order lengths needed so that the top order still gets `mu + 1` moments.
pub fn eps_layer_lengths(rec: &EpsRecurrence, window: EpsWindow, mu: usize) -> Vec<usize> {
    let e = eps_reach(rec);
    window
        .orders()
        .map(|k| mu + 1 + (window.high - k) as usize * e)
        .collect()
}

/// Solve `sum_i a_i(n, ep) F(n+i, ep) = rhs(n, ep)` order by order in `ep`.
/// Layer `k` uses the `ep`-free recurrence `a_i(n, 0)` with the rhs updated
/// by the already computed lower layers.
pub fn eps_layered_propagate(
    rec: &EpsRecurrence,
    rhs: &LayeredStream,
    init: &InitialValues,
    component: usize,
    window: EpsWindow,
    mu: usize,
) -> Result<LayeredMoments> {
    let base = rec.at_eps_zero();
    let dp = base.order();
    let lens = eps_layer_lengths(rec, window, mu);
    let mut corrections: Vec<(usize, usize, Poly)> = Vec::new();
    for (i, a) in rec.coeffs().iter().enumerate() {
        for b in 1..=a.eps_degree().unwrap_or(0) {
            let c = a.eps_coeff(b);
            if !c.is_zero() {
                corrections.push((b, i, c));
            }
        }
    }
    if window.high > rhs.high() {
        return Err(Error::WindowShortfall {
            what: format!("rhs of f{}", component + 1),
            needed: window.high,
            available: rhs.high(),
        });
    }
    let mut layers: Vec<Vec<Rational>> = Vec::with_capacity(window.len());
    for (idx, k) in window.orders().enumerate() {
        let len = lens[idx];
        let steps = len.saturating_sub(dp);
        let have = rhs.len_at(k);
        if have < steps {
            return Err(Error::InsufficientLength {
                what: format!("rhs of f{}, eps-order {k}", component + 1),
                extra: steps - have,
            });
        }
        let mut b: Vec<Rational> = (0..steps).map(|m| rhs.get(k, m).unwrap()).collect();
        for (eb, i, c) in &corrections {
            let src = k - *eb as i64;
            if src < window.low {
                continue;
            }
            let prev = &layers[(src - window.low) as usize];
            for (m, bm) in b.iter_mut().enumerate() {
                let v = &prev[m + i];
                if !v.is_zero() {
                    *bm -= c.eval_int(m as i64) * v;
                }
            }
        }
        let f = if len == 0 {
            Vec::new()
        } else {
            propagate_labeled(&base, &b, init.get(component, k), len - 1, component, k)?
        };
        layers.push(f);
    }
    let layers = layers.into_iter().map(|mut l| {
        l.truncate(mu + 1);
        l
    });
    Ok(LayeredMoments {
        component,
        window,
        mu,
        layers: layers.collect(),
    })
}

/// Everything decided about one stage before any moment is computed.
#[derive(Clone, Debug)]
pub struct StagePlan {
    pub component: usize,
    pub normalized: NormalizedStage,
    /// Recurrence of the normalized lhs; `shift` is its smallest `x`-shift.
    pub recurrence: Recurrence,
    pub shift: i64,
    pub meta: RecurrenceMeta,
    /// Order of the recurrence obtained without normalization.
    pub unnormalized_order: usize,
    pub bound: usize,
    /// Orders computed (the requested window, widened for later stages).
    pub window: EpsWindow,
    /// Moments computed per order.
    pub lens: Vec<usize>,
    /// Initial values consumed per order.
    pub init_counts: Vec<usize>,
    rhs: LinOpCombination,
    beta_low: i64,
    beta_lens: Vec<usize>,
}

impl StagePlan {
    /// Hash of the stage recurrence, as stored in moment-file headers.
    pub fn recurrence_hash(&self) -> String {
        self.recurrence.to_file().hash()
    }

    pub fn init_count(&self, k: i64) -> usize {
        if self.window.contains(k) {
            self.init_counts[(k - self.window.low) as usize]
        } else {
            0
        }
    }

    /// `h`-length needed for `n` moments, and the matching `gamma`-length.
    fn gamma_len(&self, n: usize) -> usize {
        let s_max = self.shift + self.recurrence.order() as i64;
        let nh = (n as i64 - s_max).max(0) as usize;
        if nh == 0 {
            0
        } else {
            nh + self.normalized.record.k
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelinePlan {
    /// In solve order.
    pub stages: Vec<StagePlan>,
    pub requested: Vec<EpsWindow>,
    pub mu: usize,
    /// Per provider: lowest order and the moments needed per order.
    pub provider_needs: Vec<Option<(i64, Vec<usize>)>>,
}

impl PipelinePlan {
    pub fn stage_of(&self, component: usize) -> &StagePlan {
        self.stages
            .iter()
            .find(|s| s.component == component)
            .expect("every component has a stage")
    }
}

fn merge_need(need: &mut BTreeMap<i64, usize>, k: i64, len: usize) {
    let e = need.entry(k).or_insert(0);
    *e = (*e).max(len);
}

/// Plan all stages: uncouple, normalize, convert, and propagate length and
/// window requirements backwards from the requested windows.
pub fn plan_pipeline(sys: &CoupledSystem, windows: &[EpsWindow], mu: usize) -> Result<PipelinePlan> {
    let size = sys.size();
    if windows.len() != size {
        return Err(Error::InvalidArgument(format!(
            "{} windows given for {size} components",
            windows.len()
        )));
    }
    let unc = gauss_uncouple(sys)?;
    let zero_providers: Vec<bool> = sys
        .providers()
        .iter()
        .map(|p| p.is_identically_zero())
        .collect();
    let mut comp_need: Vec<BTreeMap<i64, usize>> = windows
        .iter()
        .map(|w| w.orders().map(|k| (k, mu + 1)).collect())
        .collect();
    let mut prov_need: Vec<BTreeMap<i64, usize>> = vec![BTreeMap::new(); size];
    let mut plans = Vec::with_capacity(size);
    for stage in unc.stages.iter().rev() {
        let j = stage.component;
        let normalized = normalize_stage(stage)?;
        let (recurrence, shift) = ode_to_recurrence_univariate(&normalized.lhs)?;
        let unnormalized_order = crate::ode2rec::ode_to_recurrence(&stage.alphas)?.order();
        let meta = recurrence.meta();
        let bound = order_bound(stage, &normalized.record);
        let mut rhs = LinOpCombination::default();
        for t in &stage.rhs.terms {
            if let Source::Provider(i) = t.source {
                if zero_providers[i] {
                    continue;
                }
            }
            rhs.terms.push(t.clone());
        }
        let low = windows[j].low;
        let high = comp_need[j]
            .keys()
            .next_back()
            .copied()
            .unwrap_or(windows[j].high)
            .max(windows[j].high);
        let window = EpsWindow::new(low, high)?;
        let mut plan = StagePlan {
            component: j,
            normalized,
            recurrence,
            shift,
            meta,
            unnormalized_order,
            bound,
            window,
            lens: vec![0; window.len()],
            init_counts: vec![0; window.len()],
            rhs,
            beta_low: 0,
            beta_lens: Vec::new(),
        };
        for k in window.orders().rev() {
            let idx = (k - low) as usize;
            let mut n = comp_need[j].get(&k).copied().unwrap_or(0);
            if k < high {
                n = n.max(plan.lens[idx + 1]);
            }
            for st in &plan.normalized.self_terms {
                let kk = k + st.eps as i64;
                if kk <= high {
                    let ng = plan.gamma_len(plan.lens[(kk - low) as usize]);
                    if ng > 0 {
                        n = n.max(ng + st.deriv);
                    }
                }
            }
            plan.lens[idx] = n;
            plan.init_counts[idx] = meta.sufficient_initial_count().min(n);
        }
        let u = plan.normalized.record.u as i64;
        let shapes = plan
            .rhs
            .terms
            .iter()
            .map(|t| {
                term_shape(t).map_err(|e| match e {
                    Error::NonExpandable(m) => {
                        Error::NonExpandable(format!("stage f{}: {m}", j + 1))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let src_low = |s: Source| match s {
            Source::Provider(i) => sys.providers()[i].window().low,
            Source::Component(m) => windows[m].low,
        };
        let reach = plan
            .rhs
            .terms
            .iter()
            .zip(&shapes)
            .map(|(t, sh)| src_low(t.source) + sh.eps_shift)
            .min()
            .unwrap_or(low + u);
        let beta_low = reach.min(low + u);
        let beta_high = high + u;
        let below = plan.gamma_len(plan.lens[0]);
        let beta_lens: Vec<usize> = (beta_low..=beta_high)
            .map(|kb| {
                if kb < low + u {
                    below
                } else {
                    plan.gamma_len(plan.lens[(kb - u - low) as usize])
                }
            })
            .collect();
        let beta_len_at = |kb: i64| beta_lens[(kb.max(beta_low) - beta_low) as usize];
        for (t, sh) in plan.rhs.terms.iter().zip(&shapes) {
            let sl = src_low(t.source);
            let top = beta_high - sh.eps_shift;
            let need = match t.source {
                Source::Provider(i) => &mut prov_need[i],
                Source::Component(m) => &mut comp_need[m],
            };
            if top < sl {
                merge_need(need, sl, 0);
                continue;
            }
            for kappa in sl..=top {
                merge_need(need, kappa, beta_len_at(kappa + sh.eps_shift) + sh.extra_len);
            }
            if let Source::Provider(i) = t.source {
                let w = sys.providers()[i].window();
                if top > w.high {
                    return Err(Error::WindowShortfall {
                        what: format!("provider g{} for stage f{}", i + 1, j + 1),
                        needed: top,
                        available: w.high,
                    });
                }
            }
        }
        plan.beta_low = beta_low;
        plan.beta_lens = beta_lens;
        plans.push(plan);
    }
    plans.reverse();
    let provider_needs = prov_need
        .into_iter()
        .map(|need| {
            let low = *need.keys().next()?;
            let high = *need.keys().next_back()?;
            let mut lens: Vec<usize> = (low..=high)
                .map(|k| need.get(&k).copied().unwrap_or(0))
                .collect();
            for i in (0..lens.len().saturating_sub(1)).rev() {
                lens[i] = lens[i].max(lens[i + 1]);
            }
            Some((low, lens))
        })
        .collect();
    Ok(PipelinePlan {
        stages: plans,
        requested: windows.to_vec(),
        mu,
        provider_needs,
    })
}

/// Full output of a pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    /// Per component, every computed order at its computed length.
    pub streams: Vec<LayeredStream>,
    /// Per component and computed order, the recurrence rhs `b(m)` used.
    pub rhs: Vec<Vec<Vec<Rational>>>,
}

pub fn run_pipeline(sys: &CoupledSystem, plan: &PipelinePlan, init: &InitialValues) -> Result<PipelineRun> {
    let size = sys.size();
    let mut prov: Vec<Option<LayeredStream>> = Vec::with_capacity(size);
    for (i, need) in plan.provider_needs.iter().enumerate() {
        prov.push(match need {
            None => None,
            Some((low, lens)) => {
                let p = &sys.providers()[i];
                let layers = lens
                    .iter()
                    .enumerate()
                    .map(|(t, &len)| match len {
                        0 => Ok(Vec::new()),
                        _ => p.layer_or_zero(low + t as i64, len - 1),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(LayeredStream::new(*low, layers))
            }
        });
    }
    let mut comps: Vec<Option<LayeredStream>> = vec![None; size];
    let mut rhs_out: Vec<Vec<Vec<Rational>>> = vec![Vec::new(); size];
    for plan in &plan.stages {
        let j = plan.component;
        let what = format!("rhs of stage f{}", j + 1);
        let beta = if plan.rhs.is_zero() {
            LayeredStream::zero(plan.beta_low, &plan.beta_lens)
        } else {
            let lookup = |s: Source| match s {
                Source::Provider(i) => prov[i].as_ref(),
                Source::Component(m) => comps[m].as_ref(),
            };
            apply_linop(&plan.rhs, &lookup, plan.beta_low, &plan.beta_lens, &what)?
        };
        let low = plan.window.low;
        let u = plan.normalized.record.u as i64;
        for kb in plan.beta_low..low + u {
            if beta.layer(kb).unwrap().iter().any(|v| !v.is_zero()) {
                return Err(Error::InvalidArgument(format!(
                    "component f{} has a nonzero eps-order {} below its window low {low}",
                    j + 1,
                    kb - u
                )));
            }
        }
        let rec = &plan.recurrence;
        let rec_p = &plan.normalized.record.p;
        let k0 = plan.normalized.record.k;
        let mut layers: Vec<Vec<Rational>> = Vec::with_capacity(plan.window.len());
        let mut bs = Vec::with_capacity(plan.window.len());
        for k in plan.window.orders() {
            let idx = (k - low) as usize;
            let n = plan.lens[idx];
            let ng = plan.gamma_len(n);
            let mut gamma: Vec<Rational> = beta.layer(k + u).unwrap()[..ng].to_vec();
            for st in &plan.normalized.self_terms {
                let src = k - st.eps as i64;
                if src < low || ng == 0 {
                    continue;
                }
                let s = LayeredStream::single(layers[(src - low) as usize].clone())
                    .derivative(st.deriv)
                    .mul_bipoly(&BiPoly::from_outer(&st.coef));
                for (g, v) in gamma.iter_mut().zip(&s.layers()[0]) {
                    *g -= v;
                }
            }
            if !rec_p.is_one() && ng > 0 {
                gamma = LayeredStream::single(gamma).div_poly(rec_p)?.into_layers().remove(0);
            }
            if gamma.iter().take(k0).any(|v| !v.is_zero()) {
                return Err(Error::InvalidSystem(format!(
                    "stage f{}, eps-order {k}: rhs is not divisible by x^{k0}",
                    j + 1
                )));
            }
            let h: Vec<Rational> = gamma.into_iter().skip(k0).collect();
            let b: Vec<Rational> = if plan.shift >= 0 {
                let mut b = vec![Rational::ZERO; plan.shift as usize];
                b.extend(h);
                b
            } else {
                h.into_iter().skip((-plan.shift) as usize).collect()
            };
            let f = if n == 0 {
                Vec::new()
            } else {
                propagate_labeled(rec, &b, init.get(j, k), n - 1, j, k)?
            };
            layers.push(f);
            bs.push(b);
        }
        comps[j] = Some(LayeredStream::new(low, layers));
        rhs_out[j] = bs;
    }
    Ok(PipelineRun {
        streams: comps.into_iter().map(|c| c.expect("all stages run")).collect(),
        rhs: rhs_out,
    })
}

/// Moments of every component on its requested window, `mu + 1` per order.
pub fn pipeline_moments(
    sys: &CoupledSystem,
    init: &InitialValues,
    windows: &[EpsWindow],
    mu: usize,
) -> Result<Vec<LayeredMoments>> {
    let plan = plan_pipeline(sys, windows, mu)?;
    let run = run_pipeline(sys, &plan, init)?;
    Ok(truncate_run(&run, windows, mu))
}

/// Cut every component of a run down to its requested window and `mu + 1` moments.
pub fn truncate_run(run: &PipelineRun, windows: &[EpsWindow], mu: usize) -> Vec<LayeredMoments> {
    run.streams
        .iter()
        .zip(windows)
        .enumerate()
        .map(|(j, (s, w))| LayeredMoments {
            component: j,
            window: *w,
            mu,
            layers: w
                .orders()
                .map(|k| s.layer(k).expect("planned order")[..=mu].to_vec())
                .collect(),
        })
        .collect()
}

/// Recompute with every window raised by one order and compare the overlap.
pub fn verify_window(
    sys: &CoupledSystem,
    init: &InitialValues,
    windows: &[EpsWindow],
    mu: usize,
) -> Result<Vec<LayeredMoments>> {
    let base = pipeline_moments(sys, init, windows, mu)?;
    let wider: Vec<EpsWindow> = windows
        .iter()
        .map(|w| EpsWindow::new(w.low, w.high + 1))
        .collect::<Result<_>>()?;
    let more = pipeline_moments(sys, init, &wider, mu)?;
    for (a, b) in base.iter().zip(&more) {
        for k in a.window.orders() {
            if a.layer(k) != b.layer(k) {
                return Err(Error::OracleMismatch(format!(
                    "f{}, eps-order {k} changes when the window is widened",
                    a.component + 1
                )));
            }
        }
    }
    Ok(base)
}

/// Independent reference: clear each row to `h_i D f_i = sum_j At_ij f_j + h_i c_i g_i`
/// and compare coefficients of `x^n` directly, carrying every `F_j(n)` as a
/// truncated series in `ep`. Needs only `F_j(0)`.
pub fn direct_oracle(
    sys: &CoupledSystem,
    init: &[EpsSeries],
    windows: &[EpsWindow],
    mu: usize,
) -> Result<Vec<LayeredMoments>> {
    let size = sys.size();
    if init.len() != size || windows.len() != size {
        return Err(Error::InvalidArgument(format!(
            "oracle needs {size} initial series and windows"
        )));
    }
    let zero = |i: usize| sys.providers()[i].is_identically_zero();
    let mut lo = windows.iter().map(|w| w.low).min().unwrap();
    for s in init {
        if let Some(v) = s.valuation() {
            lo = lo.min(v);
        }
    }
    for i in (0..size).filter(|&i| !zero(i)) {
        lo = lo.min(sys.providers()[i].window().low);
    }
    let hi = windows.iter().map(|w| w.high).max().unwrap();
    let width = (hi - lo + 1) as usize;

    // rows[i] = (h_i, [At_i0, ..., At_i,size-1], h_i c_i) for D f = A f + c g
    let mut rows: Vec<(BiPoly, Vec<BiPoly>, BiPoly)> = Vec::with_capacity(size);
    for i in 0..size {
        let w = sys.provider_coefficient(i);
        let mut h = BiPoly::one(crate::arith::Var::X);
        for e in (0..size).map(|j| sys.entry(i, j)).chain([&w]) {
            let g = h.gcd(e.den());
            h = &h * &e.den().div_exact(&g).expect("gcd divides");
        }
        let cleared = |e: &crate::arith::RatFunc| {
            e.num() * &h.div_exact(e.den()).expect("lcm is a multiple")
        };
        let at: Vec<BiPoly> = (0..size).map(|j| cleared(sys.entry(i, j))).collect();
        let hw = cleared(&w);
        let h0 = h.coeff(0);
        if h0.is_zero() {
            return Err(Error::Singular(format!(
                "row {} has a pole at x = 0 (cleared leading factor {h})",
                i + 1
            )));
        }
        if !h0.coeff(0).is_zero() {
            rows.push((h, at, hw));
        } else {
            return Err(Error::NonExpandable(format!(
                "row {}: leading factor {h} vanishes at x = 0, ep = 0",
                i + 1
            )));
        }
    }

    // G_i(n) for n < mu, as dense eps vectors on [lo, hi]
    let mut g: Vec<Vec<Vec<Rational>>> = Vec::with_capacity(size);
    for i in 0..size {
        if zero(i) || mu == 0 {
            g.push(Vec::new());
            continue;
        }
        let p = &sys.providers()[i];
        if p.window().high < hi {
            return Err(Error::WindowShortfall {
                what: format!("provider g{} for the oracle", i + 1),
                needed: hi,
                available: p.window().high,
            });
        }
        let by_order: Vec<Vec<Rational>> = (lo..=hi)
            .map(|k| p.layer_or_zero(k, mu - 1))
            .collect::<Result<_>>()?;
        g.push(
            (0..mu)
                .map(|n| by_order.iter().map(|l| l[n].clone()).collect())
                .collect(),
        );
    }

    // multiply a dense eps vector by a polynomial in ep (nonnegative powers)
    let mul_eps = |acc: &mut [Rational], p: &Poly, v: &[Rational], sign: bool| {
        for (b, c) in p.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for t in b..width {
                if v[t - b].is_zero() {
                    continue;
                }
                let prod = c * &v[t - b];
                if sign {
                    acc[t] += prod;
                } else {
                    acc[t] -= prod;
                }
            }
        }
    };

    let mut f: Vec<Vec<Vec<Rational>>> = init
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if s.high() < hi {
                return Err(Error::WindowShortfall {
                    what: format!("initial series of f{}", j + 1),
                    needed: hi,
                    available: s.high(),
                });
            }
            Ok(vec![(lo..=hi).map(|k| s.coeff(k).unwrap()).collect::<Vec<_>>()])
        })
        .collect::<Result<_>>()?;
    for n in 0..mu {
        for i in 0..size {
            let (h, at, hw) = &rows[i];
            let mut acc = vec![Rational::ZERO; width];
            for (j, a) in at.iter().enumerate() {
                for (deg, p) in a.coeffs().iter().enumerate() {
                    if deg <= n && !p.is_zero() {
                        mul_eps(&mut acc, p, &f[j][n - deg], true);
                    }
                }
            }
            if !g[i].is_empty() {
                for (deg, p) in hw.coeffs().iter().enumerate() {
                    if deg <= n && !p.is_zero() {
                        mul_eps(&mut acc, p, &g[i][n - deg], true);
                    }
                }
            }
            // h_a (n - a + 1) F_i(n - a + 1) for a >= 1
            for (deg, p) in h.coeffs().iter().enumerate().skip(1) {
                if deg > n + 1 || p.is_zero() {
                    continue;
                }
                let m = n + 1 - deg;
                let scaled: Vec<Rational> = f[i][m]
                    .iter()
                    .map(|v| v * Rational::from(m as i64))
                    .collect();
                mul_eps(&mut acc, p, &scaled, false);
            }
            // solve h_0(ep) y = acc, then F_i(n+1) = y / (n + 1)
            let h0 = h.coeff(0);
            let inv = Rational::ONE / h0.coeff(0);
            let mut y: Vec<Rational> = Vec::with_capacity(width);
            for t in 0..width {
                let mut v = acc[t].clone();
                for b in 1..=t {
                    let c = h0.coeff(b);
                    if !c.is_zero() {
                        v -= c * &y[t - b];
                    }
                }
                y.push(v * &inv);
            }
            let n1 = Rational::from(n as i64 + 1);
            f[i].push(y.into_iter().map(|v| v / &n1).collect());
        }
    }
    Ok(windows
        .iter()
        .enumerate()
        .map(|(j, w)| LayeredMoments {
            component: j,
            window: *w,
            mu,
            layers: w
                .orders()
                .map(|k| {
                    let t = (k - lo) as usize;
                    f[j].iter().map(|v| v[t].clone()).collect()
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int, Var};
    use crate::expr::parse_expr;
    use crate::system::{parse_system, MomentProvider};

    fn rec(coeffs: &[&[i64]]) -> Recurrence {
        Recurrence::from_ints(coeffs).unwrap()
    }

    fn bn(s: &str) -> BiPoly {
        parse_expr(s).unwrap().to_bipoly(Var::N).unwrap()
    }

    fn harmonic(n: usize) -> Vec<Rational> {
        let mut out = vec![int(0)];
        for k in 1..=n {
            let prev = out[k - 1].clone();
            out.push(prev + frac(1, k as i64));
        }
        out
    }

    #[test]
    fn propagate_examples() {
        // (n+1) F(n+1) = F(n)
        let r = rec(&[&[-1], &[1, 1]]);
        let f = propagate(&r, &vec![int(0); 10], &[int(1)], 5).unwrap();
        assert_eq!(f, vec![int(1), int(1), frac(1, 2), frac(1, 6), frac(1, 24), frac(1, 120)]);

        let r = rec(&[&[-1, -1], &[1, 1]]);
        let f = propagate(&r, &vec![int(1); 10], &[int(0)], 3).unwrap();
        assert_eq!(f, harmonic(3));

        let r = rec(&[&[1], &[1], &[-1]]);
        let f = propagate(&r, &vec![int(0); 10], &[int(0), int(1)], 6).unwrap();
        assert_eq!(f, [0, 1, 1, 2, 3, 5, 8].map(int).to_vec());
    }

    #[test]
    fn propagate_errors() {
        let r = rec(&[&[1], &[1], &[-1]]);
        let e = propagate(&r, &vec![int(0); 10], &[int(0)], 6).unwrap_err();
        assert!(matches!(e, Error::InitShortfall { required: 2, provided: 1, .. }));
        // surplus init is checked
        let e = propagate(&r, &vec![int(0); 10], &[int(0), int(1), int(2)], 6).unwrap_err();
        assert!(matches!(e, Error::InitInconsistent { index: 2, .. }));
        // (n - 2) F(n+1) = 0: F(3) is free and must be given
        let r = rec(&[&[0], &[-2, 1]]);
        let e = propagate(&r, &vec![int(0); 10], &[int(1)], 5).unwrap_err();
        assert!(matches!(e, Error::InitShortfall { required: 4, .. }));
        let f = propagate(&r, &vec![int(0); 10], &[int(1), int(0), int(0), int(7)], 5).unwrap();
        assert_eq!(f, [1, 0, 0, 7, 0, 0].map(int).to_vec());
        let e = propagate(&r, &[int(0)], &[int(1), int(0), int(0), int(7)], 5).unwrap_err();
        assert_eq!(e.class(), "insufficient-length");
    }

    fn iv(entries: &[(usize, i64, Vec<Rational>)]) -> InitialValues {
        let mut init = InitialValues::default();
        for (j, k, v) in entries {
            init.set(*j, *k, v.clone());
        }
        init
    }

    #[test]
    fn layered_examples() {
        // (n+1) F(n+1) - (1+ep) F(n) = 0
        let r = EpsRecurrence::new(vec![bn("-1-ep"), bn("n+1")], 0).unwrap();
        let w = EpsWindow::new(0, 1).unwrap();
        let rhs = LayeredStream::zero(0, &[10, 10]);
        let init = iv(&[(0, 0, vec![int(1)]), (0, 1, vec![int(0)])]);
        let lm = eps_layered_propagate(&r, &rhs, &init, 0, w, 3).unwrap();
        assert_eq!(lm.layers[0], vec![int(1), int(1), frac(1, 2), frac(1, 6)]);
        assert_eq!(lm.layers[1], vec![int(0), int(1), int(1), frac(1, 2)]);

        // F(n+1) - F(n) = ep n
        let r = EpsRecurrence::new(vec![bn("-1"), bn("1")], 0).unwrap();
        let rhs = LayeredStream::new(0, vec![vec![int(0); 5], (0..5).map(int).collect()]);
        let init = iv(&[(0, 0, vec![int(0)]), (0, 1, vec![int(0)])]);
        let lm = eps_layered_propagate(&r, &rhs, &init, 0, w, 4).unwrap();
        assert_eq!(lm.layers[0], vec![int(0); 5]);
        assert_eq!(lm.layers[1], [0, 0, 1, 3, 6].map(int).to_vec());

        // degenerate window
        let r0 = Recurrence::from_ints(&[&[-1], &[1, 1]]).unwrap();
        let rhs = LayeredStream::zero(0, &[10]);
        let init = iv(&[(0, 0, vec![int(1)])]);
        let lm = eps_layered_propagate(
            &EpsRecurrence::from_recurrence(&r0),
            &rhs,
            &init,
            0,
            EpsWindow::new(0, 0).unwrap(),
            6,
        )
        .unwrap();
        assert_eq!(lm.layers[0], propagate(&r0, &vec![int(0); 10], &[int(1)], 6).unwrap());
    }

    #[test]
    fn layered_window_shortfall() {
        let r = EpsRecurrence::new(vec![bn("-1"), bn("1")], 0).unwrap();
        let rhs = LayeredStream::zero(0, &[5]);
        let init = iv(&[(0, 0, vec![int(0)]), (0, 1, vec![int(0)])]);
        let e = eps_layered_propagate(&r, &rhs, &init, 0, EpsWindow::new(0, 1).unwrap(), 4)
            .unwrap_err();
        assert_eq!(e.class(), "window-shortfall");
    }

    const HARMONIC: &str = r#"{
        "lambda": 1,
        "lhs": ["1-x"],
        "matrix": [["1"]],
        "rhs": [{"kind": "constant", "value": "1", "window": [0, 0]}]
    }"#;

    #[test]
    fn harmonic_pipeline() {
        let sys = parse_system(HARMONIC, None).unwrap();
        let w = [EpsWindow::new(0, 0).unwrap()];
        let init = iv(&[(0, 0, vec![int(0)])]);
        let out = pipeline_moments(&sys, &init, &w, 8).unwrap();
        assert_eq!(out[0].layers[0], harmonic(8));
        let o = direct_oracle(&sys, &[EpsSeries::zero(0, 0)], &w, 8).unwrap();
        assert_eq!(o, out);
    }

    #[test]
    fn cosh_sinh_pipeline() {
        let text = r#"{
            "lambda": 2,
            "matrix": [["0", "1"], ["1", "0"]],
            "rhs": [{"kind": "constant", "value": "0", "window": [0, 0]},
                    {"kind": "constant", "value": "0", "window": [0, 0]}]
        }"#;
        let sys = parse_system(text, None).unwrap();
        let w = [EpsWindow::new(0, 0).unwrap(); 2];
        let plan = plan_pipeline(&sys, &w, 6).unwrap();
        assert_eq!(plan.stage_of(0).init_count(0), 2);
        let init = iv(&[(0, 0, vec![int(1), int(0)]), (1, 0, vec![int(0)])]);
        let out = pipeline_moments(&sys, &init, &w, 6).unwrap();
        let fact = |n: i64| (1..=n).product::<i64>();
        let cosh: Vec<Rational> = (0..=6)
            .map(|n| if n % 2 == 0 { frac(1, fact(n)) } else { int(0) })
            .collect();
        let sinh: Vec<Rational> = (0..=6)
            .map(|n| if n % 2 == 1 { frac(1, fact(n)) } else { int(0) })
            .collect();
        assert_eq!(out[0].layers[0], cosh);
        assert_eq!(out[1].layers[0], sinh);
        // a wrong surplus value for f2 is caught
        let bad = iv(&[(0, 0, vec![int(1), int(0)]), (1, 0, vec![int(1)])]);
        let e = pipeline_moments(&sys, &bad, &w, 6).unwrap_err();
        assert_eq!(e.class(), "init-inconsistent");
        // mu = 0 echoes initial values
        let out = pipeline_moments(&sys, &init, &w, 0).unwrap();
        assert_eq!((out[0].layers[0].clone(), out[1].layers[0].clone()), (vec![int(1)], vec![int(0)]));
    }

    #[test]
    fn oracle_examples() {
        let sys = CoupledSystem::homogeneous(
            "exp",
            vec![vec![parse_expr("ep").unwrap().to_ratfunc(Var::X).unwrap()]],
        )
        .unwrap();
        let w = [EpsWindow::new(0, 2).unwrap()];
        let o = direct_oracle(&sys, &[EpsSeries::constant(int(1), 2)], &w, 4).unwrap();
        assert_eq!(o[0].layers[0], vec![int(1), int(0), int(0), int(0), int(0)]);
        assert_eq!(o[0].layers[1], vec![int(0), int(1), int(0), int(0), int(0)]);
        assert_eq!(o[0].layers[2], vec![int(0), int(0), frac(1, 2), int(0), int(0)]);
        // the pipeline agrees
        let init = iv(&[(0, 0, vec![int(1)]), (0, 1, vec![int(0)]), (0, 2, vec![int(0)])]);
        assert_eq!(pipeline_moments(&sys, &init, &w, 4).unwrap(), o);

        let sing = CoupledSystem::homogeneous(
            "s",
            vec![vec![parse_expr("1/x").unwrap().to_ratfunc(Var::X).unwrap()]],
        )
        .unwrap();
        let e = direct_oracle(&sing, &[EpsSeries::constant(int(1), 0)], &[EpsWindow::new(0, 0).unwrap()], 3)
            .unwrap_err();
        assert_eq!(e.class(), "singular-point");
    }

    #[test]
    fn eps_system_against_oracle() {
        // D f1 = ep f1 + f2 / (1 - x), D f2 = (1 + ep x) f1 + g2
        let text = r#"{
            "lambda": 2,
            "matrix": [["ep", "1/(1-x)"], ["1 + ep*x", "0"]],
            "rhs": [{"kind": "constant", "value": "0", "window": [0, 0]},
                    {"kind": "harmonic", "layers": ["1", "S_1(n)"], "window": [0, 3]}]
        }"#;
        let sys = parse_system(text, None).unwrap();
        let w = [EpsWindow::new(0, 2).unwrap(), EpsWindow::new(0, 2).unwrap()];
        let wide = [EpsWindow::new(0, 3).unwrap(), EpsWindow::new(0, 3).unwrap()];
        let init0 = [
            EpsSeries::new(0, vec![int(1), int(2), int(0), frac(1, 3)]),
            EpsSeries::new(0, vec![int(0), int(1), int(-1), int(0)]),
        ];
        let mu = 12;
        let plan = plan_pipeline(&sys, &w, mu).unwrap();
        let max_len = plan.stages.iter().flat_map(|s| s.lens.clone()).max().unwrap();
        let reference = direct_oracle(&sys, &init0, &wide, max_len).unwrap();
        let mut init = InitialValues::default();
        for st in &plan.stages {
            for k in st.window.orders() {
                let c = st.init_count(k);
                let layer = reference[st.component].layer(k).unwrap();
                init.set(st.component, k, layer[..c].to_vec());
            }
        }
        let run = run_pipeline(&sys, &plan, &init).unwrap();
        let out = truncate_run(&run, &w, mu);
        let o = direct_oracle(&sys, &init0, &w, mu).unwrap();
        assert_eq!(out, o);
        // the stage recurrence reproduces its rhs
        for st in &plan.stages {
            let s = &run.streams[st.component];
            for k in st.window.orders() {
                let f = s.layer(k).unwrap();
                let b = &run.rhs[st.component][(k - st.window.low) as usize];
                let d = st.recurrence.order();
                for m in 0..f.len().saturating_sub(d) {
                    assert_eq!(st.recurrence.eval_lhs(f, m), b[m]);
                }
            }
        }
        let _ = MomentProvider::constant(int(0));
    }
}
