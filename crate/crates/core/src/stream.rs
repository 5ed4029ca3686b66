//! Moment streams of power series in `x` whose coefficients are truncated
//! Laurent series in `ep`.
//!
//! Layer `k` holds the moments of the `ep^k` coefficient. Orders below
//! `low` are zero (of unlimited length); orders above `high` are unknown.
//! Each layer carries its own length, and every operation returns exactly
//! the entries it can vouch for.

use crate::arith::{rational, BiPoly, Poly, Rational};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredStream {
    low: i64,
    layers: Vec<Vec<Rational>>,
}

impl LayeredStream {
    pub fn new(low: i64, layers: Vec<Vec<Rational>>) -> Self {
        assert!(!layers.is_empty(), "layered stream needs at least one layer");
        LayeredStream { low, layers }
    }

    pub fn single(layer: Vec<Rational>) -> Self {
        Self::new(0, vec![layer])
    }

    /// Zero stream on `[low, high]` with the given lengths per layer.
    pub fn zero(low: i64, lens: &[usize]) -> Self {
        Self::new(low, lens.iter().map(|&l| vec![Rational::ZERO; l]).collect())
    }

    pub fn low(&self) -> i64 {
        self.low
    }

    pub fn high(&self) -> i64 {
        self.low + self.layers.len() as i64 - 1
    }

    pub fn layers(&self) -> &[Vec<Rational>] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Vec<Rational>> {
        self.layers
    }

    /// Layer `k`; `None` outside `[low, high]`.
    pub fn layer(&self, k: i64) -> Option<&[Rational]> {
        if k < self.low || k > self.high() {
            None
        } else {
            Some(&self.layers[(k - self.low) as usize])
        }
    }

    /// Known length of layer `k` (`usize::MAX` below the window, 0 above).
    pub fn len_at(&self, k: i64) -> usize {
        if k < self.low {
            usize::MAX
        } else {
            self.layer(k).map_or(0, |l| l.len())
        }
    }

    /// Entry `(k, n)`; zero below the window, `None` when unknown.
    pub fn get(&self, k: i64, n: usize) -> Option<Rational> {
        if k < self.low {
            return Some(Rational::ZERO);
        }
        self.layer(k)?.get(n).cloned()
    }

    /// `D_x^u`: `F(n) -> (n+1)...(n+u) F(n+u)`.
    pub fn derivative(&self, u: usize) -> Self {
        if u == 0 {
            return self.clone();
        }
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let len = l.len().saturating_sub(u);
                (0..len)
                    .map(|n| {
                        let f = rising(n as i64 + 1, u);
                        &l[n + u] * f
                    })
                    .collect()
            })
            .collect();
        Self::new(self.low, layers)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(
            self.low,
            self.layers
                .iter()
                .map(|l| l.iter().map(|v| v * c).collect())
                .collect(),
        )
    }

    /// Multiply by `x^k` (prepend zeros).
    pub fn shift_x_up(&self, k: usize) -> Self {
        Self::new(
            self.low,
            self.layers
                .iter()
                .map(|l| {
                    let mut v = vec![Rational::ZERO; k];
                    v.extend(l.iter().cloned());
                    v
                })
                .collect(),
        )
    }

    /// Multiply by `x^-k`, keeping the power-series part.
    pub fn shift_x_down(&self, k: usize) -> Self {
        Self::new(
            self.low,
            self.layers
                .iter()
                .map(|l| l.iter().skip(k).cloned().collect())
                .collect(),
        )
    }

    /// Multiply by `ep^u`.
    pub fn shift_eps(&self, u: i64) -> Self {
        Self::new(self.low + u, self.layers.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        let low = self.low.min(other.low);
        let high = self.high().min(other.high());
        let layers = (low..=high)
            .map(|k| {
                let len = self.len_at(k).min(other.len_at(k));
                let len = if len == usize::MAX { 0 } else { len };
                (0..len)
                    .map(|n| self.get(k, n).unwrap() + other.get(k, n).unwrap())
                    .collect()
            })
            .collect();
        Self::new(low, layers)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rational::ONE))
    }

    /// Multiply by a polynomial `c(x, ep)` (outer variable `x`).
    pub fn mul_bipoly(&self, c: &BiPoly) -> Self {
        let Some(bmin) = c.eps_valuation() else {
            let lens: Vec<usize> = self.layers.iter().map(|l| l.len()).collect();
            return Self::zero(self.low, &lens);
        };
        let bmin = bmin as i64;
        let bmax = c.eps_degree().unwrap_or(0) as i64;
        let low = self.low + bmin;
        let high = self.high() + bmin;
        let mut layers = Vec::with_capacity((high - low + 1) as usize);
        for kk in low..=high {
            let len = (bmin..=bmax)
                .filter(|&b| kk - b >= self.low && !c.eps_coeff(b as usize).is_zero())
                .map(|b| self.len_at(kk - b))
                .min()
                .unwrap_or(0);
            let mut out = vec![Rational::ZERO; len];
            for b in bmin..=bmax {
                let src = kk - b;
                if src < self.low {
                    break;
                }
                let Some(layer) = self.layer(src) else {
                    continue;
                };
                for (a, p) in c.coeffs().iter().enumerate() {
                    let coef = p.coeff(b as usize);
                    if coef.is_zero() {
                        continue;
                    }
                    for n in a..len {
                        out[n] += &coef * &layer[n - a];
                    }
                }
            }
            layers.push(out);
        }
        Self::new(low, layers)
    }

    /// Multiply by `1/q(x, ep)` with `q(0, 0) != 0`, by the double-series recursion
    /// `y(n,k) = (t(n,k) - sum_{(a,b) != 0} q(a,b) y(n-a,k-b)) / q(0,0)`.
    pub fn div_unit(&self, q: &BiPoly) -> Result<Self> {
        let q00 = q.term(0, 0);
        if q00.is_zero() {
            return Err(Error::NonExpandable(format!(
                "1/({q}) has no power-series expansion at x = 0, ep = 0"
            )));
        }
        let inv = Rational::ONE / q00;
        let terms: Vec<(usize, i64, Rational)> = q
            .terms()
            .filter(|&(a, b, _)| a > 0 || b > 0)
            .map(|(a, b, c)| (a, b as i64, c.clone()))
            .collect();
        let mut out: Vec<Vec<Rational>> = Vec::with_capacity(self.layers.len());
        for (idx, t) in self.layers.iter().enumerate() {
            let k = self.low + idx as i64;
            let mut len = t.len();
            for &(_, b, _) in &terms {
                if b > 0 && k - b >= self.low {
                    len = len.min(out[(k - b - self.low) as usize].len());
                }
            }
            let mut y: Vec<Rational> = Vec::with_capacity(len);
            for n in 0..len {
                let mut acc = t[n].clone();
                for (a, b, c) in &terms {
                    if *a > n || k - b < self.low {
                        continue;
                    }
                    let prev = if *b == 0 {
                        &y[n - a]
                    } else {
                        &out[(k - b - self.low) as usize][n - a]
                    };
                    if !prev.is_zero() {
                        acc -= c * prev;
                    }
                }
                y.push(acc * &inv);
            }
            out.push(y);
        }
        Ok(Self::new(self.low, out))
    }

    /// Divide every layer by a univariate `p(x)` with `p(0) != 0`.
    pub fn div_poly(&self, p: &Poly) -> Result<Self> {
        self.div_unit(&BiPoly::from_outer(p))
    }

    /// Restrict to `[low, high]` with the given per-layer lengths.
    pub fn restrict(&self, low: i64, lens: &[usize], what: &str) -> Result<Self> {
        let high = low + lens.len() as i64 - 1;
        if high > self.high() {
            return Err(Error::WindowShortfall {
                what: what.to_string(),
                needed: high,
                available: self.high(),
            });
        }
        let mut layers = Vec::with_capacity(lens.len());
        for (i, &len) in lens.iter().enumerate() {
            let k = low + i as i64;
            if k < self.low {
                layers.push(vec![Rational::ZERO; len]);
                continue;
            }
            let l = self.layer(k).unwrap();
            if l.len() < len {
                return Err(Error::InsufficientLength {
                    what: format!("{what}, eps-order {k}"),
                    extra: len - l.len(),
                });
            }
            layers.push(l[..len].to_vec());
        }
        Ok(Self::new(low, layers))
    }
}

/// `m (m+1) ... (m+u-1)` as a rational.
fn rising(m: i64, u: usize) -> Rational {
    let mut acc = dashu::integer::IBig::ONE;
    for i in 0..u as i64 {
        acc *= dashu::integer::IBig::from(m + i);
    }
    rational::from_integer(acc)
}
