//! Guessing homogeneous recurrences `sum_i a_i(n) F(n+i) = 0` from moments.
//!
//! Each cell `(order, degree)` of the search box is a linear system in the
//! coefficients of the `a_i`. It is solved modulo word-size primes, lifted
//! by CRT and rational reconstruction, and only accepted after exact
//! verification on every given moment.

use std::cmp::Ordering;

use dashu::integer::IBig;

use crate::arith::modular::{
    crt_combine, inv_mod, mul_mod, primes_below_power_of_two, rational_reconstruct,
    reduce_rational, sub_mod,
};
use crate::arith::{rational, Poly, Rational, Var};
use crate::error::{Error, Result};
use crate::ode2rec::Recurrence;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuessConfig {
    pub max_order: usize,
    pub max_degree: usize,
    /// Equations kept out of the modular fit and used only for verification.
    pub holdout: usize,
    pub prime_bits: u32,
    /// Skip this many primes, to run with a different prime set.
    pub prime_skip: usize,
}

impl Default for GuessConfig {
    fn default() -> Self {
        GuessConfig {
            max_order: 3,
            max_degree: 3,
            holdout: 50,
            prime_bits: 62,
            prime_skip: 0,
        }
    }
}

impl GuessConfig {
    pub fn new(max_order: usize, max_degree: usize) -> Self {
        GuessConfig {
            max_order,
            max_degree,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Guess {
    pub recurrence: Recurrence,
    /// The search cell that produced it.
    pub order: usize,
    pub degree: usize,
    /// Equations used in the modular fit, and in total for verification.
    pub fit_rows: usize,
    pub verified_rows: usize,
    pub primes_used: usize,
}

/// Cells in search order: fewest unknowns first, then lower order.
fn cells(cfg: &GuessConfig) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (1..=cfg.max_order)
        .flat_map(|r| (0..=cfg.max_degree).map(move |d| (r, d)))
        .collect();
    out.sort_by_key(|&(r, d)| ((r + 1) * (d + 1), r));
    out
}

/// Search the box for a recurrence annihilating all of `moments`.
///
/// Fails only when the stream is too short to determine even the largest
/// cell; `Ok(None)` means no cell admits a certified recurrence.
pub fn guess_recurrence(moments: &[Rational], cfg: &GuessConfig) -> Result<Option<Guess>> {
    let needed = (cfg.max_order + 1) * (cfg.max_degree + 1);
    if moments.len() < needed {
        return Err(Error::InsufficientMoments {
            needed,
            available: moments.len(),
        });
    }
    if cfg.holdout == 0 {
        return Err(Error::InvalidArgument("holdout must be at least 1".into()));
    }
    let mut reduced: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut primes = primes_below_power_of_two(cfg.prime_bits, cfg.prime_skip);
    for (r, d) in cells(cfg) {
        let unknowns = (r + 1) * (d + 1);
        let Some(rows) = moments.len().checked_sub(r) else {
            continue;
        };
        if rows <= unknowns {
            continue;
        }
        let holdout = cfg.holdout.min(rows - unknowns);
        let fit = rows - holdout;
        if let Some(g) = solve_cell(moments, r, d, fit, &mut reduced, &mut primes) {
            return Ok(Some(Guess {
                fit_rows: fit,
                verified_rows: rows,
                ..g
            }));
        }
    }
    Ok(None)
}

/// Pivot columns and nullspace basis modulo `p` of the cell matrix, in
/// reduced row echelon convention (one vector per free column).
fn modular_nullspace(
    residues: &[u64],
    r: usize,
    d: usize,
    rows: usize,
    p: u64,
) -> (Vec<usize>, Vec<Vec<u64>>) {
    let cols = (r + 1) * (d + 1);
    let mut m: Vec<Vec<u64>> = (0..rows)
        .map(|n| {
            let mut row = Vec::with_capacity(cols);
            for i in 0..=r {
                let f = residues[n + i];
                let mut pw = f;
                for _ in 0..=d {
                    row.push(pw);
                    pw = mul_mod(pw, n as u64 % p, p);
                }
            }
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut prow = 0;
    for c in 0..cols {
        let Some(sel) = (prow..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(prow, sel);
        let inv = inv_mod(m[prow][c], p).expect("nonzero pivot");
        for v in m[prow].iter_mut() {
            *v = mul_mod(*v, inv, p);
        }
        let pivot_row = m[prow].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == prow || row[c] == 0 {
                continue;
            }
            let f = row[c];
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x = sub_mod(*x, mul_mod(f, *y, p), p);
            }
        }
        pivots.push(c);
        prow += 1;
        if prow == rows {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![0u64; cols];
            v[f] = 1;
            for (ri, &pc) in pivots.iter().enumerate() {
                v[pc] = sub_mod(0, m[ri][f], p);
            }
            v
        })
        .collect();
    (pivots, basis)
}

fn residues_for(moments: &[Rational], p: u64) -> Option<Vec<u64>> {
    moments.iter().map(|v| reduce_rational(v, p)).collect()
}

fn solve_cell(
    moments: &[Rational],
    r: usize,
    d: usize,
    fit: usize,
    reduced: &mut Vec<(u64, Vec<u64>)>,
    primes: &mut impl Iterator<Item = u64>,
) -> Option<Guess> {
    const MAX_PRIMES: usize = 400;
    let mut next_prime = 0usize;
    let mut take_prime = |reduced: &mut Vec<(u64, Vec<u64>)>| -> Option<(u64, Vec<u64>)> {
        loop {
            if next_prime < reduced.len() {
                next_prime += 1;
                return Some(reduced[next_prime - 1].clone());
            }
            if reduced.len() >= MAX_PRIMES {
                return None;
            }
            let p = primes.next()?;
            if let Some(res) = residues_for(moments, p) {
                reduced.push((p, res));
            }
        }
    };
    let (p0, res0) = take_prime(reduced)?;
    let (mut pivots, basis0) = modular_nullspace(&res0, r, d, fit, p0);
    if basis0.is_empty() {
        // rank mod p never exceeds rank over Q, so the cell is empty
        return None;
    }
    let mut acc: Vec<Vec<(IBig, IBig)>> = basis0
        .iter()
        .map(|v| v.iter().map(|&x| (IBig::from(x), IBig::from(p0))).collect())
        .collect();
    let mut primes_used = 1;
    let mut last: Option<Vec<Vec<Rational>>> = None;
    loop {
        let recon: Option<Vec<Vec<Rational>>> = acc
            .iter()
            .map(|v| {
                v.iter()
                    .map(|(x, m)| rational_reconstruct(x, m))
                    .collect::<Option<Vec<_>>>()
            })
            .collect();
        if let Some(rec) = recon {
            if last.as_ref() == Some(&rec) {
                return pick_verified(moments, r, d, &rec, primes_used);
            }
            last = Some(rec);
        }
        let (p, res) = take_prime(reduced)?;
        let (piv, basis) = modular_nullspace(&res, r, d, fit, p);
        match piv.len().cmp(&pivots.len()) {
            // unlucky prime: rank dropped
            Ordering::Less => continue,
            Ordering::Greater => {
                // every earlier prime was unlucky; restart from this one
                pivots = piv;
                acc = basis
                    .iter()
                    .map(|v| v.iter().map(|&x| (IBig::from(x), IBig::from(p))).collect())
                    .collect();
                if acc.is_empty() {
                    return None;
                }
                primes_used = 1;
                last = None;
                continue;
            }
            Ordering::Equal if piv != pivots => continue,
            Ordering::Equal => {}
        }
        for (a, v) in acc.iter_mut().zip(&basis) {
            for ((x, m), &y) in a.iter_mut().zip(v) {
                let (nx, nm) = crt_combine(x, m, y, p);
                *x = nx;
                *m = nm;
            }
        }
        primes_used += 1;
    }
}

/// Integer, content-free coefficients with positive leading coefficient.
fn normalize(vec: &[Rational], r: usize, d: usize) -> Option<Recurrence> {
    let l = Rational::from(IBig::from(rational::denominator_lcm(vec.iter())));
    let ints: Vec<IBig> = vec.iter().map(|c| (c * &l).numerator().clone()).collect();
    let g = IBig::from(rational::integer_content(ints.iter()));
    if g == IBig::ZERO {
        return None;
    }
    let lead_neg = ints.iter().rev().find(|c| **c != IBig::ZERO)? < &IBig::ZERO;
    let coeffs: Vec<Poly> = (0..=r)
        .map(|i| {
            let cs: Vec<Rational> = ints[i * (d + 1)..(i + 1) * (d + 1)]
                .iter()
                .map(|c| {
                    let q = Rational::from(c / &g);
                    if lead_neg {
                        -q
                    } else {
                        q
                    }
                })
                .collect();
            Poly::new(Var::N, cs)
        })
        .collect();
    Recurrence::new(coeffs).ok()
}

/// Deterministic preference among several annihilators in one cell:
/// lower degree profile first, then smaller integer coefficients.
fn preference_key(rec: &Recurrence) -> (Vec<usize>, Vec<IBig>) {
    let degs = rec.coeffs().iter().map(|c| c.deg0()).collect();
    let ints = rec
        .coeffs()
        .iter()
        .flat_map(|c| c.coeffs().iter().map(|v| v.numerator().clone()).collect::<Vec<_>>())
        .collect();
    (degs, ints)
}

fn pick_verified(
    moments: &[Rational],
    r: usize,
    d: usize,
    basis: &[Vec<Rational>],
    primes_used: usize,
) -> Option<Guess> {
    let mut found: Vec<Recurrence> = basis
        .iter()
        .filter_map(|v| normalize(v, r, d))
        .filter(|rec| matches!(verify_annihilates(rec, moments), Ok((true, None))))
        .collect();
    found.sort_by_key(preference_key);
    let recurrence = found.into_iter().next()?;
    Some(Guess {
        recurrence,
        order: r,
        degree: d,
        fit_rows: 0,
        verified_rows: 0,
        primes_used,
    })
}

/// Evaluate `sum_i a_i(n) F(n+i)` for every `n` the stream allows.
/// Returns `(true, None)` or `(false, Some(first failing n))`.
pub fn verify_annihilates(rec: &Recurrence, moments: &[Rational]) -> Result<(bool, Option<usize>)> {
    let d = rec.order();
    if moments.len() < d + 1 {
        return Err(Error::InsufficientMoments {
            needed: d + 1,
            available: moments.len(),
        });
    }
    for n in 0..moments.len() - d {
        if !rec.eval_lhs(moments, n).is_zero() {
            return Ok((false, Some(n)));
        }
    }
    Ok((true, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int};

    fn fib(n: usize) -> Vec<Rational> {
        let mut v = vec![int(0), int(1)];
        while v.len() < n {
            let k = v.len();
            let s = &v[k - 1] + &v[k - 2];
            v.push(s);
        }
        v.truncate(n);
        v
    }

    fn catalan(n: usize) -> Vec<Rational> {
        let mut v = vec![int(1)];
        for k in 0..n - 1 {
            let c = &v[k] * frac(2 * (2 * k as i64 + 1), k as i64 + 2);
            v.push(c);
        }
        v
    }

    fn harmonic(n: usize) -> Vec<Rational> {
        let mut v = vec![int(0)];
        for k in 1..n {
            let h = &v[k - 1] + frac(1, k as i64);
            v.push(h);
        }
        v
    }

    #[test]
    fn known_recurrences() {
        let g = guess_recurrence(&fib(12), &GuessConfig::new(3, 2)).unwrap().unwrap();
        assert_eq!(g.recurrence, Recurrence::from_ints(&[&[-1], &[-1], &[1]]).unwrap());

        let g = guess_recurrence(&catalan(20), &GuessConfig::new(3, 3)).unwrap().unwrap();
        assert_eq!(g.recurrence, Recurrence::from_ints(&[&[-2, -4], &[2, 1]]).unwrap());

        let g = guess_recurrence(&harmonic(30), &GuessConfig::new(3, 3)).unwrap().unwrap();
        assert_eq!(
            g.recurrence,
            Recurrence::from_ints(&[&[1, 1], &[-3, -2], &[2, 1]]).unwrap()
        );
    }

    #[test]
    fn too_few_moments() {
        let e = guess_recurrence(&fib(5), &GuessConfig::new(3, 3)).unwrap_err();
        assert_eq!(e.class(), "insufficient-moments");
    }

    #[test]
    fn nothing_in_the_box() {
        // 2^(n^2) satisfies no recurrence with polynomial coefficients
        let v: Vec<Rational> = (0..40u32)
            .map(|n| Rational::from(IBig::from(2u8).pow((n * n) as usize)))
            .collect();
        assert!(guess_recurrence(&v, &GuessConfig::new(2, 2)).unwrap().is_none());
    }

    #[test]
    fn prime_sets_agree() {
        let h = harmonic(60);
        let a = guess_recurrence(&h, &GuessConfig::new(3, 3)).unwrap().unwrap();
        let cfg = GuessConfig {
            prime_skip: 500,
            ..GuessConfig::new(3, 3)
        };
        let b = guess_recurrence(&h, &cfg).unwrap().unwrap();
        assert_eq!(a.recurrence, b.recurrence);
        let again = guess_recurrence(&h, &GuessConfig::new(3, 3)).unwrap().unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn verification_examples() {
        let fr = Recurrence::from_ints(&[&[-1], &[-1], &[1]]).unwrap();
        assert_eq!(verify_annihilates(&fr, &fib(50)).unwrap(), (true, None));
        let mut bad = fib(50);
        bad[30] = &bad[30] + int(1);
        assert_eq!(verify_annihilates(&fr, &bad).unwrap(), (false, Some(28)));
        let cr = Recurrence::from_ints(&[&[-2, -4], &[2, 1]]).unwrap();
        assert_eq!(verify_annihilates(&cr, &harmonic(10)).unwrap(), (false, Some(0)));
        assert!(verify_annihilates(&fr, &fib(2)).is_err());
    }
}
