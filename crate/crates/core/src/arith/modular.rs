//! Word-size prime arithmetic, CRT and rational reconstruction.

use dashu::base::{BitTest, RemEuclid, Sign, UnsignedAbs};
use dashu::integer::{IBig, UBig};

use super::rational::Rational;

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % p as u128) as u64
}

#[inline]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        p - (b - a)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime; `None` for zero.
pub fn inv_mod(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return None;
    }
    Some(pow_mod(a, p - 2, p))
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Primes below `2^bits`, descending, skipping the first `skip`.
pub fn primes_below_power_of_two(bits: u32, skip: usize) -> impl Iterator<Item = u64> {
    assert!((3..=63).contains(&bits));
    let start = (1u64 << bits) - 1;
    (0..)
        .map(move |i| start - 2 * i)
        .take_while(|&c| c > 2)
        .filter(|&c| is_prime(c))
        .skip(skip)
}

/// `r mod p`, `None` when the denominator vanishes mod p.
pub fn reduce_rational(r: &Rational, p: u64) -> Option<u64> {
    let pi = IBig::from(p);
    let num = r.numerator().rem_euclid(&pi);
    let den: u64 = r.denominator() % p;
    let num = u64::try_from(&num).ok()?;
    let inv = inv_mod(den, p)?;
    Some(mul_mod(num, inv, p))
}

/// Combine `x = residue (mod modulus)` with `x = r (mod p)`.
pub fn crt_combine(residue: &IBig, modulus: &IBig, r: u64, p: u64) -> (IBig, IBig) {
    let m_mod_p = u64::try_from(&modulus.rem_euclid(&IBig::from(p))).unwrap();
    let a_mod_p = u64::try_from(&residue.rem_euclid(&IBig::from(p))).unwrap();
    let inv = inv_mod(m_mod_p, p).expect("moduli must be coprime");
    let t = mul_mod(sub_mod(r % p, a_mod_p, p), inv, p);
    let new_mod = modulus * IBig::from(p);
    let x = residue + modulus * IBig::from(t);
    (x.rem_euclid(&new_mod).into(), new_mod)
}

/// Find `p/q` with `|p|, q <= sqrt(m/2)` and `q * residue = p (mod m)`.
pub fn rational_reconstruct(residue: &IBig, modulus: &IBig) -> Option<Rational> {
    let m = modulus.clone();
    let a = residue.rem_euclid(&m);
    let a: IBig = a.into();
    // bound = floor(sqrt(m / 2))
    let half: UBig = m.clone().unsigned_abs() / UBig::from(2u8);
    let bound = IBig::from(isqrt(&half));
    let (mut r0, mut r1) = (m.clone(), a);
    let (mut t0, mut t1) = (IBig::ZERO, IBig::ONE);
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    let (num, den) = (r1, t1);
    if den.is_zero() || (&den).unsigned_abs() > (&bound).unsigned_abs() {
        return None;
    }
    use dashu::base::Gcd;
    if !(&num).unsigned_abs().gcd((&den).unsigned_abs()).is_one() && !num.is_zero() {
        return None;
    }
    let neg = den.sign() == Sign::Negative;
    let r = Rational::from_parts(num, den.unsigned_abs());
    Some(if neg { -r } else { r })
}

fn isqrt(n: &UBig) -> UBig {
    if n.is_zero() {
        return UBig::ZERO;
    }
    // Newton iteration from a power of two above the root.
    let bits = n.bit_len();
    let mut x = UBig::ONE << bits.div_ceil(2);
    loop {
        let y = (&x + n / &x) >> 1;
        if y >= x {
            return x;
        }
        x = y;
    }
}
