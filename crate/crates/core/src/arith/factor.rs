//! Integer factorization: trial division against a fixed prime table, then
//! Brent's variant of Pollard rho with deterministic seeding.
//!
//! Values that fit in a machine word take a separate `u64` path which always
//! completes. Larger cofactors are split with a bounded amount of work; when
//! the bound is exhausted the caller gets [`Error::IncompleteFactorization`]
//! instead of an open-ended loop.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Effort knobs for [`factorize_with`].
#[derive(Debug, Clone)]
pub struct FactorConfig {
    /// Trial division uses every prime up to this bound.
    pub trial_bound: u32,
    /// Total rho iterations allowed per cofactor above 64 bits.
    pub rho_effort: u64,
    /// Miller-Rabin rounds with derived bases on top of the fixed witness set,
    /// used only above the range where the fixed set is deterministic.
    pub extra_mr_rounds: u32,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            trial_bound: 1_000_000,
            rho_effort: 1 << 22,
            extra_mr_rounds: 16,
        }
    }
}

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredInteger {
    value: BigUint,
    factors: Vec<(BigUint, u32)>,
}

impl FactoredInteger {
    /// Builds from prime powers, merging duplicates and sorting by prime.
    /// Primality of the supplied primes is the caller's responsibility.
    pub fn from_prime_powers(mut pairs: Vec<(BigUint, u32)>) -> Self {
        pairs.retain(|(_, e)| *e > 0);
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut factors: Vec<(BigUint, u32)> = Vec::with_capacity(pairs.len());
        for (p, e) in pairs {
            match factors.last_mut() {
                Some((q, f)) if *q == p => *f += e,
                _ => factors.push((p, e)),
            }
        }
        let value = factors
            .iter()
            .fold(BigUint::one(), |acc, (p, e)| acc * p.pow(*e));
        Self { value, factors }
    }

    pub fn one() -> Self {
        Self {
            value: BigUint::one(),
            factors: Vec::new(),
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn factors(&self) -> &[(BigUint, u32)] {
        &self.factors
    }

    /// Product of two factorizations.
    pub fn mul(&self, other: &FactoredInteger) -> FactoredInteger {
        let mut pairs = self.factors.clone();
        pairs.extend(other.factors.iter().cloned());
        Self::from_prime_powers(pairs)
    }

    /// Raises every exponent by a factor of `n`.
    pub fn pow(&self, n: u32) -> FactoredInteger {
        Self::from_prime_powers(self.factors.iter().map(|(p, e)| (p.clone(), e * n)).collect())
    }

    /// Exponent of `p` (zero when absent).
    pub fn valuation(&self, p: &BigUint) -> u32 {
        self.factors
            .iter()
            .find(|(q, _)| q == p)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }
}

fn sieve(limit: usize) -> Vec<u32> {
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u32);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// All primes up to one million, computed once.
pub fn small_primes() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| sieve(1_000_000))
}

/// All primes `<= limit`.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit <= 1_000_000 {
        small_primes()
            .iter()
            .take_while(|&&p| (p as u64) <= limit)
            .map(|&p| p as u64)
            .collect()
    } else {
        sieve(limit as usize).into_iter().map(u64::from).collect()
    }
}

#[inline]
pub(crate) fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

const WITNESSES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Deterministic primality for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for &a in &WITNESSES[..12] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mr_round(n: &BigUint, a: &BigUint, d: &BigUint, s: u64) -> bool {
    let n1 = n - 1u32;
    let mut x = a.modpow(d, n);
    if x.is_one() || x == n1 {
        return true;
    }
    for _ in 1..s {
        x = &x * &x % n;
        if x == n1 {
            return true;
        }
    }
    false
}

/// Strong probable-prime test. The fixed witness set is deterministic below
/// 3.3e24; above that `extra_rounds` additional derived bases are used.
pub fn is_probable_prime(n: &BigUint, extra_rounds: u32) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in &WITNESSES {
        if (n % p).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    for &a in &WITNESSES {
        if !mr_round(n, &BigUint::from(a), &d, s) {
            return false;
        }
    }
    // Above the deterministic range: bases from a fixed LCG stream.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    for _ in 0..extra_rounds {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let a = BigUint::from(state >> 1) % (n - 3u32) + 2u32;
        if !mr_round(n, &a, &d, s) {
            return false;
        }
    }
    true
}

fn brent_u64(n: u64, c: u64) -> Option<u64> {
    let f = |x: u64| (mulmod(x, x, n) + c) % n;
    let (mut y, mut r, mut q, mut g) = (2u64, 1u64, 1u64, 1u64);
    let mut x = y;
    let mut ys = y;
    let m = 128u64;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..m.min(r - k) {
                y = f(y);
                q = mulmod(q, x.abs_diff(y), n);
            }
            g = q.gcd(&n);
            k += m;
        }
        r <<= 1;
        if r > 1 << 40 {
            return None;
        }
    }
    if g == n {
        loop {
            ys = f(ys);
            g = x.abs_diff(ys).gcd(&n);
            if g > 1 {
                break;
            }
        }
    }
    (g != n).then_some(g)
}

fn split_u64(n: u64, out: &mut Vec<(u64, u32)>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        out.push((n, 1));
        return;
    }
    // Perfect squares defeat nothing here, but small square factors were
    // already stripped by trial division; rho handles the rest.
    let mut c = 1;
    loop {
        if let Some(d) = brent_u64(n, c) {
            split_u64(d, out);
            split_u64(n / d, out);
            return;
        }
        c += 1;
    }
}

/// Complete factorization of a machine-word integer, sorted by prime.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    assert!(n > 0, "factor_u64 of zero");
    let mut out = Vec::new();
    for &p in small_primes().iter().take(1229) {
        let p = p as u64;
        if p * p > n {
            break;
        }
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }
    if n > 1 {
        let mut rest = Vec::new();
        split_u64(n, &mut rest);
        out.extend(rest);
    }
    out.sort_unstable();
    let mut merged: Vec<(u64, u32)> = Vec::with_capacity(out.len());
    for (p, e) in out {
        match merged.last_mut() {
            Some((q, f)) if *q == p => *f += e,
            _ => merged.push((p, e)),
        }
    }
    merged
}

fn brent_big(n: &BigUint, c: u64, budget: &mut u64) -> Option<BigUint> {
    let c = BigUint::from(c);
    let f = |x: &BigUint| (x * x + &c) % n;
    let mut y = BigUint::from(2u32);
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut q = BigUint::one();
    let mut g = BigUint::one();
    let mut r = 1u64;
    let m = 128u64;
    let diff = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
    while g.is_one() {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        let mut k = 0;
        while k < r && g.is_one() {
            ys = y.clone();
            let steps = m.min(r - k);
            for _ in 0..steps {
                y = f(&y);
                q = q * diff(&x, &y) % n;
            }
            g = q.gcd(n);
            k += m;
            if *budget < steps {
                return None;
            }
            *budget -= steps;
        }
        r <<= 1;
    }
    if &g == n {
        loop {
            ys = f(&ys);
            g = diff(&x, &ys).gcd(n);
            if !g.is_one() {
                break;
            }
        }
    }
    (&g != n).then_some(g)
}

fn split_big(
    original: &BigUint,
    n: BigUint,
    cfg: &FactorConfig,
    out: &mut Vec<(BigUint, u32)>,
) -> Result<()> {
    if n.is_one() {
        return Ok(());
    }
    if let Some(small) = n.to_u64() {
        out.extend(
            factor_u64(small)
                .into_iter()
                .map(|(p, e)| (BigUint::from(p), e)),
        );
        return Ok(());
    }
    if is_probable_prime(&n, cfg.extra_mr_rounds) {
        out.push((n, 1));
        return Ok(());
    }
    let mut budget = cfg.rho_effort;
    for c in 1..=64u64 {
        if let Some(d) = brent_big(&n, c, &mut budget) {
            let other = &n / &d;
            split_big(original, d, cfg, out)?;
            return split_big(original, other, cfg, out);
        }
        if budget == 0 {
            break;
        }
    }
    Err(Error::IncompleteFactorization {
        n: original.clone(),
        cofactor: n,
    })
}

/// Factors `n >= 1` with the default effort configuration.
pub fn factorize(n: &BigUint) -> Result<FactoredInteger> {
    factorize_with(n, &FactorConfig::default())
}

/// Factors a signed integer, rejecting zero and negative values.
pub fn factorize_int(n: &BigInt) -> Result<FactoredInteger> {
    match n.sign() {
        Sign::Plus => factorize(n.magnitude()),
        _ => Err(Error::Domain(format!("cannot factor non-positive {n}"))),
    }
}

pub fn factorize_with(n: &BigUint, cfg: &FactorConfig) -> Result<FactoredInteger> {
    if n.is_zero() {
        return Err(Error::Domain("cannot factor 0".into()));
    }
    if let Some(small) = n.to_u64() {
        return Ok(FactoredInteger::from_prime_powers(
            factor_u64(small)
                .into_iter()
                .map(|(p, e)| (BigUint::from(p), e))
                .collect(),
        ));
    }
    let mut rest = n.clone();
    let mut pairs = Vec::new();
    for &p in small_primes() {
        if p > cfg.trial_bound {
            break;
        }
        if rest.to_u64().is_some() {
            break;
        }
        if (&rest % p).is_zero() {
            let mut e = 0;
            while (&rest % p).is_zero() {
                rest /= p;
                e += 1;
            }
            pairs.push((BigUint::from(p), e));
        }
        let pp = BigUint::from(p) * p;
        if pp > rest {
            break;
        }
    }
    split_big(n, rest, cfg, &mut pairs)?;
    Ok(FactoredInteger::from_prime_powers(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut p = 2;
        while p * p <= n {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
            p += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    #[test]
    fn record_k_factors() {
        let f = factorize(&BigUint::from(489489u32)).unwrap();
        let got: Vec<(u64, u32)> = f
            .factors()
            .iter()
            .map(|(p, e)| (p.to_u64().unwrap(), *e))
            .collect();
        assert_eq!(got, vec![(3, 1), (7, 1), (11, 1), (13, 1), (163, 1)]);
        assert!(factorize(&BigUint::one()).unwrap().factors().is_empty());
    }

    #[test]
    fn matches_trial_division_to_one_million() {
        for n in 1..=1_000_000u64 {
            assert_eq!(factor_u64(n), trial(n), "n = {n}");
        }
    }

    #[test]
    fn zero_and_negative_rejected() {
        assert!(factorize(&BigUint::zero()).is_err());
        assert!(factorize_int(&BigInt::from(-6)).is_err());
    }

    #[test]
    fn splits_large_semiprime() {
        // Two primes just above 2^40 so trial division cannot help.
        let p = BigUint::from(1_099_511_627_791u64);
        let q = BigUint::from(1_099_511_627_803u64);
        assert!(is_probable_prime(&p, 4) && is_probable_prime(&q, 4));
        let n = &p * &q;
        let f = factorize(&n).unwrap();
        assert_eq!(f.factors(), &[(p, 1), (q, 1)]);
    }

    #[test]
    fn rank_eleven_record_factors() {
        let k: BigUint = "13293998056584952174157235".parse().unwrap();
        let f = factorize(&k).unwrap();
        let primes: Vec<u64> = f.factors().iter().map(|(p, _)| p.to_u64().unwrap()).collect();
        assert_eq!(
            primes,
            vec![3, 5, 7, 13, 19, 23, 31, 43, 59, 61, 73, 79, 103, 109, 157, 457]
        );
    }

    #[test]
    fn effort_bound_reports_incomplete() {
        let p: BigUint = "1000000000000000000117".parse().unwrap();
        let q: BigUint = "1000000000000000000193".parse().unwrap();
        if is_probable_prime(&p, 8) && is_probable_prime(&q, 8) {
            let cfg = FactorConfig {
                rho_effort: 1000,
                ..FactorConfig::default()
            };
            match factorize_with(&(&p * &q), &cfg) {
                Err(Error::IncompleteFactorization { .. }) => {}
                other => panic!("expected incomplete factorization, got {other:?}"),
            }
        }
    }
}
