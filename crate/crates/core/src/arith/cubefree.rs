use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::factor::{factorize, FactoredInteger};
use crate::error::{domain, Result};

/// A positive cubefree integer with its factorization. Every exponent is 1 or 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubefreeK {
    k: BigUint,
    factors: Vec<(BigUint, u32)>,
}

impl CubefreeK {
    /// Factors `k` and checks that it is cubefree.
    pub fn new(k: &BigUint) -> Result<Self> {
        if k.is_zero() {
            return domain("k must be positive");
        }
        Self::from_factored(factorize(k)?)
    }

    pub fn from_u64(k: u64) -> Result<Self> {
        Self::new(&BigUint::from(k))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let k: BigUint = s
            .trim()
            .parse()
            .map_err(|_| crate::Error::Domain(format!("not a positive integer: {s:?}")))?;
        Self::new(&k)
    }

    pub fn from_factored(f: FactoredInteger) -> Result<Self> {
        if let Some((p, e)) = f.factors().iter().find(|(_, e)| *e > 2) {
            return domain(format!("{} is not cubefree ({p}^{e} divides it)", f.value()));
        }
        Ok(Self {
            k: f.value().clone(),
            factors: f.factors().to_vec(),
        })
    }

    /// Builds from `(prime, exponent)` pairs known to be prime.
    pub fn from_prime_powers(pairs: Vec<(BigUint, u32)>) -> Result<Self> {
        Self::from_factored(FactoredInteger::from_prime_powers(pairs))
    }

    pub fn one() -> Self {
        Self {
            k: BigUint::one(),
            factors: Vec::new(),
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.k
    }

    pub fn to_bigint(&self) -> BigInt {
        BigInt::from(self.k.clone())
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.k.to_u64()
    }

    /// `(p_j, eps_j)` with primes increasing.
    pub fn factors(&self) -> &[(BigUint, u32)] {
        &self.factors
    }

    pub fn is_even(&self) -> bool {
        !self.k.bit(0)
    }

    /// `k mod m` for a small modulus.
    pub fn rem_u64(&self, m: u64) -> u64 {
        (&self.k % m).to_u64().unwrap()
    }

    pub fn valuation(&self, p: u64) -> u32 {
        let p = BigUint::from(p);
        self.factors
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn as_factored(&self) -> FactoredInteger {
        FactoredInteger::from_prime_powers(self.factors.clone())
    }
}

impl fmt::Display for CubefreeK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k)
    }
}

impl Serialize for CubefreeK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.k.to_string())
    }
}

impl<'de> Deserialize<'de> for CubefreeK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CubefreeK::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Result of splitting `n = sign * k * d^3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubefreePart {
    pub k: CubefreeK,
    pub d: BigUint,
    pub sign: Sign,
}

/// Splits an already-factored magnitude into its cubefree part and cube root
/// of the remaining cube.
pub fn cubefree_from_factored(f: &FactoredInteger) -> (CubefreeK, BigUint) {
    let mut k_pairs = Vec::new();
    let mut d = BigUint::one();
    for (p, e) in f.factors() {
        if e % 3 != 0 {
            k_pairs.push((p.clone(), e % 3));
        }
        if e / 3 > 0 {
            d *= p.pow(e / 3);
        }
    }
    let k = CubefreeK::from_prime_powers(k_pairs).expect("exponents reduced mod 3");
    (k, d)
}

/// `|n| = k * d^3` with `k` cubefree; the sign of `n` is returned separately.
pub fn cubefree_part(n: &BigInt) -> Result<CubefreePart> {
    if n.is_zero() {
        return domain("cubefree part of 0 is undefined");
    }
    let f = factorize(n.magnitude())?;
    let (k, d) = cubefree_from_factored(&f);
    Ok(CubefreePart {
        k,
        d,
        sign: n.sign(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(n: i64) -> (u64, u64, Sign) {
        let p = cubefree_part(&BigInt::from(n)).unwrap();
        (p.k.to_u64().unwrap(), p.d.to_u64().unwrap(), p.sign)
    }

    #[test]
    fn examples() {
        assert_eq!(part(55566), (6, 21, Sign::Plus));
        assert_eq!(part(8), (1, 2, Sign::Plus));
        assert_eq!(part(19), (19, 1, Sign::Plus));
        assert_eq!(part(-6860), (20, 7, Sign::Minus));
        assert!(cubefree_part(&BigInt::zero()).is_err());
    }

    #[test]
    fn rejects_non_cubefree() {
        assert!(CubefreeK::from_u64(16).is_err());
        assert!(CubefreeK::from_u64(0).is_err());
        assert_eq!(CubefreeK::from_u64(657).unwrap().valuation(3), 2);
    }

    proptest::proptest! {
        #[test]
        fn recomposes(a in 1i64..=1000, b in 1i64..=1000) {
            let n = BigInt::from(a).pow(3) * b;
            let p = cubefree_part(&n).unwrap();
            let back = BigInt::from(p.k.value().clone()) * BigInt::from(p.d.pow(3));
            proptest::prop_assert_eq!(back, n);
            proptest::prop_assert!(p.k.factors().iter().all(|(_, e)| *e == 1 || *e == 2));
            proptest::prop_assert!((&p.d % BigUint::from(a as u64)).is_zero());
        }
    }
}
