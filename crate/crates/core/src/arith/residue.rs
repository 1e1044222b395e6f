//! Cubic residue symbols modulo primes `q ≡ 1 (mod 3)` and the cubic
//! character modulo 9, both reported as exponents in F₃.
//!
//! The cube root of unity mod `q` is fixed as `ρ = g^((q-1)/3)` with `g` the
//! smallest primitive root. The mod-9 character is normalised by `χ(2) = 1`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::factor::{factor_u64, factorize, is_prime_u64, is_probable_prime, powmod};
use crate::error::{domain, Result};

/// Smallest primitive root modulo the prime `q`.
pub fn smallest_primitive_root(q: u64) -> u64 {
    if q == 2 {
        return 1;
    }
    let order_primes: Vec<u64> = factor_u64(q - 1).into_iter().map(|(r, _)| r).collect();
    (2..q)
        .find(|&g| order_primes.iter().all(|&r| powmod(g, (q - 1) / r, q) != 1))
        .expect("a prime modulus has a primitive root")
}

fn rho_cache() -> &'static Mutex<HashMap<u64, u64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, u64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The fixed primitive cube root of unity `ρ` modulo `q`.
pub fn cube_root_of_unity(q: u64) -> u64 {
    if let Some(&r) = rho_cache().lock().unwrap().get(&q) {
        return r;
    }
    let r = powmod(smallest_primitive_root(q), (q - 1) / 3, q);
    rho_cache().lock().unwrap().insert(q, r);
    r
}

/// Symbol exponent for a residue already reduced mod `q`, with the caller
/// vouching that `q` is a prime `≡ 1 (mod 3)` and `a ≢ 0`.
pub fn cubic_symbol_u64(a: u64, q: u64) -> u8 {
    let v = powmod(a % q, (q - 1) / 3, q);
    if v == 1 {
        return 0;
    }
    let rho = cube_root_of_unity(q);
    if v == rho {
        1
    } else {
        debug_assert_eq!(v, mulmod_sq(rho, q));
        2
    }
}

fn mulmod_sq(r: u64, q: u64) -> u64 {
    super::factor::mulmod(r, r, q)
}

/// Exponent `e ∈ {0,1,2}` with `a^((q-1)/3) ≡ ρ^e (mod q)`.
pub fn cubic_residue_symbol(a: &BigInt, q: &BigUint) -> Result<u8> {
    let Some(q64) = q.to_u64() else {
        return cubic_residue_symbol_big(a, q);
    };
    if !is_prime_u64(q64) {
        return domain(format!("{q} is not prime"));
    }
    if q64 % 3 != 1 {
        return domain(format!("{q} is not 1 mod 3"));
    }
    let r = a.mod_floor(&BigInt::from(q64)).to_u64().unwrap();
    if r == 0 {
        return domain(format!("{q} divides {a}"));
    }
    Ok(cubic_symbol_u64(r, q64))
}

fn cubic_residue_symbol_big(a: &BigInt, q: &BigUint) -> Result<u8> {
    if !is_probable_prime(q, 16) {
        return domain(format!("{q} is not prime"));
    }
    if (q % 3u32) != BigUint::one() {
        return domain(format!("{q} is not 1 mod 3"));
    }
    let qi = BigInt::from(q.clone());
    let r = a.mod_floor(&qi).to_biguint().unwrap();
    if r.is_zero() {
        return domain(format!("{q} divides {a}"));
    }
    let q1 = q - 1u32;
    let order_primes: Vec<BigUint> = factorize(&q1)?
        .factors()
        .iter()
        .map(|(p, _)| p.clone())
        .collect();
    let mut g = BigUint::from(2u32);
    while !order_primes
        .iter()
        .all(|p| !g.modpow(&(&q1 / p), q).is_one())
    {
        g += 1u32;
    }
    let third = &q1 / 3u32;
    let rho = g.modpow(&third, q);
    let v = r.modpow(&third, q);
    Ok(if v.is_one() {
        0
    } else if v == rho {
        1
    } else {
        2
    })
}

/// Cubic character mod 9 on units: `χ(2^j) = j mod 3`, so `χ(±1) = 0`.
pub fn cubic_character_mod9(a: &BigInt) -> Result<u8> {
    let r = a.mod_floor(&BigInt::from(9)).to_u64().unwrap();
    Ok(match r {
        1 | 8 => 0,
        2 | 7 => 1,
        4 | 5 => 2,
        _ => return domain(format!("3 divides {a}")),
    })
}

pub fn cubic_character_mod9_u64(a: u64) -> u8 {
    match a % 9 {
        1 | 8 => 0,
        2 | 7 => 1,
        4 | 5 => 2,
        _ => panic!("3 divides {a}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(a: i64, q: u64) -> u8 {
        cubic_residue_symbol(&BigInt::from(a), &BigUint::from(q)).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(sym(3, 73), 0);
        assert_eq!(cube_root_of_unity(7), 2);
        assert_eq!(sym(2, 7), 2);
        assert_eq!(sym(1, 13), 0);
        assert_eq!(sym(-1, 7), 0);
    }

    #[test]
    fn domain_errors() {
        let bad = |a: i64, q: u64| cubic_residue_symbol(&BigInt::from(a), &BigUint::from(q)).is_err();
        assert!(bad(2, 5));
        assert!(bad(2, 25));
        assert!(bad(14, 7));
        assert!(cubic_character_mod9(&BigInt::from(6)).is_err());
    }

    #[test]
    fn mod9_character() {
        let chi = |a: i64| cubic_character_mod9(&BigInt::from(a)).unwrap();
        assert_eq!(chi(8), 0);
        assert_eq!(chi(2), 1);
        assert_eq!(chi(4), 2);
        assert_eq!(chi(-1), 0);
        for a in [1i64, 2, 4, 5, 7, 8] {
            for b in [1i64, 2, 4, 5, 7, 8] {
                assert_eq!(chi(a * b), (chi(a) + chi(b)) % 3);
            }
        }
    }

    #[test]
    fn big_modulus_path_agrees() {
        // A prime above 2^64 that is 1 mod 3, checked against the definition.
        let mut q = (BigUint::one() << 64u32) + 1u32;
        while !(is_probable_prime(&q, 8) && &q % 3u32 == BigUint::one()) {
            q += 2u32;
        }
        let a = BigInt::from(10);
        let e = cubic_residue_symbol(&a, &q).unwrap();
        let a3 = cubic_residue_symbol(&BigInt::from(1000), &q).unwrap();
        assert_eq!(a3, 0);
        let a2 = cubic_residue_symbol(&BigInt::from(100), &q).unwrap();
        assert_eq!(a2, (2 * e) % 3);
    }

    proptest::proptest! {
        #[test]
        fn multiplicative(a in 1u64..100_000, b in 1u64..100_000, qi in 0usize..600) {
            let q = crate::arith::factor::small_primes()
                .iter()
                .map(|&p| p as u64)
                .filter(|p| p % 3 == 1 && *p < 10_000)
                .nth(qi % 400)
                .unwrap();
            proptest::prop_assume!(a % q != 0 && b % q != 0);
            let ab = (a as u128 * b as u128 % q as u128) as u64;
            proptest::prop_assert_eq!(
                cubic_symbol_u64(ab, q),
                (cubic_symbol_u64(a, q) + cubic_symbol_u64(b, q)) % 3
            );
        }
    }
}
