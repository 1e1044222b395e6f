//! Point search by divisors of `x + y`.
//!
//! On `E_k` a primitive solution of `x³ + y³ = k·d³` has `a = x + y` and
//! `q = x² − xy + y² = k·d³/a` with `gcd(a, q) | 3`. Away from 3 the
//! `p`-part of `a` is therefore all or nothing of the `p`-part of `k·d³`,
//! and at 3 it is forced: `v₃(a) = v₃(k·d³) − 1` when `3 | k·d³`. Since
//! `q ≥ a²/4`, also `a³ ≤ 4k·d³`. Each candidate leaves a quadratic for
//! `x, y`.
//!
//! On `E'_k` a primitive solution of `uv(u + v) = k·d³` has `a = u + v`
//! coprime to `uv = k·d³/a`, so `±a` is a unitary divisor of `k·d³`.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::factor::powmod;
use crate::arith::{factor_u64, CubefreeK};
use crate::curves::{convert, minimal_model, phi_weierstrass, Curve, CurveForm, CurveModel, CurvePoint};
use crate::error::Result;

/// Default cap on `|x + y|` candidates.
pub const DEFAULT_A_BUDGET: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveChoice {
    Ek,
    EkPrime,
    Both,
}

impl CurveChoice {
    fn includes(self, c: Curve) -> bool {
        matches!((self, c), (CurveChoice::Both, _) | (CurveChoice::Ek, Curve::Ek) | (CurveChoice::EkPrime, Curve::EkPrime))
    }
}

#[derive(Debug, Clone)]
pub struct SearchTask {
    pub k: CubefreeK,
    pub d_max: u64,
    pub a_budget: BigUint,
    pub local_filter_primes: Vec<u64>,
    pub curves: CurveChoice,
}

impl SearchTask {
    pub fn new(k: CubefreeK, d_max: u64) -> Self {
        Self {
            k,
            d_max: d_max.max(1),
            a_budget: BigUint::from(DEFAULT_A_BUDGET),
            local_filter_primes: vec![5, 7, 11, 13],
            curves: CurveChoice::Ek,
        }
    }
}

/// A primitive solution `(x, y, d)`, `x ≤ y`, and its image on the minimal
/// model of `E'_k`.
#[derive(Debug, Clone)]
pub struct FoundPoint {
    pub k: CubefreeK,
    pub curve: Curve,
    pub x: BigInt,
    pub y: BigInt,
    pub d: u64,
    pub minimal: CurvePoint,
}

impl FoundPoint {
    /// The point on its cubic model.
    pub fn cubic_point(&self) -> CurvePoint {
        let form = match self.curve {
            Curve::Ek => CurveForm::CubicEk,
            Curve::EkPrime => CurveForm::CubicEkPrime,
        };
        let m = Arc::new(CurveModel::new(self.k.clone(), form).unwrap());
        let d = BigInt::from(self.d);
        CurvePoint::new(m, BigRational::new(self.x.clone(), d.clone()), BigRational::new(self.y.clone(), d)).unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub points: Vec<FoundPoint>,
    /// Number of `(a, d)` cells examined.
    pub cells: u64,
    /// Cells dropped by the local filters before solving.
    pub filtered: u64,
    /// Whether the budget cut off part of the candidate range.
    pub truncated: bool,
}

fn kd3_factors(k: &CubefreeK, d: u64) -> Vec<(BigUint, u32)> {
    let mut f: Vec<(BigUint, u32)> = k.factors().to_vec();
    for (p, e) in factor_u64(d) {
        let p = BigUint::from(p);
        match f.iter_mut().find(|(q, _)| *q == p) {
            Some(entry) => entry.1 += 3 * e,
            None => f.push((p, 3 * e)),
        }
    }
    f.sort();
    f
}

/// All products of a subset of `parts` times `base` that are `≤ bound`,
/// ascending.
fn subset_products(base: BigUint, parts: &[BigUint], bound: &BigUint) -> Vec<BigUint> {
    let mut parts = parts.to_vec();
    parts.sort();
    let mut out = Vec::new();
    fn go(i: usize, cur: BigUint, parts: &[BigUint], bound: &BigUint, out: &mut Vec<BigUint>) {
        if i == parts.len() {
            out.push(cur);
            return;
        }
        let with = &cur * &parts[i];
        if &with <= bound {
            go(i + 1, with, parts, bound, out);
        }
        go(i + 1, cur, parts, bound, out);
    }
    if &base <= bound {
        go(0, base, &parts, bound, &mut out);
    }
    out.sort();
    out
}

/// Largest `a` that can occur on `E_k` for this `d`: `⌊∛(4k·d³)⌋`.
pub fn natural_a_bound(k: &CubefreeK, d: u64) -> BigUint {
    (BigUint::from(4u32) * k.value() * BigUint::from(d).pow(3)).cbrt()
}

/// Candidate values of `a = x + y` on `E_k`, ascending, capped at `budget`.
pub fn divisor_candidates(k: &CubefreeK, d: u64, budget: &BigUint) -> Vec<BigUint> {
    let f = kd3_factors(k, d);
    let three = BigUint::from(3u32);
    let v3 = f.iter().find(|(p, _)| *p == three).map_or(0, |x| x.1);
    if v3 == 1 {
        return Vec::new();
    }
    let base = if v3 >= 2 { three.pow(v3 - 1) } else { BigUint::one() };
    let parts: Vec<BigUint> = f.iter().filter(|(p, _)| *p != three).map(|(p, e)| p.pow(*e)).collect();
    let bound = natural_a_bound(k, d).min(budget.clone());
    subset_products(base, &parts, &bound)
}

/// Positive unitary divisors of `k·d³` up to `budget`, ascending.
pub fn unitary_divisors(k: &CubefreeK, d: u64, budget: &BigUint) -> Vec<BigUint> {
    let parts: Vec<BigUint> = kd3_factors(k, d).iter().map(|(p, e)| p.pow(*e)).collect();
    subset_products(BigUint::one(), &parts, budget)
}

fn square_table(m: u64) -> Vec<bool> {
    let mut t = vec![false; m as usize];
    for i in 0..m {
        t[(i * i % m) as usize] = true;
    }
    t
}

fn may_be_square(n: &BigInt, primes: &[u64]) -> bool {
    if n.is_negative() {
        return false;
    }
    let r64 = (n % 64u32).to_u64().unwrap();
    let r63 = (n % 63u32).to_u64().unwrap();
    thread_local! {
        static SQ: (Vec<bool>, Vec<bool>) = (square_table(64), square_table(63));
    }
    if !SQ.with(|(a, b)| a[r64 as usize] && b[r63 as usize]) {
        return false;
    }
    primes.iter().all(|&p| {
        if p == 2 {
            return true;
        }
        let r = (n % p).to_u64().unwrap();
        r == 0 || powmod(r, (p - 1) / 2, p) == 1
    })
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    (&s * &s == *n).then_some(s)
}

/// `xy` and the discriminant `(x − y)²` for `x + y = a` on `E_k`, if `xy`
/// is integral.
fn ek_quadratic(k: &CubefreeK, a: &BigInt, d: u64) -> Option<BigInt> {
    let n = k.to_bigint() * BigInt::from(d).pow(3);
    if a.is_zero() || !(&n % a).is_zero() {
        return None;
    }
    let q = &n / a;
    let num: BigInt = a * a - &q;
    if !num.is_multiple_of(&BigInt::from(3)) {
        return None;
    }
    let p: BigInt = num / 3;
    Some(a * a - 4 * p)
}

/// Whether the `(a, d)` cell can contain a solution on `E_k`. Returns
/// `false` only when integrality of `xy` fails or the discriminant of
/// `X² − aX + xy` is a non-square mod 64, mod 63 or mod a filter prime.
pub fn local_filter(k: &CubefreeK, a: &BigInt, d: u64, primes: &[u64]) -> bool {
    match ek_quadratic(k, a, d) {
        None => false,
        Some(disc) => may_be_square(&disc, primes),
    }
}

/// The primitive solution with `x + y = a` on `x³ + y³ = k·d³`, as `x ≤ y`.
pub fn solve_pair(k: &CubefreeK, a: &BigInt, d: u64) -> Option<(BigInt, BigInt)> {
    let disc = ek_quadratic(k, a, d)?;
    let s: BigInt = exact_sqrt(&disc)?;
    if (a + &s).is_odd() {
        return None;
    }
    let x: BigInt = (a - &s) / 2;
    let y: BigInt = (a + &s) / 2;
    x.gcd(&y).is_one().then_some((x, y))
}

/// The primitive solution with `u + v = a` on `uv(u + v) = k·d³`, `u ≤ v`.
pub fn solve_pair_ekprime(k: &CubefreeK, a: &BigInt, d: u64) -> Option<(BigInt, BigInt)> {
    let n = k.to_bigint() * BigInt::from(d).pow(3);
    if a.is_zero() || !(&n % a).is_zero() {
        return None;
    }
    let p = &n / a;
    let disc: BigInt = a * a - 4 * &p;
    let s: BigInt = exact_sqrt(&disc)?;
    if (a + &s).is_odd() {
        return None;
    }
    let u: BigInt = (a - &s) / 2;
    let v: BigInt = (a + &s) / 2;
    u.gcd(&v).is_one().then_some((u, v))
}

fn to_minimal(p: &CurvePoint) -> Result<CurvePoint> {
    let target = minimal_model(p.k()).form();
    match p.model().form().curve() {
        Curve::Ek => convert(&phi_weierstrass(p)?, target),
        Curve::EkPrime => convert(p, target),
    }
}

fn found(k: &CubefreeK, curve: Curve, x: BigInt, y: BigInt, d: u64) -> Result<FoundPoint> {
    let mut fp = FoundPoint {
        k: k.clone(),
        curve,
        x,
        y,
        d,
        minimal: CurvePoint::infinity(Arc::new(minimal_model(k))),
    };
    fp.minimal = to_minimal(&fp.cubic_point())?;
    Ok(fp)
}

struct Cell {
    points: Vec<FoundPoint>,
    cells: u64,
    filtered: u64,
    truncated: bool,
}

fn search_d(task: &SearchTask, d: u64) -> Result<Cell> {
    let k = &task.k;
    let mut out = Cell {
        points: Vec::new(),
        cells: 0,
        filtered: 0,
        truncated: false,
    };
    if task.curves.includes(Curve::Ek) {
        out.truncated |= natural_a_bound(k, d) > task.a_budget;
        for a in divisor_candidates(k, d, &task.a_budget) {
            let a = BigInt::from(a);
            out.cells += 1;
            if !local_filter(k, &a, d, &task.local_filter_primes) {
                out.filtered += 1;
                continue;
            }
            if let Some((x, y)) = solve_pair(k, &a, d) {
                out.points.push(found(k, Curve::Ek, x, y, d)?);
            }
        }
    }
    if task.curves.includes(Curve::EkPrime) {
        let n = k.value() * BigUint::from(d).pow(3);
        out.truncated |= n > task.a_budget;
        for a in unitary_divisors(k, d, &task.a_budget) {
            for sign in [Sign::Plus, Sign::Minus] {
                let a = BigInt::from_biguint(sign, a.clone());
                out.cells += 1;
                if let Some((u, v)) = solve_pair_ekprime(k, &a, d) {
                    out.points.push(found(k, Curve::EkPrime, u, v, d)?);
                }
            }
        }
    }
    Ok(out)
}

/// All primitive solutions with `d ≤ d_max` inside the budget, sorted by
/// curve, `d`, `x`, `y`.
pub fn search(task: &SearchTask) -> Result<SearchResult> {
    let parts: Vec<Cell> = (1..=task.d_max)
        .into_par_iter()
        .map(|d| search_d(task, d))
        .collect::<Result<_>>()?;
    let mut res = SearchResult {
        points: Vec::new(),
        cells: 0,
        filtered: 0,
        truncated: false,
    };
    let mut seen = BTreeSet::new();
    for c in parts {
        res.cells += c.cells;
        res.filtered += c.filtered;
        res.truncated |= c.truncated;
        for p in c.points {
            let key = (p.curve == Curve::EkPrime, p.d, p.x.clone(), p.y.clone());
            if seen.insert(key) {
                res.points.push(p);
            }
        }
    }
    res.points
        .sort_by(|a, b| (a.curve == Curve::EkPrime, a.d, &a.x, &a.y).cmp(&(b.curve == Curve::EkPrime, b.d, &b.x, &b.y)));
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn k(n: u64) -> CubefreeK {
        CubefreeK::from_u64(n).unwrap()
    }

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn candidate_examples() {
        let budget = BigUint::from(DEFAULT_A_BUDGET);
        let c = divisor_candidates(&k(6), 21, &budget);
        assert!(c.contains(&BigUint::from(54u32)));
        for a in &c {
            assert!((BigUint::from(166698u32) % a).is_zero());
        }
        let c = divisor_candidates(&k(2), 1, &budget);
        assert_eq!(c, vec![BigUint::from(1u32), BigUint::from(2u32)]);
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_pair(&k(6), &big(54), 21), Some((big(17), big(37))));
        assert_eq!(solve_pair(&k(2), &big(2), 1), Some((big(1), big(1))));
        assert_eq!(solve_pair(&k(19), &big(3), 1), None);
        assert!(!local_filter(&k(19), &big(3), 1, &[]));
        assert!(local_filter(&k(6), &big(54), 21, &[5, 7, 11, 13]));
        assert!(local_filter(&k(2), &big(2), 1, &[]));
    }

    #[test]
    fn search_examples() {
        let r = search(&SearchTask::new(k(6), 21)).unwrap();
        assert!(r.points.iter().any(|p| p.x == big(17) && p.y == big(37) && p.d == 21));
        assert!(!r.truncated);
        let r = search(&SearchTask::new(k(2), 1)).unwrap();
        assert!(r.points.iter().any(|p| p.x == big(1) && p.y == big(1) && p.d == 1));
        for p in &r.points {
            assert_eq!(p.minimal.model().form(), CurveForm::MinimalEkPrimeEven);
        }
    }

    #[test]
    fn integral_record_solutions_on_ekprime() {
        let kk = CubefreeK::parse("1683200989470").unwrap();
        let mut t = SearchTask::new(kk, 1);
        t.curves = CurveChoice::EkPrime;
        let r = search(&t).unwrap();
        let got: BTreeSet<(i64, i64)> = r
            .points
            .iter()
            .filter(|p| p.x.is_positive() && p.y.is_positive())
            .map(|p| (p.x.to_i64().unwrap(), p.y.to_i64().unwrap()))
            .collect();
        for (u, v) in [(11, 391170), (533, 55930), (770, 46371), (1003, 40467), (2639, 23970), (6970, 12441), (7293, 11977), (8555, 10387)] {
            assert!(got.contains(&(u, v)), "missing ({u}, {v})");
        }
    }

    /// Primitive `x ≤ y`, `|x|, |y| ≤ 1265`, `x³ + y³ = k·d³`, `k ≤ 100`,
    /// `d ≤ 20`, by a double loop.
    fn brute_ek() -> HashMap<u64, BTreeSet<(i64, i64, u64)>> {
        let mut targets = HashMap::new();
        for kk in 1..=100u64 {
            if CubefreeK::from_u64(kk).is_err() {
                continue;
            }
            for d in 1..=20u64 {
                targets.insert((kk * d * d * d) as i64, (kk, d));
            }
        }
        let mut out: HashMap<u64, BTreeSet<(i64, i64, u64)>> = HashMap::new();
        for x in -1265i64..=1265 {
            for y in x..=1265 {
                let n = x * x * x + y * y * y;
                if let Some(&(kk, d)) = targets.get(&n) {
                    if x.gcd(&y) == 1 {
                        out.entry(kk).or_default().insert((x, y, d));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn complete_against_double_loop() {
        let brute = brute_ek();
        for kk in 1..=100u64 {
            let Ok(kc) = CubefreeK::from_u64(kk) else { continue };
            let mut t = SearchTask::new(kc, 20);
            t.local_filter_primes = vec![5, 7, 11, 13, 17, 19];
            let r = search(&t).unwrap();
            let got: BTreeSet<(i64, i64, u64)> = r
                .points
                .iter()
                .map(|p| (p.x.to_i64().unwrap(), p.y.to_i64().unwrap(), p.d))
                .collect();
            let want = brute.get(&kk).cloned().unwrap_or_default();
            // The search has no height cap, so it may see more.
            assert!(want.is_subset(&got), "k = {kk}: missing {:?}", want.difference(&got).collect::<Vec<_>>());
            for p in &r.points {
                let (x, y) = (p.x.to_i64().unwrap() as i128, p.y.to_i64().unwrap() as i128);
                if x.abs() <= 1265 && y.abs() <= 1265 {
                    assert!(want.contains(&(x as i64, y as i64, p.d)));
                }
                assert!(local_filter(&p.k, &(&p.x + &p.y), p.d, &t.local_filter_primes));
            }
        }
    }

    #[test]
    fn ekprime_contains_double_loop_solutions() {
        for kk in 1..=60u64 {
            let Ok(kc) = CubefreeK::from_u64(kk) else { continue };
            let mut t = SearchTask::new(kc, 6);
            t.curves = CurveChoice::EkPrime;
            let got: BTreeSet<(i64, i64, u64)> = search(&t)
                .unwrap()
                .points
                .iter()
                .map(|p| (p.x.to_i64().unwrap(), p.y.to_i64().unwrap(), p.d))
                .collect();
            for u in -300i64..=300 {
                for v in u..=300 {
                    let n = u * v * (u + v);
                    if n <= 0 || u.gcd(&v) != 1 {
                        continue;
                    }
                    for d in 1..=6u64 {
                        if n == (kk * d * d * d) as i64 {
                            assert!(got.contains(&(u, v, d)), "k = {kk}: ({u}, {v}, {d})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn order_independent() {
        let t = SearchTask::new(k(91), 12);
        let a = search(&t).unwrap();
        let b = search(&t).unwrap();
        let key = |r: &SearchResult| r.points.iter().map(|p| (p.x.clone(), p.y.clone(), p.d)).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
    }
}
