//! Rational parametrizations of the three cubic surfaces
//!
//! * `S1: w³ + x³ = y³ + z³` (pairs of points on one `E_k`),
//! * `S2: wx(w + x) = yz(y + z)` (pairs of points on one `E'_k`),
//! * `S3: wx(w + x) = y³ + z³` (one point on `E'_k`, one on `E_k`),
//!
//! together with the factored form of each surface's class invariant, so
//! that `k` can be recovered by factoring several small numbers instead of
//! one degree-9 value.
//!
//! Pair convention: the first point of a sample comes from `(w, x)`, the
//! second from `(y, z)`, both divided by the same `d` with
//! `invariant = ±k·d³`. For S3 that is `(w/d, x/d)` on `uv(u+v) = k` and
//! `(y/d, z/d)` on `x³ + y³ = k`. A negative invariant flips the sign of all
//! four coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{cubefree_from_factored, factor_u64, factorize, CubefreeK, FactoredInteger};
use crate::curves::{CurveForm, CurveModel, CurvePoint};
use crate::descent::{selmer_bound_u64, selmer_rank_bound};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceId {
    S1,
    S2,
    S3,
}

impl SurfaceId {
    pub const ALL: [SurfaceId; 3] = [SurfaceId::S1, SurfaceId::S2, SurfaceId::S3];

    fn coords_table(self) -> &'static [Poly3; 4] {
        match self {
            SurfaceId::S1 => &S1_COORDS,
            SurfaceId::S2 => &S2_COORDS,
            SurfaceId::S3 => &S3_COORDS,
        }
    }

    fn factor_table(self) -> &'static [Poly3] {
        match self {
            SurfaceId::S1 => S1_FACTORS,
            SurfaceId::S2 => S2_FACTORS,
            SurfaceId::S3 => S3_FACTORS,
        }
    }

    /// Forms of the `(w, x)` and `(y, z)` points.
    pub fn point_forms(self) -> (CurveForm, CurveForm) {
        match self {
            SurfaceId::S1 => (CurveForm::CubicEk, CurveForm::CubicEk),
            SurfaceId::S2 => (CurveForm::CubicEkPrime, CurveForm::CubicEkPrime),
            SurfaceId::S3 => (CurveForm::CubicEkPrime, CurveForm::CubicEk),
        }
    }
}

impl fmt::Display for SurfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceId::S1 => "s1",
            SurfaceId::S2 => "s2",
            SurfaceId::S3 => "s3",
        })
    }
}

impl FromStr for SurfaceId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(SurfaceId::S1),
            "s2" => Ok(SurfaceId::S2),
            "s3" => Ok(SurfaceId::S3),
            _ => domain(format!("unknown surface {s:?}")),
        }
    }
}

/// Largest parameter magnitude accepted; keeps every polynomial value
/// inside `i128`.
pub const MAX_PARAM: i64 = 1 << 24;

/// Parameters `(p0, p1, p2)`: `(r, s, t)` for S2 and S3, `(t, s, r)` for S1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceTriple {
    pub surface: SurfaceId,
    pub params: [i64; 3],
}

impl SurfaceTriple {
    pub fn new(surface: SurfaceId, params: [i64; 3]) -> Result<Self> {
        if params == [0, 0, 0] {
            return domain("parameter triple is zero");
        }
        if params.iter().any(|p| p.abs() > MAX_PARAM) {
            return domain(format!("parameters exceed {MAX_PARAM} in magnitude"));
        }
        Ok(Self { surface, params })
    }

    /// gcd 1 and first nonzero entry positive.
    pub fn is_canonical(&self) -> bool {
        let g = self.params.iter().fold(0i64, |g, &p| g.gcd(&p));
        g == 1 && self.params.iter().find(|&&p| p != 0).is_some_and(|&p| p > 0)
    }
}

type Poly3 = &'static [(i64, [u32; 3])];

fn eval_poly(poly: Poly3, p: [i64; 3]) -> i128 {
    poly.iter()
        .map(|&(c, e)| {
            let mut v = c as i128;
            for (x, e) in p.iter().zip(e) {
                v *= (*x as i128).pow(e);
            }
            v
        })
        .sum()
}

fn eval_raw(t: &SurfaceTriple) -> [i128; 4] {
    let tab = t.surface.coords_table();
    [0, 1, 2, 3].map(|i| eval_poly(tab[i], t.params))
}

/// Surface point for a triple, with the common content divided out.
pub fn evaluate(t: &SurfaceTriple) -> [BigInt; 4] {
    let raw = eval_raw(t);
    let g = raw.iter().fold(0i128, |g, &v| g.gcd(&v));
    let g = if g == 0 { 1 } else { g };
    raw.map(|v| BigInt::from(v / g))
}

/// `wx(w + x)` for S2/S3, `w³ + x³` for S1.
pub fn class_invariant(surface: SurfaceId, c: &[BigInt; 4]) -> BigInt {
    match surface {
        SurfaceId::S1 => c[0].pow(3) + c[1].pow(3),
        _ => &c[0] * &c[1] * (&c[0] + &c[1]),
    }
}

/// Values at the triple of the fixed factorization of the class invariant
/// of the raw (content not removed) parametrization; every multiplicity is 1.
pub fn factored_invariant(t: &SurfaceTriple) -> Vec<(BigInt, u32)> {
    t.surface
        .factor_table()
        .iter()
        .map(|f| (BigInt::from(eval_poly(f, t.params)), 1))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SurfaceSample {
    pub triple: SurfaceTriple,
    pub coords: [BigInt; 4],
    pub k: Option<CubefreeK>,
    /// Denominator of both points, relative to `coords`.
    pub d: BigUint,
    pub pair: Option<(CurvePoint, CurvePoint)>,
    pub degenerate: bool,
}

fn factor_abs(v: &BigInt) -> Result<Vec<(BigUint, u32)>> {
    let m = v.magnitude();
    if let Some(small) = m.to_u64() {
        return Ok(factor_u64(small)
            .into_iter()
            .map(|(p, e)| (BigUint::from(p), e))
            .collect());
    }
    Ok(factorize(m)?.factors().to_vec())
}

pub fn sample(t: &SurfaceTriple) -> Result<SurfaceSample> {
    let raw = eval_raw(t);
    let g = raw.iter().fold(0i128, |g, &v| g.gcd(&v));
    let factors = factored_invariant(t);
    let degenerate = g == 0 || factors.iter().any(|(v, _)| v.is_zero());
    let coords = raw.map(|v| BigInt::from(if g == 0 { 0 } else { v / g }));
    if degenerate {
        return Ok(SurfaceSample {
            triple: *t,
            coords,
            k: None,
            d: BigUint::one(),
            pair: None,
            degenerate: true,
        });
    }
    let mut acc: BTreeMap<BigUint, u32> = BTreeMap::new();
    let mut negative = false;
    for (v, mult) in &factors {
        negative ^= v.sign() == Sign::Minus && mult % 2 == 1;
        for (p, e) in factor_abs(v)? {
            *acc.entry(p).or_default() += e * mult;
        }
    }
    let (k, d_raw) = cubefree_from_factored(&FactoredInteger::from_prime_powers(acc.into_iter().collect()));
    let g = BigUint::from(g.unsigned_abs());
    let d = &d_raw / &g;
    debug_assert_eq!(&d * &g, d_raw);

    let sgn = if negative { -BigInt::one() } else { BigInt::one() };
    let den = BigInt::from(d.clone());
    let r = |i: usize| BigRational::new(&sgn * &coords[i], den.clone());
    let (f1, f2) = t.surface.point_forms();
    let m1 = Arc::new(CurveModel::new(k.clone(), f1)?);
    let m2 = if f2 == f1 { m1.clone() } else { Arc::new(CurveModel::new(k.clone(), f2)?) };
    let p1 = CurvePoint::new(m1, r(0), r(1))?;
    let p2 = CurvePoint::new(m2, r(2), r(3))?;
    Ok(SurfaceSample {
        triple: *t,
        coords,
        k: Some(k),
        d,
        pair: Some((p1, p2)),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ScanFilters {
    pub min_selmer: Option<usize>,
    pub max_k: Option<BigUint>,
    /// Cap on the number of decimal digits of `k`.
    pub max_k_digits: Option<usize>,
}

impl ScanFilters {
    fn accepts(&self, k: &CubefreeK) -> Result<bool> {
        if self.max_k.as_ref().is_some_and(|m| k.value() > m) {
            return Ok(false);
        }
        if self.max_k_digits.is_some_and(|m| k.to_string().len() > m) {
            return Ok(false);
        }
        if let Some(r) = self.min_selmer {
            let bound = match k.to_u64() {
                Some(v) => {
                    let f: Vec<(u64, u32)> = k.factors().iter().map(|(p, e)| (p.to_u64().unwrap(), *e)).collect();
                    selmer_bound_u64(&f, v % 9)
                }
                None => selmer_rank_bound(k)?.bound,
            };
            if bound < r {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    pub triples: u64,
    pub degenerate: u64,
    pub factor_failures: u64,
    pub filtered: u64,
    pub emitted: u64,
}

impl std::ops::AddAssign for ScanStats {
    fn add_assign(&mut self, o: Self) {
        self.triples += o.triples;
        self.degenerate += o.degenerate;
        self.factor_failures += o.factor_failures;
        self.filtered += o.filtered;
        self.emitted += o.emitted;
    }
}

/// All canonical triples of the box with first parameter `p0`, in
/// lexicographic order of `(p1, p2)`.
pub fn slab_triples(surface: SurfaceId, bound: i64, p0: i64) -> impl Iterator<Item = SurfaceTriple> {
    (-bound..=bound)
        .flat_map(move |p1| (-bound..=bound).map(move |p2| [p0, p1, p2]))
        .map(move |params| SurfaceTriple { surface, params })
        .filter(|t| t.is_canonical())
}

/// Samples of one slab (`p0` fixed) that pass the filters.
pub fn scan_slab(surface: SurfaceId, bound: i64, filters: &ScanFilters, p0: i64) -> (Vec<SurfaceSample>, ScanStats) {
    let mut stats = ScanStats::default();
    let mut out = Vec::new();
    for t in slab_triples(surface, bound, p0) {
        stats.triples += 1;
        let s = match sample(&t) {
            Ok(s) => s,
            Err(_) => {
                stats.factor_failures += 1;
                continue;
            }
        };
        if s.degenerate {
            stats.degenerate += 1;
            continue;
        }
        match filters.accepts(s.k.as_ref().unwrap()) {
            Ok(true) => {
                stats.emitted += 1;
                out.push(s);
            }
            Ok(false) => stats.filtered += 1,
            Err(_) => stats.factor_failures += 1,
        }
    }
    (out, stats)
}

/// Position in a box scan: slabs `p0 < next_slab` are done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanCursor {
    pub next_slab: i64,
}

/// Scans slabs from `cursor` onward, `chunk` slabs at a time in parallel,
/// handing each finished chunk (in slab order) and the cursor after it to
/// `on_chunk`, which returns whether to keep going.
pub fn scan_box_resumable<F>(
    surface: SurfaceId,
    bound: i64,
    filters: &ScanFilters,
    cursor: ScanCursor,
    chunk: usize,
    mut on_chunk: F,
) -> Result<ScanStats>
where
    F: FnMut(Vec<SurfaceSample>, ScanCursor) -> Result<bool>,
{
    if bound < 1 {
        return domain("box must be at least 1");
    }
    let mut total = ScanStats::default();
    let mut next = cursor.next_slab.max(0);
    let chunk = chunk.max(1) as i64;
    while next <= bound {
        let end = (next + chunk - 1).min(bound);
        let parts: Vec<_> = (next..=end)
            .into_par_iter()
            .map(|p0| scan_slab(surface, bound, filters, p0))
            .collect();
        let mut samples = Vec::new();
        for (s, st) in parts {
            samples.extend(s);
            total += st;
        }
        next = end + 1;
        if !on_chunk(samples, ScanCursor { next_slab: next })? {
            break;
        }
    }
    Ok(total)
}

pub fn scan_box(surface: SurfaceId, bound: i64, filters: &ScanFilters) -> Result<(Vec<SurfaceSample>, ScanStats)> {
    let mut all = Vec::new();
    let stats = scan_box_resumable(surface, bound, filters, ScanCursor { next_slab: 0 }, usize::MAX >> 2, |s, _| {
        all.extend(s);
        Ok(true)
    })?;
    Ok((all, stats))
}

type Mono = [u32; 3];

fn poly_from(table: Poly3) -> BTreeMap<Mono, i64> {
    let mut p = BTreeMap::new();
    for &(c, e) in table {
        *p.entry(e).or_insert(0) += c;
    }
    p.retain(|_, c| *c != 0);
    p
}

fn poly_mul(a: &BTreeMap<Mono, i64>, b: &BTreeMap<Mono, i64>) -> BTreeMap<Mono, i64> {
    let mut p = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
            *p.entry(e).or_insert(0) += ca * cb;
        }
    }
    p.retain(|_, c| *c != 0);
    p
}

fn poly_add(a: &BTreeMap<Mono, i64>, b: &BTreeMap<Mono, i64>) -> BTreeMap<Mono, i64> {
    let mut p = a.clone();
    for (e, c) in b {
        *p.entry(*e).or_insert(0) += c;
    }
    p.retain(|_, c| *c != 0);
    p
}

/// Expands the hardcoded factorizations and parametrizations symbolically
/// and checks both the surface equation and the invariant factorization.
pub fn verify_factorizations() -> Result<()> {
    for s in SurfaceId::ALL {
        let c = s.coords_table().map(poly_from);
        let (lhs, rhs) = match s {
            SurfaceId::S1 => (
                poly_add(&poly_mul(&poly_mul(&c[0], &c[0]), &c[0]), &poly_mul(&poly_mul(&c[1], &c[1]), &c[1])),
                poly_add(&poly_mul(&poly_mul(&c[2], &c[2]), &c[2]), &poly_mul(&poly_mul(&c[3], &c[3]), &c[3])),
            ),
            SurfaceId::S2 => (
                poly_mul(&poly_mul(&c[0], &c[1]), &poly_add(&c[0], &c[1])),
                poly_mul(&poly_mul(&c[2], &c[3]), &poly_add(&c[2], &c[3])),
            ),
            SurfaceId::S3 => (
                poly_mul(&poly_mul(&c[0], &c[1]), &poly_add(&c[0], &c[1])),
                poly_add(&poly_mul(&poly_mul(&c[2], &c[2]), &c[2]), &poly_mul(&poly_mul(&c[3], &c[3]), &c[3])),
            ),
        };
        if lhs != rhs {
            return domain(format!("{s}: parametrization does not satisfy the surface equation"));
        }
        let mut prod = BTreeMap::from([([0, 0, 0], 1i64)]);
        for f in s.factor_table() {
            prod = poly_mul(&prod, &poly_from(f));
        }
        if prod != lhs {
            return domain(format!("{s}: invariant factorization does not expand correctly"));
        }
    }
    Ok(())
}

// Parametrizations as coefficient tables `(c, [e0, e1, e2])` meaning
// `c·p0^e0·p1^e1·p2^e2`.
const S1_COORDS: [Poly3; 4] = [
    &[(1, [3, 0, 0]), (-2, [2, 1, 0]), (1, [1, 2, 0]), (-2, [1, 1, 1]), (-1, [0, 2, 1]), (1, [0, 1, 2]), (-1, [0, 0, 3])],
    &[(-1, [3, 0, 0]), (-2, [2, 1, 0]), (1, [1, 2, 0]), (-2, [1, 1, 1]), (-1, [0, 3, 0]), (2, [0, 2, 1]), (-2, [0, 1, 2]), (1, [0, 0, 3])],
    &[(2, [3, 0, 0]), (-2, [2, 1, 0]), (3, [2, 0, 1]), (1, [1, 2, 0]), (-2, [1, 1, 1]), (3, [1, 0, 2]), (-1, [0, 3, 0]), (2, [0, 2, 1]), (-2, [0, 1, 2]), (1, [0, 0, 3])],
    &[(-2, [3, 0, 0]), (1, [2, 1, 0]), (-3, [2, 0, 1]), (-2, [1, 2, 0]), (4, [1, 1, 1]), (-3, [1, 0, 2]), (-1, [0, 2, 1]), (1, [0, 1, 2]), (-1, [0, 0, 3])],
];
// -s, two quadratics, one quartic.
const S1_FACTORS: &[Poly3] = &[
    &[(-1, [0, 1, 0])],
    &[(4, [2, 0, 0]), (-2, [1, 1, 0]), (4, [1, 0, 1]), (1, [0, 2, 0]), (-1, [0, 1, 1]), (1, [0, 0, 2])],
    &[(1, [2, 0, 0]), (1, [1, 1, 0]), (-2, [1, 0, 1]), (1, [0, 2, 0]), (-1, [0, 1, 1]), (1, [0, 0, 2])],
    &[(3, [4, 0, 0]), (-3, [3, 1, 0]), (6, [3, 0, 1]), (4, [2, 2, 0]), (-9, [2, 1, 1]), (9, [2, 0, 2]), (-2, [1, 3, 0]), (7, [1, 2, 1]), (-9, [1, 1, 2]), (6, [1, 0, 3]), (1, [0, 4, 0]), (-4, [0, 3, 1]), (7, [0, 2, 2]), (-6, [0, 1, 3]), (3, [0, 0, 4])],
];
const S2_COORDS: [Poly3; 4] = [
    &[(-1, [2, 1, 0]), (1, [0, 2, 1])],
    &[(1, [2, 1, 0]), (-1, [1, 0, 2])],
    &[(-1, [2, 0, 1]), (1, [0, 1, 2])],
    &[(1, [1, 2, 0]), (-1, [0, 1, 2])],
];
// r, s, t, st - r², rs - t², s² - rt
const S2_FACTORS: &[Poly3] = &[
    &[(1, [1, 0, 0])],
    &[(1, [0, 1, 0])],
    &[(1, [0, 0, 1])],
    &[(-1, [2, 0, 0]), (1, [0, 1, 1])],
    &[(1, [1, 1, 0]), (-1, [0, 0, 2])],
    &[(-1, [1, 0, 1]), (1, [0, 2, 0])],
];
const S3_COORDS: [Poly3; 4] = [
    &[(1, [3, 0, 0]), (-1, [0, 3, 0])],
    &[(1, [0, 3, 0]), (1, [0, 0, 3])],
    &[(1, [2, 1, 0]), (1, [1, 0, 2]), (-1, [0, 2, 1])],
    &[(1, [2, 0, 1]), (-1, [1, 2, 0]), (-1, [0, 1, 2])],
];
// r - s, s + t, r + t, r² + rs + s², s² - st + t², r² - rt + t²
const S3_FACTORS: &[Poly3] = &[
    &[(1, [1, 0, 0]), (-1, [0, 1, 0])],
    &[(1, [0, 1, 0]), (1, [0, 0, 1])],
    &[(1, [1, 0, 0]), (1, [0, 0, 1])],
    &[(1, [2, 0, 0]), (1, [1, 1, 0]), (1, [0, 2, 0])],
    &[(1, [0, 2, 0]), (-1, [0, 1, 1]), (1, [0, 0, 2])],
    &[(1, [2, 0, 0]), (-1, [1, 0, 1]), (1, [0, 0, 2])],
];
