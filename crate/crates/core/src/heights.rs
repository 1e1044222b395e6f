//! Néron–Tate heights on the minimal models of `E'_k`, the height pairing
//! and independence certificates.
//!
//! `ĥ(P) = ĥ(mP)/m²` where `m` is the least multiple with nonsingular
//! reduction at every bad prime. For such a point the finite part is
//! `½ log den x`, and the archimedean part comes from the doubling series
//! on a model translated so that every real point has `x ≥ 1`.
//! Normalization: `ĥ(P) ≈ ½ h(x(P))`.

use std::sync::Arc;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{convert, minimal_model, Curve, CurveModel, CurvePoint};
use crate::error::{Error, Result};

/// Working precision in bits.
pub const PRECISION_BITS: usize = 256;
const SERIES_TERMS: usize = 64;
/// Absolute error claimed for a single height.
pub const HEIGHT_ERROR: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-3;

const RM: RoundingMode = RoundingMode::ToEven;

fn pow2(e: i64, p: usize) -> BigFloat {
    let mut one = BigFloat::from_u64(1, p);
    one.set_exponent((1 + e) as i32);
    one
}

/// Top 192 bits of `n` plus the dropped shift.
fn leading(n: &BigUint, p: usize) -> (BigFloat, i64) {
    let shift = n.bits().saturating_sub(192);
    let top = n >> shift;
    let two64 = pow2(64, p);
    let mut acc = BigFloat::from_u64(0, p);
    for d in top.to_u64_digits().iter().rev() {
        acc = acc.mul(&two64, p, RM).add(&BigFloat::from_u64(*d, p), p, RM);
    }
    (acc, shift as i64)
}

fn ln_big(n: &BigUint, p: usize, cc: &mut Consts) -> BigFloat {
    let (top, shift) = leading(n, p);
    let ln2 = BigFloat::from_u64(2, p).ln(p, RM, cc);
    top.ln(p, RM, cc).add(&ln2.mul(&BigFloat::from_i64(shift, p), p, RM), p, RM)
}

/// `d / n` for positive integers.
fn ratio(d: &BigUint, n: &BigUint, p: usize) -> BigFloat {
    let (td, sd) = leading(d, p);
    let (tn, sn) = leading(n, p);
    td.div(&tn, p, RM).mul(&pow2(sd - sn, p), p, RM)
}

fn bf_int(n: &BigInt, p: usize) -> BigFloat {
    let (top, shift) = leading(n.magnitude(), p);
    let m = top.mul(&pow2(shift, p), p, RM);
    if n.is_negative() {
        m.neg()
    } else {
        m
    }
}

fn to_f64(x: &BigFloat) -> f64 {
    let Some((words, _, sign, e, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    if x.is_zero() {
        return 0.0;
    }
    let n = words.len();
    let mut m = words[n - 1] as f64;
    if n > 1 {
        m += words[n - 2] as f64 / 2f64.powi(64);
    }
    let v = m * 2f64.powi(e - 64);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// Model data: `y² + a3·y = x³ + a6` with `4a6 + a3² = k²`.
struct Model {
    a3: BigInt,
    b6: BigInt,
    bad: Vec<u64>,
    r: BigInt,
}

impl Model {
    fn new(m: &CurveModel) -> Self {
        let (a3, a6) = m.weierstrass_coeffs().expect("minimal model");
        let b6: BigInt = BigInt::from(4) * &a6 + &a3 * &a3;
        let mut bad: Vec<u64> = vec![3];
        for (p, _) in m.k().factors() {
            let p = p.to_u64().expect("bad primes of heights must fit in u64");
            if p != 3 {
                bad.push(p);
            }
        }
        // Every real point has 4x³ ≥ −b6, so x + r ≥ 1.
        let c = (&b6 / 4i32).abs() + 1u32;
        let r = c.cbrt() + 2u32;
        Model { a3, b6, bad, r }
    }

    /// Whether `p` reduces to the singular point modulo the prime `l`.
    fn singular_at(&self, x: &BigRational, y: &BigRational, l: u64) -> bool {
        let l = BigInt::from(l);
        if x.denom().is_multiple_of(&l) || y.denom().is_multiple_of(&l) {
            return false;
        }
        let dx = BigInt::from(3) * x.numer() * x.numer();
        let dy = BigInt::from(2) * y.numer() + &self.a3 * y.denom();
        dx.is_multiple_of(&l) && dy.is_multiple_of(&l)
    }

    fn nonsingular_everywhere(&self, pt: &CurvePoint) -> bool {
        match pt.xy() {
            None => true,
            Some((x, y)) => self.bad.iter().all(|&l| !self.singular_at(x, y, l)),
        }
    }

    /// Archimedean local height (without the discriminant term).
    fn lambda_inf(&self, x: &BigRational, p: usize, cc: &mut Consts) -> BigFloat {
        let xp = x + BigRational::from_integer(self.r.clone());
        let (num, den) = (xp.numer().magnitude(), xp.denom().magnitude());
        debug_assert!(xp.is_positive());
        let half = BigFloat::from_f64(0.5, p);
        let mut lam = ln_big(num, p, cc).sub(&ln_big(den, p, cc), p, RM).mul(&half, p, RM);
        let r = &self.r;
        let b2 = bf_int(&(BigInt::from(-12) * r), p);
        let b4 = bf_int(&(BigInt::from(6) * r * r), p);
        let b6 = bf_int(&(&self.b6 - BigInt::from(4) * r * r * r), p);
        let b8 = bf_int(&(BigInt::from(-3) * r * &self.b6 + BigInt::from(3) * r * r * r * r), p);
        let one = BigFloat::from_u64(1, p);
        let two = BigFloat::from_u64(2, p);
        let four = BigFloat::from_u64(4, p);
        let mut t = ratio(den, num, p);
        let mut weight = BigFloat::from_f64(0.125, p);
        let quarter = BigFloat::from_f64(0.25, p);
        for _ in 0..SERIES_TERMS {
            let t2 = t.mul(&t, p, RM);
            let t3 = t2.mul(&t, p, RM);
            let t4 = t3.mul(&t, p, RM);
            let w = four
                .mul(&t, p, RM)
                .add(&b2.mul(&t2, p, RM), p, RM)
                .add(&two.mul(&b4, p, RM).mul(&t3, p, RM), p, RM)
                .add(&b6.mul(&t4, p, RM), p, RM);
            let z = one
                .sub(&b4.mul(&t2, p, RM), p, RM)
                .sub(&two.mul(&b6, p, RM).mul(&t3, p, RM), p, RM)
                .sub(&b8.mul(&t4, p, RM), p, RM);
            lam = lam.add(&weight.mul(&z.ln(p, RM, cc), p, RM), p, RM);
            t = w.div(&z, p, RM);
            weight = weight.mul(&quarter, p, RM);
        }
        lam
    }
}

/// Moves a point of `E'_k` to its minimal model.
pub fn to_minimal(p: &CurvePoint) -> Result<CurvePoint> {
    if p.model().form().curve() != Curve::EkPrime {
        return Err(Error::ModelMismatch(format!(
            "heights are computed on E'_k, got a point on {}",
            p.model()
        )));
    }
    convert(p, minimal_model(p.k()).form())
}

/// `ĥ(P)` as a high-precision float.
fn height_bf(pt: &CurvePoint, cc: &mut Consts) -> Result<BigFloat> {
    let p = PRECISION_BITS;
    let pt = to_minimal(pt)?;
    let model = Model::new(pt.model());
    let mut q = pt.clone();
    let mut chosen: Option<(i64, CurvePoint)> = None;
    for m in 1..=12i64 {
        if m > 1 {
            q = q.add(&pt)?;
        }
        if q.is_infinity() && m <= 6 {
            return Ok(BigFloat::from_u64(0, p));
        }
        if chosen.is_none() && model.nonsingular_everywhere(&q) {
            chosen = Some((m, q.clone()));
        }
        if m >= 6 && chosen.is_some() {
            break;
        }
    }
    let Some((m, q)) = chosen else {
        return Err(Error::Precision(format!("no multiple up to 12 of {pt} has good reduction everywhere")));
    };
    let (x, _) = q.xy().expect("non-torsion multiple is affine");
    let half = BigFloat::from_f64(0.5, p);
    let fin = ln_big(x.denom().magnitude(), p, cc).mul(&half, p, RM);
    let total = model.lambda_inf(x, p, cc).add(&fin, p, RM);
    Ok(total.div(&BigFloat::from_i64(m * m, p), p, RM))
}

fn consts() -> Consts {
    Consts::new().expect("constants cache")
}

/// Canonical height, accurate to about `HEIGHT_ERROR`.
pub fn canonical_height(p: &CurvePoint) -> Result<f64> {
    let mut cc = consts();
    Ok(to_f64(&height_bf(p, &mut cc)?))
}

/// `⟨P, Q⟩ = (ĥ(P+Q) − ĥ(P) − ĥ(Q))/2`.
pub fn pairing(p: &CurvePoint, q: &CurvePoint) -> Result<f64> {
    let (p, q) = (to_minimal(p)?, to_minimal(q)?);
    let s = p.add(&q)?;
    Ok((canonical_height(&s)? - canonical_height(&p)? - canonical_height(&q)?) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Independent,
    /// An exact relation was found and checked.
    Dependent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeightCertificate {
    pub k: String,
    pub model: String,
    pub points: Vec<String>,
    pub heights: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub leading_minors: Vec<f64>,
    /// Error bound on each leading minor.
    pub minor_errors: Vec<f64>,
    pub regulator: f64,
    pub entry_error: f64,
    pub tol: f64,
    /// Smallest `minor − error` over the leading minors.
    pub margin: f64,
    pub verdict: Verdict,
    /// Coefficients `c` with `Σ cᵢPᵢ` torsion, when one was verified.
    pub relation: Option<Vec<i64>>,
}

/// Gram matrix of the height pairing, heights computed in parallel.
pub fn gram_matrix(points: &[CurvePoint]) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<CurvePoint> = points.iter().map(to_minimal).collect::<Result<_>>()?;
    let n = pts.len();
    let mut jobs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            jobs.push((i, j));
        }
    }
    let hs: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let pt = if i == j { pts[i].clone() } else { pts[i].add(&pts[j])? };
            canonical_height(&pt)
        })
        .collect::<Result<_>>()?;
    let mut g = vec![vec![0.0; n]; n];
    for (&(i, j), &h) in jobs.iter().zip(&hs) {
        if i == j {
            g[i][i] = h;
        }
    }
    for (&(i, j), &h) in jobs.iter().zip(&hs) {
        if i != j {
            let v = (h - g[i][i] - g[j][j]) / 2.0;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Bound on `|det(A + E) − det(A)|` for entries of `E` at most `eps`, by
/// multilinearity in the rows and Hadamard's inequality, plus rounding slack.
fn det_error(a: &[Vec<f64>], eps: f64) -> f64 {
    let n = a.len();
    let norms: Vec<f64> = a.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let row_err = eps * (n as f64).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut prod = row_err;
        for (j, nj) in norms.iter().enumerate() {
            if j != i {
                prod *= nj + row_err;
            }
        }
        total += prod;
    }
    total + 1e-12 * norms.iter().product::<f64>().max(1.0)
}

fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(piv, c);
        for r in 0..n {
            if r != c && m[c][c] != 0.0 {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Whether `Σ cᵢPᵢ` is torsion, checked exactly.
pub fn is_torsion_combination(points: &[CurvePoint], coeffs: &[i64]) -> Result<bool> {
    let mut acc: Option<CurvePoint> = None;
    for (p, &c) in points.iter().zip(coeffs) {
        if c == 0 {
            continue;
        }
        let t = to_minimal(p)?.mul(c)?;
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    Ok(match acc {
        None => true,
        Some(a) => a.mul(6)?.is_infinity(),
    })
}

/// Looks for a small integer relation expressing point `j` through the
/// earlier ones, suggested by the Gram matrix and then checked exactly.
fn find_relation(points: &[CurvePoint], g: &[Vec<f64>], j: usize) -> Result<Option<Vec<i64>>> {
    let sub: Vec<Vec<f64>> = g[..j].iter().map(|r| r[..j].to_vec()).collect();
    let rhs: Vec<f64> = g[..j].iter().map(|r| r[j]).collect();
    let c = if j == 0 { Vec::new() } else { solve(&sub, &rhs) };
    for d in 1..=12i64 {
        let scaled: Vec<f64> = c.iter().map(|v| v * d as f64).collect();
        if scaled.iter().any(|v| !v.is_finite() || v.abs() > 100.0 || (v - v.round()).abs() > 1e-4) {
            continue;
        }
        let mut rel = vec![0i64; points.len()];
        for (i, v) in scaled.iter().enumerate() {
            rel[i] = -(v.round() as i64);
        }
        rel[j] = d;
        if is_torsion_combination(points, &rel)? {
            return Ok(Some(rel));
        }
    }
    Ok(None)
}

/// Certifies independence by positive definiteness of the Gram matrix:
/// every leading minor must exceed `tol` by more than its error bound.
pub fn certify_independent(points: &[CurvePoint], tol: f64) -> Result<HeightCertificate> {
    if points.is_empty() {
        return Err(Error::Domain("no points to certify".into()));
    }
    let pts: Vec<CurvePoint> = points.iter().map(to_minimal).collect::<Result<_>>()?;
    let model: Arc<CurveModel> = pts[0].model().clone();
    if let Some(bad) = pts.iter().find(|p| p.model() != &model) {
        return Err(Error::ModelMismatch(format!("{} vs {}", bad.model(), model)));
    }
    let g = gram_matrix(&pts)?;
    let n = g.len();
    let entry_error = 2.0 * HEIGHT_ERROR;
    let mut minors = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    for j in 1..=n {
        let sub: Vec<Vec<f64>> = g[..j].iter().map(|r| r[..j].to_vec()).collect();
        errors.push(det_error(&sub, entry_error));
        minors.push(det(sub));
    }
    let margin = minors.iter().zip(&errors).map(|(m, e)| m - e).fold(f64::INFINITY, f64::min);
    let first_bad = (0..n).find(|&j| minors[j] - errors[j] <= tol);
    let (verdict, relation) = match first_bad {
        None => (Verdict::Independent, None),
        Some(j) => match find_relation(&pts, &g, j)? {
            Some(rel) => (Verdict::Dependent, Some(rel)),
            None => (Verdict::Inconclusive, None),
        },
    };
    Ok(HeightCertificate {
        k: model.k().to_string(),
        model: model.equation(),
        points: pts.iter().map(|p| p.to_string()).collect(),
        heights: (0..n).map(|i| g[i][i]).collect(),
        regulator: minors[n - 1],
        gram: g,
        leading_minors: minors,
        minor_errors: errors,
        entry_error,
        tol,
        margin,
        verdict,
        relation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::CubefreeK;
    use crate::curves::{phi_hat, phi_weierstrass, CurveForm};

    fn model(k: &str) -> Arc<CurveModel> {
        Arc::new(minimal_model(&CubefreeK::parse(k).unwrap()))
    }

    fn pt(m: &Arc<CurveModel>, x: &str, y: &str) -> CurvePoint {
        CurvePoint::parse(m.clone(), x, y).unwrap()
    }

    /// Points for k = 9902523 on y² + y = x³ + 24514990441382.
    fn rank6() -> Vec<CurvePoint> {
        let m = model("9902523");
        assert!(m.equation().ends_with("24514990441382"));
        [
            ("100092", "32051170"),
            ("-6798", "4919434"),
            ("-22338", "3656314"),
            ("43672", "10383069"),
            ("-11988", "4774114"),
            ("126720", "45380386"),
        ]
        .iter()
        .map(|(x, y)| pt(&m, x, y))
        .collect()
    }

    #[test]
    fn torsion_has_height_zero() {
        for k in [1u64, 7, 19, 657] {
            let m = model(&k.to_string());
            let y = ((k - 1) / 2).to_string();
            let t = pt(&m, "0", &y);
            assert!(canonical_height(&t).unwrap().abs() < 1e-8);
        }
        let m = model("2");
        assert!(canonical_height(&pt(&m, "-1", "0")).unwrap().abs() < 1e-8);
    }

    #[test]
    fn quadratic_and_parallelogram() {
        let pts = rank6();
        for p in &pts[..3] {
            let h = canonical_height(p).unwrap();
            assert!(h > 0.5);
            for n in [2i64, 3, 5] {
                let hn = canonical_height(&p.mul(n).unwrap()).unwrap();
                assert!((hn - (n * n) as f64 * h).abs() < 1e-6, "n = {n}: {hn} vs {h}");
            }
        }
        let (p, q) = (&pts[0], &pts[4]);
        let lhs = canonical_height(&p.add(q).unwrap()).unwrap() + canonical_height(&p.sub(q).unwrap()).unwrap();
        let rhs = 2.0 * canonical_height(p).unwrap() + 2.0 * canonical_height(q).unwrap();
        assert!((lhs - rhs).abs() < 1e-5);
    }

    #[test]
    fn pairing_properties() {
        let pts = rank6();
        let (p, q) = (&pts[1], &pts[2]);
        assert!((pairing(p, p).unwrap() - canonical_height(p).unwrap()).abs() < 1e-6);
        assert!((pairing(p, q).unwrap() - pairing(q, p).unwrap()).abs() < 1e-6);
        assert!((pairing(p, &p.neg().unwrap()).unwrap() + canonical_height(p).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn rank_six_certifies() {
        let c = certify_independent(&rank6(), DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Independent);
        assert!(c.margin > DEFAULT_TOL);
    }

    #[test]
    fn constructed_relations_are_never_independent() {
        let pts = rank6();
        let p = pts[0].clone();
        let c = certify_independent(&[p.clone(), p.mul(2).unwrap()], DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Dependent);
        assert_eq!(c.relation, Some(vec![-2, 1]));
        let combo = pts[1].mul(2).unwrap().sub(&pts[2].mul(3).unwrap()).unwrap();
        let set = vec![pts[1].clone(), pts[2].clone(), pts[3].clone(), combo];
        let c = certify_independent(&set, DEFAULT_TOL).unwrap();
        assert_ne!(c.verdict, Verdict::Independent);
        assert_eq!(c.relation, Some(vec![-2, 3, 0, 1]));
        let m = p.model().clone();
        let torsion = pt(&m, "0", &((9902523u64 - 1) / 2).to_string());
        let c = certify_independent(&[p.add(&torsion).unwrap(), p.clone()], DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Dependent);
    }

    #[test]
    fn heights_invariant_across_models_and_triple_under_isogenies() {
        let p = &rank6()[0];
        let h = canonical_height(p).unwrap();
        let w = convert(p, CurveForm::WeierstrassEkPrime).unwrap();
        assert!((canonical_height(&w).unwrap() - h).abs() < 1e-9);
        let back = phi_weierstrass(&phi_hat(&w).unwrap()).unwrap();
        assert!((canonical_height(&back).unwrap() - 9.0 * h).abs() < 1e-5);
    }

    #[test]
    fn rejects_points_on_ek() {
        let k = CubefreeK::from_u64(9).unwrap();
        let m = Arc::new(CurveModel::new(k, CurveForm::CubicEk).unwrap());
        let p = CurvePoint::from_ints(m, 2, 1).unwrap();
        assert!(matches!(canonical_height(&p), Err(Error::ModelMismatch(_))));
    }
}
