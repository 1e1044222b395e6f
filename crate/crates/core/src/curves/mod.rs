//! Exact models of `E_k: x³ + y³ = k` and its 3-isogenous partner
//! `E'_k: uv(u+v) = k`, with rational points and the chord-tangent law.
//!
//! Every Weierstrass-type model in this family has the shape
//! `y² + a3·y = x³ + a6` with `a3 ∈ {0, 1}`, so a single group-law routine
//! serves all of them. Cubic models carry points too, but must be converted
//! before doing arithmetic.

mod isogeny;

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::CubefreeK;
use crate::error::{Error, Result};

pub use isogeny::{convert, phi, phi_hat, phi_weierstrass, torsion_subgroup};

/// Which of the two isogenous curves a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    Ek,
    EkPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveForm {
    /// `x³ + y³ = k`
    CubicEk,
    /// `Y² = X³ − 432k²`
    WeierstrassEk,
    /// `uv(u + v) = k`
    CubicEkPrime,
    /// `V² = U³ + 16k²`
    WeierstrassEkPrime,
    /// `Z² = W³ + k²/4`, k even
    MinimalEkPrimeEven,
    /// `Z² + Z = W³ + (k² − 1)/4`, k odd
    MinimalEkPrimeOdd,
}

impl CurveForm {
    pub const ALL: [CurveForm; 6] = [
        CurveForm::CubicEk,
        CurveForm::WeierstrassEk,
        CurveForm::CubicEkPrime,
        CurveForm::WeierstrassEkPrime,
        CurveForm::MinimalEkPrimeEven,
        CurveForm::MinimalEkPrimeOdd,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CurveForm::CubicEk => "cubic_ek",
            CurveForm::WeierstrassEk => "weierstrass_ek",
            CurveForm::CubicEkPrime => "cubic_ekprime",
            CurveForm::WeierstrassEkPrime => "weierstrass_ekprime",
            CurveForm::MinimalEkPrimeEven => "minimal_ekprime_even",
            CurveForm::MinimalEkPrimeOdd => "minimal_ekprime_odd",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| Error::Domain(format!("unknown model tag {tag:?}")))
    }

    pub fn curve(self) -> Curve {
        match self {
            CurveForm::CubicEk | CurveForm::WeierstrassEk => Curve::Ek,
            _ => Curve::EkPrime,
        }
    }

    pub fn is_weierstrass(self) -> bool {
        !matches!(self, CurveForm::CubicEk | CurveForm::CubicEkPrime)
    }
}

/// A concrete model of `E_k` or `E'_k` for a fixed cubefree `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CurveModel {
    k: CubefreeK,
    form: CurveForm,
}

impl CurveModel {
    pub fn new(k: CubefreeK, form: CurveForm) -> Result<Self> {
        match form {
            CurveForm::MinimalEkPrimeEven if !k.is_even() => {
                Err(Error::Domain(format!("even minimal model requested for odd k = {k}")))
            }
            CurveForm::MinimalEkPrimeOdd if k.is_even() => {
                Err(Error::Domain(format!("odd minimal model requested for even k = {k}")))
            }
            _ => Ok(Self { k, form }),
        }
    }

    pub fn k(&self) -> &CubefreeK {
        &self.k
    }

    pub fn form(&self) -> CurveForm {
        self.form
    }

    /// Coefficients `(a3, a6)` of `y² + a3·y = x³ + a6`; `None` for cubic forms.
    pub fn weierstrass_coeffs(&self) -> Option<(BigInt, BigInt)> {
        let k = self.k.to_bigint();
        let k2 = &k * &k;
        match self.form {
            CurveForm::WeierstrassEk => Some((BigInt::zero(), -BigInt::from(432) * k2)),
            CurveForm::WeierstrassEkPrime => Some((BigInt::zero(), BigInt::from(16) * k2)),
            CurveForm::MinimalEkPrimeEven => Some((BigInt::zero(), k2 / 4)),
            CurveForm::MinimalEkPrimeOdd => Some((BigInt::one(), (k2 - 1) / 4)),
            _ => None,
        }
    }

    /// Exact membership test for an affine point.
    pub fn contains(&self, x: &BigRational, y: &BigRational) -> bool {
        let k = BigRational::from_integer(self.k.to_bigint());
        match self.form {
            CurveForm::CubicEk => x * x * x + y * y * y == k,
            CurveForm::CubicEkPrime => x * y * (x + y) == k,
            _ => {
                let (a3, a6) = self.weierstrass_coeffs().unwrap();
                y * y + BigRational::from_integer(a3) * y
                    == x * x * x + BigRational::from_integer(a6)
            }
        }
    }

    /// Human-readable equation with the exact constant term.
    pub fn equation(&self) -> String {
        let k = self.k.value();
        match self.form {
            CurveForm::CubicEk => format!("x^3 + y^3 = {k}"),
            CurveForm::CubicEkPrime => format!("u*v*(u + v) = {k}"),
            _ => {
                let (a3, a6) = self.weierstrass_coeffs().unwrap();
                let lhs = if a3.is_zero() { "y^2" } else { "y^2 + y" };
                if a6.is_negative() {
                    format!("{lhs} = x^3 - {}", -a6)
                } else {
                    format!("{lhs} = x^3 + {a6}")
                }
            }
        }
    }
}

impl fmt::Display for CurveModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.equation(), self.form.tag())
    }
}

/// The minimal Weierstrass model of `E'_k`.
pub fn minimal_model(k: &CubefreeK) -> CurveModel {
    let form = if k.is_even() {
        CurveForm::MinimalEkPrimeEven
    } else {
        CurveForm::MinimalEkPrimeOdd
    };
    CurveModel::new(k.clone(), form).expect("parity matches")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Coords {
    Infinity,
    Affine(BigRational, BigRational),
}

/// An exact rational point on a named model. Affine points are checked
/// against the model equation on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CurvePoint {
    model: Arc<CurveModel>,
    coords: Coords,
}

impl CurvePoint {
    pub fn new(model: Arc<CurveModel>, x: BigRational, y: BigRational) -> Result<Self> {
        if !model.contains(&x, &y) {
            return Err(Error::NotOnCurve {
                model: model.to_string(),
                x: fmt_rational(&x),
                y: fmt_rational(&y),
            });
        }
        Ok(Self {
            model,
            coords: Coords::Affine(x, y),
        })
    }

    pub fn from_ints(model: Arc<CurveModel>, x: impl Into<BigInt>, y: impl Into<BigInt>) -> Result<Self> {
        Self::new(
            model,
            BigRational::from_integer(x.into()),
            BigRational::from_integer(y.into()),
        )
    }

    pub fn parse(model: Arc<CurveModel>, x: &str, y: &str) -> Result<Self> {
        Self::new(model, parse_rational(x)?, parse_rational(y)?)
    }

    pub fn infinity(model: Arc<CurveModel>) -> Self {
        Self {
            model,
            coords: Coords::Infinity,
        }
    }

    pub fn model(&self) -> &Arc<CurveModel> {
        &self.model
    }

    pub fn k(&self) -> &CubefreeK {
        self.model.k()
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn xy(&self) -> Option<(&BigRational, &BigRational)> {
        match &self.coords {
            Coords::Infinity => None,
            Coords::Affine(x, y) => Some((x, y)),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self.coords, Coords::Infinity)
    }

    fn require_weierstrass(&self) -> Result<(BigInt, BigInt)> {
        self.model.weierstrass_coeffs().ok_or_else(|| {
            Error::Domain(format!(
                "group law needs a Weierstrass model, got {}",
                self.model.form().tag()
            ))
        })
    }

    pub fn neg(&self) -> Result<CurvePoint> {
        let (a3, _) = self.require_weierstrass()?;
        Ok(match &self.coords {
            Coords::Infinity => self.clone(),
            Coords::Affine(x, y) => CurvePoint {
                model: self.model.clone(),
                coords: Coords::Affine(x.clone(), -y - BigRational::from_integer(a3)),
            },
        })
    }

    pub fn add(&self, other: &CurvePoint) -> Result<CurvePoint> {
        if self.model != other.model {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model, other.model)));
        }
        let (a3, _) = self.require_weierstrass()?;
        let coords = add_affine(&self.coords, &other.coords, &BigRational::from_integer(a3));
        Ok(CurvePoint {
            model: self.model.clone(),
            coords,
        })
    }

    pub fn sub(&self, other: &CurvePoint) -> Result<CurvePoint> {
        self.add(&other.neg()?)
    }

    /// `[n]P` by double-and-add.
    pub fn mul(&self, n: i64) -> Result<CurvePoint> {
        self.mul_big(&BigInt::from(n))
    }

    pub fn mul_big(&self, n: &BigInt) -> Result<CurvePoint> {
        let (a3, _) = self.require_weierstrass()?;
        let a3 = BigRational::from_integer(a3);
        let base = if n.is_negative() { self.neg()? } else { self.clone() };
        let mag = n.magnitude();
        let mut acc = Coords::Infinity;
        for i in (0..mag.bits()).rev() {
            acc = add_affine(&acc, &acc, &a3);
            if mag.bit(i) {
                acc = add_affine(&acc, &base.coords, &a3);
            }
        }
        Ok(CurvePoint {
            model: self.model.clone(),
            coords: acc,
        })
    }

    /// Returns the same point re-tagged on an equal model (for points parsed
    /// against separately constructed but identical models).
    pub fn with_model(&self, model: Arc<CurveModel>) -> Result<CurvePoint> {
        if *model != *self.model {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model, model)));
        }
        Ok(CurvePoint {
            model,
            coords: self.coords.clone(),
        })
    }
}

impl fmt::Display for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.coords {
            Coords::Infinity => write!(f, "O"),
            Coords::Affine(x, y) => write!(f, "({}, {})", fmt_rational(x), fmt_rational(y)),
        }
    }
}

/// Chord-tangent addition on `y² + a3·y = x³ + a6`.
pub(crate) fn add_affine(p: &Coords, q: &Coords, a3: &BigRational) -> Coords {
    let (x1, y1, x2, y2) = match (p, q) {
        (Coords::Infinity, _) => return q.clone(),
        (_, Coords::Infinity) => return p.clone(),
        (Coords::Affine(x1, y1), Coords::Affine(x2, y2)) => (x1, y1, x2, y2),
    };
    let slope = if x1 == x2 {
        let denom = y1 + y2 + a3;
        if denom.is_zero() {
            return Coords::Infinity;
        }
        let three = BigRational::from_integer(BigInt::from(3));
        three * x1 * x1 / denom
    } else {
        (y2 - y1) / (x2 - x1)
    };
    let x3 = &slope * &slope - x1 - x2;
    let y3 = -(&slope * (&x3 - x1)) - y1 - a3;
    Coords::Affine(x3, y3)
}

/// Formats as `num/den`, omitting the denominator when it is 1.
pub fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Domain(format!("not an exact rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
    }
}

/// Conductor data for `E'_k` (equal to that of `E_k`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConductorData {
    #[serde(serialize_with = "ser_display")]
    pub k: CubefreeK,
    pub beta3: u32,
    #[serde(serialize_with = "ser_display")]
    pub value: BigUint,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// `N = ∏_{p | 3k} p^(2 + β_p)` with `β_p = 0` for `p ≠ 3`.
pub fn conductor(k: &CubefreeK) -> ConductorData {
    let beta3 = conductor_beta3(k);
    let mut value = BigUint::from(3u32).pow(2 + beta3);
    for (p, _) in k.factors() {
        if p != &BigUint::from(3u32) {
            value *= p * p;
        }
    }
    ConductorData {
        k: k.clone(),
        beta3,
        value,
    }
}

/// `β₃`: 0 for `k ≡ ±2`, 1 for `k ≡ ±1, ±4 (mod 9)`, 3 when `3 | k`.
pub fn conductor_beta3(k: &CubefreeK) -> u32 {
    beta3_of_residue(k.rem_u64(9))
}

pub(crate) fn beta3_of_residue(r: u64) -> u32 {
    match r % 9 {
        2 | 7 => 0,
        1 | 8 | 4 | 5 => 1,
        _ => 3,
    }
}

/// Height-free size measure used in a few reports.
pub fn naive_log_height(x: &BigRational) -> f64 {
    let n = x.numer().abs().to_f64().unwrap_or(f64::INFINITY);
    let d = x.denom().to_f64().unwrap_or(f64::INFINITY);
    n.max(d).ln()
}

pub(crate) fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
