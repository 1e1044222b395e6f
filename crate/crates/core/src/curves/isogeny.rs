//! Coordinate changes between models of the same curve, and the 3-isogenies
//! `φ: E_k → E'_k`, `φ̂: E'_k → E_k`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{q, Curve, CurveForm, CurveModel, CurvePoint};
use crate::arith::CubefreeK;
use crate::error::{Error, Result};

fn kq(k: &CubefreeK) -> BigRational {
    BigRational::from_integer(k.to_bigint())
}

fn undefined(what: &str, p: &CurvePoint) -> Error {
    Error::UndefinedAtPoint(format!("{what} at {p} on {}", p.model()))
}

fn model_for(p: &CurvePoint, form: CurveForm) -> Result<Arc<CurveModel>> {
    if p.model().form() == form {
        return Ok(p.model().clone());
    }
    Ok(Arc::new(CurveModel::new(p.k().clone(), form)?))
}

/// Moves a point to another model of the same curve.
pub fn convert(p: &CurvePoint, target: CurveForm) -> Result<CurvePoint> {
    let source = p.model().form();
    if source == target {
        return Ok(p.clone());
    }
    if source.curve() != target.curve() {
        return Err(Error::ModelMismatch(format!(
            "{} and {} are models of different curves; use phi / phi_hat",
            source.tag(),
            target.tag()
        )));
    }
    let model = model_for(p, target)?;
    match source.curve() {
        Curve::Ek => convert_ek(p, model),
        Curve::EkPrime => {
            let hub = to_weierstrass_prime(p)?;
            from_weierstrass_prime(&hub, model)
        }
    }
}

fn convert_ek(p: &CurvePoint, model: Arc<CurveModel>) -> Result<CurvePoint> {
    let Some((a, b)) = p.xy() else {
        return Ok(CurvePoint::infinity(model));
    };
    let k = kq(p.k());
    match model.form() {
        CurveForm::WeierstrassEk => {
            let s = a + b;
            if s.is_zero() {
                return Err(undefined("x + y = 0", p));
            }
            let x = q(12) * &k / &s;
            let y = q(36) * &k * (b - a) / &s;
            CurvePoint::new(model, x, y)
        }
        CurveForm::CubicEk => {
            if a.is_zero() {
                return Err(undefined("X = 0", p));
            }
            let six_x = q(6) * a;
            let x = (q(36) * &k - b) / &six_x;
            let y = (q(36) * &k + b) / &six_x;
            CurvePoint::new(model, x, y)
        }
        _ => unreachable!(),
    }
}

fn to_weierstrass_prime(p: &CurvePoint) -> Result<CurvePoint> {
    let model = model_for(p, CurveForm::WeierstrassEkPrime)?;
    let Some((a, b)) = p.xy() else {
        return Ok(CurvePoint::infinity(model));
    };
    let k = kq(p.k());
    match p.model().form() {
        CurveForm::WeierstrassEkPrime => Ok(p.clone()),
        CurveForm::CubicEkPrime => {
            if b.is_zero() {
                return Err(undefined("v = 0", p));
            }
            let u = q(4) * &k / b;
            let v = (q(8) * &k * a + q(4) * &k * b) / b;
            CurvePoint::new(model, u, v)
        }
        CurveForm::MinimalEkPrimeEven => CurvePoint::new(model, q(4) * a, q(8) * b),
        CurveForm::MinimalEkPrimeOdd => CurvePoint::new(model, q(4) * a, q(8) * b + q(4)),
        _ => unreachable!(),
    }
}

fn from_weierstrass_prime(p: &CurvePoint, model: Arc<CurveModel>) -> Result<CurvePoint> {
    let Some((u, v)) = p.xy() else {
        return Ok(CurvePoint::infinity(model));
    };
    let k = kq(p.k());
    match model.form() {
        CurveForm::WeierstrassEkPrime => Ok(p.clone()),
        CurveForm::CubicEkPrime => {
            if u.is_zero() {
                return Err(undefined("U = 0 (point at infinity of the cubic)", p));
            }
            let vv = q(4) * &k / u;
            let uu = (v - q(4) * &k) / (q(2) * u);
            CurvePoint::new(model, uu, vv)
        }
        CurveForm::MinimalEkPrimeEven => CurvePoint::new(model, u / q(4), v / q(8)),
        CurveForm::MinimalEkPrimeOdd => CurvePoint::new(model, u / q(4), (v - q(4)) / q(8)),
        _ => unreachable!(),
    }
}

/// `φ(x, y) = (y²/x, −k/(xy))` from `x³ + y³ = k` to `uv(u+v) = k`.
/// Accepts any model of `E_k`; the image is on the cubic model of `E'_k`.
pub fn phi(p: &CurvePoint) -> Result<CurvePoint> {
    if p.model().form().curve() != Curve::Ek {
        return Err(Error::ModelMismatch(format!("phi expects a point on E_k, got {}", p.model())));
    }
    let cubic = convert(p, CurveForm::CubicEk)?;
    let target = Arc::new(CurveModel::new(p.k().clone(), CurveForm::CubicEkPrime)?);
    let Some((x, y)) = cubic.xy() else {
        return Ok(CurvePoint::infinity(target));
    };
    if x.is_zero() || y.is_zero() {
        return Err(undefined("xy = 0", &cubic));
    }
    let k = kq(p.k());
    let u = y * y / x;
    let v = -k / (x * y);
    CurvePoint::new(target, u, v)
}

/// `φ` computed on `Y² = X³ − 432k²` with image on `V² = U³ + 16k²`.
/// Agrees with [`phi`] where that is defined and also covers `xy = 0`;
/// the kernel (`X = 0`) goes to the identity.
pub fn phi_weierstrass(p: &CurvePoint) -> Result<CurvePoint> {
    if p.model().form().curve() != Curve::Ek {
        return Err(Error::ModelMismatch(format!("phi expects a point on E_k, got {}", p.model())));
    }
    let w = convert(p, CurveForm::WeierstrassEk)?;
    let target = Arc::new(CurveModel::new(p.k().clone(), CurveForm::WeierstrassEkPrime)?);
    let Some((x, y)) = w.xy() else {
        return Ok(CurvePoint::infinity(target));
    };
    if x.is_zero() {
        return Ok(CurvePoint::infinity(target));
    }
    let k = kq(p.k());
    let dd = q(-432) * &k * &k;
    let x3 = x * x * x;
    let u = (&x3 + q(4) * &dd) / (x * x) / q(9);
    let v = -(y * (&x3 - q(8) * &dd) / &x3) / q(27);
    CurvePoint::new(target, u, v)
}

/// `φ̂(U, V) = ((U³ + 64k²)/U², V(U³ − 128k²)/U³)` onto `Y² = X³ − 432k²`.
/// Accepts any model of `E'_k`; the kernel points `U = 0` are rejected.
pub fn phi_hat(p: &CurvePoint) -> Result<CurvePoint> {
    if p.model().form().curve() != Curve::EkPrime {
        return Err(Error::ModelMismatch(format!(
            "phi_hat expects a point on E'_k, got {}",
            p.model()
        )));
    }
    let w = to_weierstrass_prime(p)?;
    let target = Arc::new(CurveModel::new(p.k().clone(), CurveForm::WeierstrassEk)?);
    let Some((u, v)) = w.xy() else {
        return Ok(CurvePoint::infinity(target));
    };
    if u.is_zero() {
        return Err(undefined("U = 0 (kernel of phi_hat)", &w));
    }
    let k2 = kq(p.k()) * kq(p.k());
    let u2 = u * u;
    let u3 = &u2 * u;
    let x = (&u3 + q(64) * &k2) / &u2;
    let y = v * (&u3 - q(128) * &k2) / &u3;
    CurvePoint::new(target, x, y)
}

/// Rational torsion. `E_k` points are returned on the cubic model, `E'_k`
/// points on `V² = U³ + 16k²`.
pub fn torsion_subgroup(k: &CubefreeK, which: Curve) -> Vec<CurvePoint> {
    let small = k.to_u64();
    match which {
        Curve::Ek => {
            let m = Arc::new(CurveModel::new(k.clone(), CurveForm::CubicEk).unwrap());
            let mut pts = vec![CurvePoint::infinity(m.clone())];
            let affine: &[(i64, i64)] = match small {
                Some(1) => &[(1, 0), (0, 1)],
                Some(2) => &[(1, 1)],
                _ => &[],
            };
            pts.extend(affine.iter().map(|&(x, y)| CurvePoint::from_ints(m.clone(), x, y).unwrap()));
            pts
        }
        Curve::EkPrime => {
            let m = Arc::new(CurveModel::new(k.clone(), CurveForm::WeierstrassEkPrime).unwrap());
            let four_k = BigInt::from(4) * k.to_bigint();
            let mut pts = vec![
                CurvePoint::infinity(m.clone()),
                CurvePoint::from_ints(m.clone(), 0, four_k.clone()).unwrap(),
                CurvePoint::from_ints(m.clone(), 0, -four_k).unwrap(),
            ];
            if small == Some(2) {
                for (x, y) in [(-4, 0), (8, 24), (8, -24)] {
                    pts.push(CurvePoint::from_ints(m.clone(), x, y).unwrap());
                }
            }
            pts
        }
    }
}
