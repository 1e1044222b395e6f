//! Python module `cubesum`.
//!
//! Big integers cross as Python ints, rationals as `"n/d"` strings, and
//! structured reports as plain dicts.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cubesum::arith::{cubefree_part, CubefreeK};
use cubesum::curves::{conductor as conductor_of, minimal_model, CurveForm, CurveModel, CurvePoint};
use cubesum::descent::selmer_rank_bound as bound_of;
use cubesum::enumerate::{enumerate_candidates, Measure};
use cubesum::heights::{canonical_height, certify_independent, DEFAULT_TOL};
use cubesum::mestre::{mestre_score as score_of, ApTables};
use cubesum::pointsearch::{search as run_search, CurveChoice, SearchTask};
use cubesum::verify::{transfer as transfer_point, verify_paper as run_verify, Direction, VerifyOptions};

pyo3::create_exception!(cubesum, CubesumError, PyValueError);

fn err(e: cubesum::Error) -> PyErr {
    CubesumError::new_err(e.to_string())
}

fn k_of(k: BigUint) -> PyResult<CubefreeK> {
    CubefreeK::new(&k).map_err(err)
}

fn model_for(k: &CubefreeK, tag: &str) -> PyResult<Arc<CurveModel>> {
    let form = if tag == "minimal" {
        minimal_model(k).form()
    } else {
        CurveForm::from_tag(tag).map_err(err)?
    };
    Ok(Arc::new(CurveModel::new(k.clone(), form).map_err(err)?))
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A rational point on one model of `E_k` or `E'_k`.
#[pyclass(frozen, from_py_object, module = "cubesum")]
#[derive(Clone)]
struct Point {
    inner: CurvePoint,
}

#[pymethods]
impl Point {
    #[new]
    #[pyo3(signature = (k, x, y, model = "minimal"))]
    fn new(k: BigUint, x: &str, y: &str, model: &str) -> PyResult<Self> {
        let k = k_of(k)?;
        let inner = CurvePoint::parse(model_for(&k, model)?, x, y).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> BigUint {
        self.inner.k().value().clone()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.inner.model().form().tag()
    }

    /// `(x, y)` as strings, or `None` at infinity.
    #[getter]
    fn xy(&self) -> Option<(String, String)> {
        self.inner.xy().map(|(x, y)| (x.to_string(), y.to_string()))
    }

    fn __add__(&self, other: &Point) -> PyResult<Point> {
        Ok(Point {
            inner: self.inner.add(&other.inner).map_err(err)?,
        })
    }

    fn __neg__(&self) -> PyResult<Point> {
        Ok(Point {
            inner: self.inner.neg().map_err(err)?,
        })
    }

    fn __mul__(&self, n: i64) -> PyResult<Point> {
        Ok(Point {
            inner: self.inner.mul(n).map_err(err)?,
        })
    }

    fn __rmul__(&self, n: i64) -> PyResult<Point> {
        self.__mul__(n)
    }

    fn __eq__(&self, other: &Point) -> bool {
        self.inner == other.inner
    }

    /// Néron–Tate height, points on `E'_k` only.
    fn height(&self) -> PyResult<f64> {
        canonical_height(&self.inner).map_err(err)
    }

    /// Image across the isogeny, `"to-ek"` or `"to-ekprime"`.
    fn transfer(&self, direction: &str) -> PyResult<Point> {
        let d: Direction = direction.parse().map_err(err)?;
        Ok(Point {
            inner: transfer_point(&self.inner, d).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Point(k={}, {} on {})", self.inner.k(), self.inner, self.model())
    }
}

/// `(k, d)` with `n = ±k·d³` and `k` cubefree.
#[pyfunction]
fn cubefree(n: BigInt) -> PyResult<(BigUint, BigUint)> {
    let p = cubefree_part(&n).map_err(err)?;
    Ok((p.k.value().clone(), p.d))
}

#[pyfunction]
fn selmer_rank_bound(k: BigUint) -> PyResult<usize> {
    Ok(bound_of(&k_of(k)?).map_err(err)?.bound)
}

#[pyfunction]
fn conductor(k: BigUint) -> PyResult<BigUint> {
    Ok(conductor_of(&k_of(k)?).value)
}

#[pyfunction]
#[pyo3(signature = (k, x_cut = 10_000))]
fn mestre_score(k: BigUint, x_cut: u64) -> PyResult<f64> {
    let tables = ApTables::build(x_cut);
    Ok(score_of(&k_of(k)?, x_cut, &tables).log_score)
}

/// Points found on `E_k` and/or `E'_k`, as points on the minimal model.
#[pyfunction]
#[pyo3(signature = (k, d_max = 50, curve = "both"))]
fn search(py: Python<'_>, k: BigUint, d_max: u64, curve: &str) -> PyResult<Vec<Point>> {
    let curves = match curve {
        "ek" => CurveChoice::Ek,
        "ekprime" => CurveChoice::EkPrime,
        "both" => CurveChoice::Both,
        _ => return Err(PyValueError::new_err(format!("unknown curve {curve:?}"))),
    };
    let task = SearchTask {
        curves,
        ..SearchTask::new(k_of(k)?, d_max)
    };
    let res = py.detach(|| run_search(&task)).map_err(err)?;
    Ok(res.points.into_iter().map(|p| Point { inner: p.minimal }).collect())
}

/// Height certificate as a dict; `verdict` is one of
/// `independent`, `dependent`, `inconclusive`.
#[pyfunction]
#[pyo3(signature = (points, tol = DEFAULT_TOL))]
fn certify<'py>(py: Python<'py>, points: Vec<Point>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let pts: Vec<CurvePoint> = points.into_iter().map(|p| p.inner).collect();
    let cert = py.detach(|| certify_independent(&pts, tol)).map_err(err)?;
    to_py(py, &cert)
}

/// Cubefree `k` whose descent bound reaches `min_selmer`.
#[pyfunction]
#[pyo3(signature = (min_selmer, max_k = None, max_conductor = None))]
fn enumerate(py: Python<'_>, min_selmer: usize, max_k: Option<u128>, max_conductor: Option<u128>) -> PyResult<Vec<u128>> {
    let measure = match (max_k, max_conductor) {
        (Some(k), None) => Measure::MaxK(k),
        (None, Some(n)) => Measure::MaxConductor(n),
        _ => return Err(PyValueError::new_err("give exactly one of max_k, max_conductor")),
    };
    let c = py.detach(|| enumerate_candidates(measure, min_selmer)).map_err(err)?;
    Ok(c.into_iter().map(|c| c.k).collect())
}

/// Runs the record checks; returns the full report with a `passed` key.
#[pyfunction]
#[pyo3(signature = (certify = true, minimality_up_to = 4, d_max = 60))]
fn verify_paper<'py>(py: Python<'py>, certify: bool, minimality_up_to: usize, d_max: u64) -> PyResult<Bound<'py, PyAny>> {
    let opts = VerifyOptions {
        certify,
        minimality_up_to,
        d_max,
        tol: DEFAULT_TOL,
    };
    let report = py.detach(|| run_verify(&opts)).map_err(err)?;
    let out = to_py(py, &report)?;
    out.cast::<PyDict>()?.set_item("passed", report.passed())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "cubesum")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Point>()?;
    m.add("CubesumError", m.py().get_type::<CubesumError>())?;
    m.add_function(wrap_pyfunction!(cubefree, m)?)?;
    m.add_function(wrap_pyfunction!(selmer_rank_bound, m)?)?;
    m.add_function(wrap_pyfunction!(conductor, m)?)?;
    m.add_function(wrap_pyfunction!(mestre_score, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_paper, m)?)?;
    Ok(())
}
