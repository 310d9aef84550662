//! Python bindings: parsing, certificate checking and synthesis, tail
//! bounds, exact and simulated tails, and the full analysis report.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use astprove::certificates::{check_lpf, check_smap, Certificate, Domain};
use astprove::cli;
use astprove::lang::{normalize, parse as parse_program, pretty_print, SingleWhileLoop};
use astprove::rational::{self, Rational};
use astprove::semantics::exact_tail as exact_tail_dp;
use astprove::simulator::estimate_tail as estimate_tail_mc;
use astprove::synthesis::{synth_lpf as synth_lpf_rs, synth_smap_bounded, synth_smap_linear};
use astprove::tailbounds::{bound_diff, bound_series, BoundInput, BoundKind};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_loads(py: Python<'_>, text: &str) -> PyResult<PyObject> {
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn rat(name: &str, s: &str) -> PyResult<Rational> {
    rational::parse(s).ok_or_else(|| PyValueError::new_err(format!("{name}: `{s}` is not a rational number")))
}

/// A single while loop parsed from `.pwhile` text.
#[pyclass(name = "Loop", module = "astprove")]
pub struct PyLoop {
    inner: SingleWhileLoop,
}

#[pymethods]
impl PyLoop {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        SingleWhileLoop::from_source(source).map(|inner| PyLoop { inner }).map_err(value_error)
    }

    #[getter]
    fn pvars(&self) -> Vec<String> {
        self.inner.pvars.clone()
    }

    #[getter]
    fn rvars(&self) -> Vec<String> {
        self.inner.rvars.clone()
    }

    /// Matrix `A` with `F(pv, rv) = pv + A rv`, or `None`.
    #[getter]
    fn incremental(&self) -> Option<Vec<Vec<i64>>> {
        self.inner.incremental.clone()
    }

    fn holds(&self, pv: Vec<i64>) -> bool {
        self.inner.holds(&pv)
    }

    fn apply(&self, pv: Vec<i64>, rv: Vec<i64>) -> PyResult<Vec<i64>> {
        self.inner.apply(&pv, &rv).map_err(value_error)
    }

    /// Exact `P(T >= k)` for `k = 1..=k_max` as `num/den` strings.
    fn exact_tail(&self, pv0: Vec<i64>, k_max: usize) -> PyResult<Vec<String>> {
        let v = exact_tail_dp(&self.inner, &pv0, k_max).map_err(value_error)?;
        Ok(v.iter().map(ToString::to_string).collect())
    }

    #[pyo3(signature = (pv0, ks, trials = 10_000, seed = 0))]
    fn estimate_tail(&self, py: Python<'_>, pv0: Vec<i64>, ks: Vec<u64>, trials: u64, seed: u64) -> PyResult<PyObject> {
        let rows = py.allow_threads(|| estimate_tail_mc(&self.inner, &pv0, &ks, trials, seed)).map_err(value_error)?;
        json_loads(py, &to_json(&rows))
    }

    /// Checks a certificate given in the JSON file format; `box` is a list
    /// of `(lo, hi)` per program variable.
    #[pyo3(signature = (certificate, r#box = None))]
    fn check(&self, py: Python<'_>, certificate: &str, r#box: Option<Vec<(i64, i64)>>) -> PyResult<PyObject> {
        let cert = Certificate::from_json(certificate, &self.inner.pvars).map_err(value_error)?;
        let domain = match r#box {
            Some(ranges) => Domain::Box(astprove::certificates::BoxDomain { ranges }),
            None => Domain::Symbolic,
        };
        let report = match &cert {
            Certificate::Smap(m) => check_smap(&self.inner, m, &domain),
            Certificate::Lpf(f) => check_lpf(&self.inner, f, &domain),
        }
        .map_err(value_error)?;
        json_loads(py, &to_json(&report))
    }

    /// Synthesizes an affine supermartingale map; with `box` it falls back
    /// to fitting on the box. Returns the certificate JSON text.
    #[pyo3(signature = (r#box = None))]
    fn synth_smap(&self, r#box: Option<Vec<(i64, i64)>>) -> PyResult<String> {
        let r = match r#box {
            None => synth_smap_linear(&self.inner),
            Some(ranges) => synth_smap_bounded(&self.inner, &astprove::certificates::BoxDomain { ranges }),
        };
        r.map(|s| Certificate::Smap(s.cert).to_json()).map_err(value_error)
    }

    fn synth_lpf(&self) -> PyResult<String> {
        synth_lpf_rs(&self.inner).map(|s| Certificate::Lpf(s.cert).to_json()).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!("Loop(pvars={:?}, rvars={:?})", self.inner.pvars, self.inner.rvars)
    }
}

/// Parses and pretty-prints a program.
#[pyfunction]
fn parse(source: &str) -> PyResult<String> {
    let prog = parse_program(source).map_err(value_error)?;
    normalize(&prog).map_err(value_error)?;
    Ok(pretty_print(&prog))
}

/// Tail bounds for `k` in `ks`; `kind` is `"diff"` or `"general"`. Numbers
/// are given as strings such as `"2"` or `"1/4"`.
#[pyfunction]
#[pyo3(signature = (e_x0, delta, ks, kind = "diff", zeta = None, t = None))]
fn bounds(
    py: Python<'_>,
    e_x0: &str,
    delta: &str,
    ks: Vec<u64>,
    kind: &str,
    zeta: Option<&str>,
    t: Option<f64>,
) -> PyResult<PyObject> {
    let kind = match kind {
        "diff" => BoundKind::DiffBounded,
        "general" => BoundKind::General,
        other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
    };
    let zeta = zeta.map(|z| rat("zeta", z)).transpose()?;
    let input = BoundInput::new(rat("e_x0", e_x0)?, rat("delta", delta)?, zeta, kind).map_err(value_error)?;
    let rows = match t {
        Some(t) => ks.iter().map(|&k| bound_diff(&input, k, Some(t))).collect::<Result<Vec<_>, _>>(),
        None => bound_series(&input, &ks),
    }
    .map_err(value_error)?;
    json_loads(py, &to_json(&rows))
}

/// Runs the full analysis and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (source, init = "", ks = vec![2, 8, 32], trials = 10_000, seed = 0, r#box = None))]
fn analyze(
    py: Python<'_>,
    source: &str,
    init: &str,
    ks: Vec<u64>,
    trials: u64,
    seed: u64,
    r#box: Option<&str>,
) -> PyResult<PyObject> {
    let prog = parse_program(source).map_err(value_error)?;
    let prog = normalize(&prog).map_err(value_error)?;
    let pv0 = cli::parse_init(init, &prog.pvars).map_err(value_error)?;
    let bx = cli::parse_box(r#box, &prog.pvars).map_err(value_error)?;
    let mut warnings = Vec::new();
    let report = py
        .allow_threads(|| cli::analyze(source, &prog, &pv0, &ks, trials, seed, &bx, &mut warnings))
        .map_err(value_error)?;
    json_loads(py, &report.to_json())
}

#[pymodule]
#[pyo3(name = "astprove")]
fn astprove_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLoop>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
