//! Python bindings for `opialkit`.
//!
//! Functions and bases are given as the same spec strings the command line
//! accepts (`exp:2`, `monomials:3`, ...). Structured results come back as
//! plain dicts.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use opialkit::cli::{build_problem, default_theorem, parse_regimes, verify_instance, ProblemArgs};
use opialkit::error::Error;
use opialkit::funcrep::{Interval, SmoothFunction};
use opialkit::opial::{classify_regime, ExponentTriple, Theorem};
use opialkit::quad::QuadratureSpec;
use opialkit::taylor::TaylorExpansion;
use opialkit::testgen::{format_manifest, generate_suite, parse_manifest, SuiteConfig};
use opialkit::widder::BasisFamily;

create_exception!(opialkit_py, OpialError, PyValueError);

fn err(e: Error) -> PyErr {
    OpialError::new_err(e.to_string())
}

fn domain(d: (f64, f64)) -> PyResult<Interval> {
    Interval::new(d.0, d.1).map_err(err)
}

fn family(basis: &str, d: (f64, f64)) -> PyResult<BasisFamily> {
    BasisFamily::parse(basis, domain(d)?).map_err(err)
}

fn function(spec: &str, d: (f64, f64)) -> PyResult<SmoothFunction> {
    Ok(SmoothFunction::from_spec(spec.parse().map_err(err)?, domain(d)?))
}

fn quad(tol: Option<f64>) -> PyResult<QuadratureSpec> {
    let q = match tol {
        Some(t) => QuadratureSpec::default().with_tolerance(t),
        None => QuadratureSpec::default(),
    };
    q.validate().map_err(err)?;
    Ok(q)
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Widder kernel `g_i(x, t)`; `i` defaults to the basis order.
#[pyfunction]
#[pyo3(signature = (basis, x, t, i=None, domain=(0.0, 1.0)))]
fn kernel(basis: &str, x: f64, t: f64, i: Option<usize>, domain: (f64, f64)) -> PyResult<f64> {
    let fam = family(basis, domain)?;
    fam.kernel_g(i.unwrap_or(fam.order()), x, t).map_err(err)
}

/// Wronskian `W(u_0, ..., u_i)(x)`.
#[pyfunction]
#[pyo3(signature = (basis, i, x, domain=(0.0, 1.0)))]
fn wronskian(basis: &str, i: usize, x: f64, domain: (f64, f64)) -> PyResult<f64> {
    family(basis, domain)?.wronskian(i, x).map_err(err)
}

/// Widder derivative `L_i f(x)`.
#[pyfunction]
#[pyo3(signature = (basis, f, i, x, domain=(0.0, 1.0)))]
fn widder_derivative(basis: &str, f: &str, i: usize, x: f64, domain: (f64, f64)) -> PyResult<f64> {
    family(basis, domain)?.widder_derivative(&function(f, domain)?, i, x).map_err(err)
}

/// Regime tag of an exponent triple, e.g. `"MAIN"` or `"IV"`.
#[pyfunction]
fn classify(alpha: f64, beta: f64, r: f64) -> PyResult<String> {
    let e = ExponentTriple::new(alpha, beta, r).map_err(err)?;
    Ok(classify_regime(&e).tag.to_string())
}

#[allow(clippy::too_many_arguments)]
fn problem_args(
    alpha: f64,
    beta: f64,
    r: f64,
    x: f64,
    a: f64,
    f: Option<String>,
    y: Option<String>,
    h: Option<String>,
    u: String,
    v: String,
    basis: Option<String>,
    kernel: Option<String>,
    domain: Option<(f64, f64)>,
    quad_tol: Option<f64>,
) -> ProblemArgs {
    ProblemArgs {
        basis,
        kernel,
        domain: domain.map(|(lo, hi)| format!("{lo}:{hi}")),
        u,
        v,
        f,
        y,
        h,
        alpha: Some(alpha),
        beta: Some(beta),
        r: Some(r),
        a,
        x: Some(x),
        quad_tol,
    }
}

/// Sharp constant `C(x)` for MAIN exponents.
///
/// Returns `{"C", "P_samples", "quad_error", "converged"}`.
#[pyfunction]
#[pyo3(signature = (alpha, beta, r, x, *, a=0.0, h="const:1".to_string(), u="const:1".to_string(), v="const:1".to_string(), basis=None, kernel=None, domain=None, quad_tol=None))]
#[allow(clippy::too_many_arguments)]
fn opial_constant<'py>(
    py: Python<'py>,
    alpha: f64,
    beta: f64,
    r: f64,
    x: f64,
    a: f64,
    h: String,
    u: String,
    v: String,
    basis: Option<String>,
    kernel: Option<String>,
    domain: Option<(f64, f64)>,
    quad_tol: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let args = problem_args(alpha, beta, r, x, a, None, None, Some(h), u, v, basis, kernel, domain, quad_tol);
    let (prob, _) = build_problem(&args).map_err(err)?;
    let c = py.detach(|| prob.opial_constant()).map_err(err)?;
    let json = serde_json::json!({
        "C": c.value,
        "P_samples": c.p_samples,
        "quad_error": c.error,
        "converged": c.integral.converged,
    });
    from_json(py, &json.to_string())
}

/// Checks one inequality and returns its report as a dict.
///
/// `theorem` is `main`, `r2`, `extreme`, `regime` or `classical`; by default
/// `main` for MAIN exponents and `regime` otherwise. Give `f` (y with h = y'),
/// `y` and `h`, or `h` alone to derive y from the kernel.
#[pyfunction]
#[pyo3(signature = (alpha, beta, r, x, *, theorem=None, a=0.0, f=None, y=None, h=None, u="const:1".to_string(), v="const:1".to_string(), basis=None, kernel=None, domain=None, quad_tol=None))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    alpha: f64,
    beta: f64,
    r: f64,
    x: f64,
    theorem: Option<&str>,
    a: f64,
    f: Option<String>,
    y: Option<String>,
    h: Option<String>,
    u: String,
    v: String,
    basis: Option<String>,
    kernel: Option<String>,
    domain: Option<(f64, f64)>,
    quad_tol: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let theorem: Option<Theorem> = theorem.map(str::parse).transpose().map_err(err)?;
    let args = problem_args(alpha, beta, r, x, a, f, y, h, u, v, basis, kernel, domain, quad_tol);
    let (prob, _) = build_problem(&args).map_err(err)?;
    let theorem = theorem.unwrap_or_else(|| default_theorem(classify_regime(&prob.exponents).tag));
    let report = py.detach(|| prob.verify(theorem)).map_err(err)?;
    from_json(py, &report.to_json())
}

/// Rows `(x, f, partial_sum, remainder, residual)` of the generalized Taylor
/// identity around `t`.
#[pyfunction]
#[pyo3(signature = (basis, f, t, n, xs, domain=(0.0, 1.0), quad_tol=None))]
fn taylor(
    basis: &str,
    f: &str,
    t: f64,
    n: usize,
    xs: Vec<f64>,
    domain: (f64, f64),
    quad_tol: Option<f64>,
) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let fam = Arc::new(family(basis, domain)?);
    let func = function(f, domain)?;
    let q = quad(quad_tol)?;
    let exp = TaylorExpansion::new(fam, func.clone(), t, n).map_err(err)?;
    xs.iter()
        .map(|&x| {
            let fx = func.value(x)?;
            let partial = exp.eval(x)?;
            let rem = exp.remainder(x, &q)?.value;
            Ok((x, fx, partial, rem, fx - partial - rem))
        })
        .collect::<opialkit::error::Result<Vec<_>>>()
        .map_err(err)
}

/// Seeded suite manifest, one instance per line.
#[pyfunction]
#[pyo3(signature = (seed, count, regimes="all"))]
fn generate(py: Python<'_>, seed: u64, count: usize, regimes: &str) -> PyResult<String> {
    let tags = parse_regimes(regimes).map_err(err)?;
    let cfg = SuiteConfig::new(seed, count);
    let specs = py.detach(|| generate_suite(&cfg, &tags)).map_err(err)?;
    Ok(format_manifest(&specs))
}

/// Verifies every instance of a manifest; one report dict per instance.
#[pyfunction]
#[pyo3(signature = (manifest, theorem=None, quad_tol=None))]
fn verify_suite<'py>(
    py: Python<'py>,
    manifest: &str,
    theorem: Option<&str>,
    quad_tol: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let theorem: Option<Theorem> = theorem.map(str::parse).transpose().map_err(err)?;
    let specs = parse_manifest(manifest).map_err(err)?;
    let q = quad(quad_tol)?;
    let reports = py
        .detach(|| specs.iter().map(|s| verify_instance(s, theorem, &q)).collect::<opialkit::error::Result<Vec<_>>>())
        .map_err(err)?;
    reports.iter().map(|r| from_json(py, &r.to_json())).collect()
}

#[pymodule]
fn opialkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("OpialError", m.py().get_type::<OpialError>())?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian, m)?)?;
    m.add_function(wrap_pyfunction!(widder_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(opial_constant, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(taylor, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
