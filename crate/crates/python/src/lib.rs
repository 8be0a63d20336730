//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use shrinker_lab::forms::{self, HoloForm};
use shrinker_lab::frequency::{self, FrequencyConfig, Route};
use shrinker_lab::heat::{self, HeatPoly};
use shrinker_lab::model::{ModelKind, ModelShrinker};
use shrinker_lab::poly::{self, HoloPoly};
use shrinker_lab::spectrum;
use shrinker_lab::verify::{self, VerifyConfig};
use shrinker_lab::LabError;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn route(name: &str) -> PyResult<Route> {
    match name {
        "closed_form" => Ok(Route::ClosedForm),
        "quadrature" => Ok(Route::Quadrature),
        other => Err(PyValueError::new_err(format!(
            "route must be 'closed_form' or 'quadrature', got {other:?}"
        ))),
    }
}

/// A model shrinker `(S^2)^s x C^k`.
#[pyclass(name = "Model", module = "shrinker_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(ModelShrinker);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn gaussian(m: usize) -> PyResult<Self> {
        ModelShrinker::gaussian(m).map(Self).map_err(err)
    }

    #[staticmethod]
    fn cylinder() -> Self {
        Self(ModelShrinker::cylinder())
    }

    #[staticmethod]
    fn product(factors: Vec<PyRef<'_, PyModel>>) -> PyResult<Self> {
        let kinds = factors.iter().map(|f| f.0.clone()).collect();
        ModelShrinker::product(kinds).map(Self).map_err(err)
    }

    /// Builds a model from a JSON descriptor such as `{"kind": "gaussian", "m": 2}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let kind: ModelKind =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        ModelShrinker::try_from(kind).map(Self).map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    /// Real dimension.
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    /// Complex dimension.
    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn flat_dim(&self) -> usize {
        self.0.flat_dim()
    }

    #[getter]
    fn spheres(&self) -> usize {
        self.0.spheres()
    }

    fn volume(&self, r: f64) -> PyResult<f64> {
        self.0.volume(r).map_err(err)
    }

    fn level_set_area(&self, r: f64) -> PyResult<f64> {
        self.0.level_set_area(r).map_err(err)
    }

    #[pyo3(signature = (r, resolution = 256))]
    fn volume_identity_residual(&self, r: f64, resolution: usize) -> PyResult<f64> {
        self.0.verify_volume_identity(r, resolution).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.0.label())
    }
}

/// A holomorphic polynomial on the flat factor.
#[pyclass(name = "Poly", module = "shrinker_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPoly(HoloPoly);

#[pymethods]
impl PyPoly {
    #[new]
    #[pyo3(signature = (text, m = None))]
    fn new(text: &str, m: Option<usize>) -> PyResult<Self> {
        HoloPoly::parse(text, m).map(Self).map_err(err)
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.0.degree()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    fn is_homogeneous(&self) -> bool {
        self.0.is_homogeneous()
    }

    fn evaluate(&self, z: Vec<Complex64>) -> PyResult<Complex64> {
        self.0.evaluate(&z).map_err(err)
    }

    /// `L_{grad f} u` on `model`.
    fn lie_derivative(&self, model: PyRef<'_, PyModel>) -> PyResult<Self> {
        poly::lie_derivative_nabla_f(&model.0, &self.0)
            .map(Self)
            .map_err(err)
    }

    /// Splits into eigenparts of `L_{grad f}`: a list of `(eigenvalue, Poly)`.
    #[pyo3(signature = (model, lambda_max = 10.0))]
    fn decompose(
        &self,
        model: PyRef<'_, PyModel>,
        lambda_max: f64,
    ) -> PyResult<Vec<(f64, PyPoly)>> {
        let dec = poly::decompose_by_eigenvalue(&model.0, &self.0, lambda_max, 1e-12, 400)
            .map_err(err)?;
        Ok(dec
            .parts
            .into_iter()
            .map(|p| (p.eigenvalue, PyPoly(p.part)))
            .collect())
    }

    fn max_abs_diff(&self, other: PyRef<'_, PyPoly>) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    fn __add__(&self, other: PyRef<'_, PyPoly>) -> Self {
        Self(&self.0 + &other.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Poly({:?})", self.0.to_string())
    }
}

/// A holomorphic `(p,0)`-form.
#[pyclass(name = "Form", module = "shrinker_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyForm(HoloForm);

#[pymethods]
impl PyForm {
    #[new]
    #[pyo3(signature = (text, m = None))]
    fn new(text: &str, m: Option<usize>) -> PyResult<Self> {
        HoloForm::parse(text, m).map(Self).map_err(err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn mu(&self) -> u32 {
        self.0.mu()
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn interior_product(&self, model: PyRef<'_, PyModel>) -> PyResult<Self> {
        forms::interior_product(&model.0, &self.0)
            .map(Self)
            .map_err(err)
    }

    fn f_hodge_laplacian(&self, model: PyRef<'_, PyModel>) -> PyResult<Self> {
        forms::f_hodge_laplacian(&model.0, &self.0)
            .map(Self)
            .map_err(err)
    }

    fn exterior_derivative(&self) -> Self {
        Self(self.0.exterior_derivative())
    }

    fn max_abs_diff(&self, other: PyRef<'_, PyForm>) -> PyResult<f64> {
        self.0.max_abs_diff(&other.0).map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

/// Analytic drift-Laplacian spectrum as `(eigenvalue, multiplicity)` pairs.
#[pyfunction]
#[pyo3(signature = (model, lambda_max = 3.0))]
fn analytic_spectrum(model: PyRef<'_, PyModel>, lambda_max: f64) -> PyResult<Vec<(f64, u64)>> {
    let cat = spectrum::analytic_spectrum(&model.0, lambda_max).map_err(err)?;
    Ok(cat
        .lines
        .iter()
        .map(|l| (l.eigenvalue, l.multiplicity))
        .collect())
}

/// Lowest eigenvalues of the one-dimensional finite-difference oracle.
#[pyfunction]
#[pyo3(signature = (x_max = 12.0, n = 800, k = 5))]
fn oracle_spectrum_1d(x_max: f64, n: usize, k: usize) -> PyResult<Vec<f64>> {
    spectrum::oracle_spectrum_1d(spectrum::Potential1d::Gaussian, x_max, n, k).map_err(err)
}

#[pyfunction]
fn dim_o_d(model: PyRef<'_, PyModel>, d: f64) -> u64 {
    poly::dim_o_d(&model.0, d)
}

/// The counting bound `dim O_d <= 1 + count / 2` as a dict.
#[pyfunction]
fn dimension_bound(py: Python<'_>, model: PyRef<'_, PyModel>, d: f64) -> PyResult<Py<PyAny>> {
    let t = spectrum::counting_bound(&model.0, d).map_err(err)?;
    to_py(py, &t)
}

#[pyfunction]
#[pyo3(signature = (model, u, r, route = "closed_form", resolution = 256))]
fn frequency_at(
    model: PyRef<'_, PyModel>,
    u: PyRef<'_, PyPoly>,
    r: f64,
    route: &str,
    resolution: usize,
) -> PyResult<f64> {
    let route = self::route(route)?;
    let d = frequency::d_of_r(&model.0, &u.0, r, route, resolution).map_err(err)?;
    let i = frequency::i_of_r(&model.0, &u.0, r, route, resolution).map_err(err)?;
    Ok(d.bulk / i)
}

/// Frequency profile on `radii` as a dict of columns plus calibrated constants.
#[pyfunction]
#[pyo3(signature = (model, u, d, radii, sigma = 0.5, epsilon = 0.01, route = "closed_form", resolution = 256))]
#[allow(clippy::too_many_arguments)]
fn frequency_profile(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    u: PyRef<'_, PyPoly>,
    d: f64,
    radii: Vec<f64>,
    sigma: f64,
    epsilon: f64,
    route: &str,
    resolution: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = FrequencyConfig {
        sigma,
        epsilon,
        resolution,
        ..FrequencyConfig::default()
    }
    .with_route(self::route(route)?);
    let model = model.0.clone();
    let u = u.0.clone();
    let profile = py
        .detach(|| frequency::frequency_profile(&model, &u, d, &radii, &cfg))
        .map_err(err)?;
    let monotone = frequency::check_monotone(&profile).ok().map(|r| r.pass);
    let value = to_py(py, &profile)?;
    value.bind(py).set_item("monotone_pass", monotone)?;
    Ok(value)
}

#[pyfunction]
fn kernel_dimension(model: PyRef<'_, PyModel>, p: usize, mu: u32) -> PyResult<u64> {
    forms::kernel_dimension(&model.0, p, mu).map_err(err)
}

#[pyfunction]
fn form_counting(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    p: usize,
    mu: u32,
) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &forms::form_counting_check(&model.0, p, mu).map_err(err)?,
    )
}

#[pyfunction]
fn kernel_ledger(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    p: usize,
    mu: u32,
) -> PyResult<Py<PyAny>> {
    to_py(py, &forms::kernel_ledger(&model.0, p, mu).map_err(err)?)
}

/// Transform of a heat polynomial in `x, t` to an eternal f-heat solution,
/// returned as `{(a, k): c}` for the monomial `x^a e^{-k s / 2}`.
#[pyfunction]
fn ancient_transform(text: &str) -> PyResult<Vec<((u32, u32), f64)>> {
    let u = HeatPoly::parse(text).map_err(err)?;
    let v = heat::ancient_transform(&u).map_err(err)?;
    Ok(v.terms().map(|(k, c)| (*k, *c)).collect())
}

/// L2(e^{-f}) distance between the time-stepping oracle and the series
/// solution at `s` for the initial datum `x^2`.
#[pyfunction]
#[pyo3(signature = (s = 1.0, n_grid = 800, steps = 200))]
fn heat_oracle_error(py: Python<'_>, s: f64, n_grid: usize, steps: usize) -> PyResult<f64> {
    let x2 = heat::RealPoly::new(1, [(vec![2], 1.0)]).map_err(err)?;
    py.detach(|| {
        heat::compare_with_series(
            &x2,
            s,
            12.0,
            n_grid,
            steps,
            heat::Scheme::ExtrapolatedBackwardEuler,
        )
    })
    .map(|c| c.l2_error)
    .map_err(err)
}

/// Runs every check on `models` (default: Gaussian C^2 and the cylinder).
#[pyfunction]
#[pyo3(signature = (models = None))]
fn verify_all(py: Python<'_>, models: Option<Vec<PyRef<'_, PyModel>>>) -> PyResult<Py<PyAny>> {
    let models: Vec<ModelShrinker> = match models {
        Some(list) => list.iter().map(|m| m.0.clone()).collect(),
        None => vec![
            ModelShrinker::gaussian(2).map_err(err)?,
            ModelShrinker::cylinder(),
        ],
    };
    let report = py
        .detach(|| verify::verify_all(&models, &VerifyConfig::default(), serde_json::Value::Null))
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule(name = "shrinker_lab")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", shrinker_lab::VERSION)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPoly>()?;
    m.add_class::<PyForm>()?;
    m.add_function(wrap_pyfunction!(analytic_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_spectrum_1d, m)?)?;
    m.add_function(wrap_pyfunction!(dim_o_d, m)?)?;
    m.add_function(wrap_pyfunction!(dimension_bound, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_at, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_profile, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(form_counting, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_ledger, m)?)?;
    m.add_function(wrap_pyfunction!(ancient_transform, m)?)?;
    m.add_function(wrap_pyfunction!(heat_oracle_error, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
