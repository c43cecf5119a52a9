use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use utm_heat::config::Example;
use utm_heat::evaluate::{self, SolutionField, SolveOptions};
use utm_heat::oracles::{self, CrankNicolson};
use utm_heat::problem::{self as core_problem, InterfaceKind, ValidatedProblem};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A validated multilayer problem.
#[pyclass(frozen)]
struct Problem {
    inner: ValidatedProblem,
}

#[pymethods]
impl Problem {
    /// Parses and validates the JSON problem schema used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let raw: core_problem::Problem = serde_json::from_str(text).map_err(value_error)?;
        Ok(Self { inner: core_problem::validate(&raw).map_err(value_error)? })
    }

    /// One of the built-in examples `A`, `A0`, `B`, `C`, `D`, `E`, `F`.
    #[staticmethod]
    fn example(name: &str) -> PyResult<Self> {
        let ex: Example = name.parse().map_err(value_error)?;
        Ok(Self { inner: core_problem::validate(&ex.problem()).map_err(value_error)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self.inner.original()).expect("problem serializes")
    }

    /// Breakpoints in the original coordinates.
    #[getter]
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.original().layers.breakpoints.clone()
    }

    #[getter]
    fn sigmas(&self) -> Vec<f64> {
        self.inner.original().layers.sigmas.clone()
    }

    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.n_layers()
    }

    #[getter]
    fn contact(&self) -> &'static str {
        match self.inner.kind() {
            InterfaceKind::Perfect => "perfect",
            InterfaceKind::Imperfect => "imperfect",
        }
    }

    /// Same problem with every contact coefficient set to `h`.
    fn with_uniform_contact(&self, h: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_uniform_contact(h).map_err(value_error)? })
    }

    /// `n` points covering the domain, breakpoints included.
    fn output_grid(&self, n: usize) -> Vec<f64> {
        evaluate::output_grid(&self.inner, n)
    }

    fn __repr__(&self) -> String {
        format!("Problem(n_layers={}, contact={:?})", self.inner.n_layers(), self.contact())
    }
}

/// `u` and `sigma^2 u_x` on a grid, indexed `[time][point]`.
#[pyclass(frozen)]
struct Solution {
    inner: SolutionField,
}

#[pymethods]
impl Solution {
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid_x.clone()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn layers(&self) -> Vec<usize> {
        self.inner.layers.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.clone()
    }

    #[getter]
    fn flux(&self) -> Vec<Vec<f64>> {
        self.inner.flux.clone()
    }

    #[getter]
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = &self.inner.diagnostics;
        let out = PyDict::new(py);
        out.set_item("max_imaginary_residue", d.max_imaginary_residue)?;
        out.set_item("max_residual", d.max_residual)?;
        out.set_item("max_interpolated_fraction", d.max_interpolated_fraction)?;
        out.set_item("endpoint_caveat", d.endpoint_caveat)?;
        Ok(out)
    }

    /// One dict per interface and time with both one-sided values and fluxes.
    #[getter]
    fn interfaces<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .interfaces
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("time", self.inner.times[s.time_index])?;
                d.set_item("interface", s.interface)?;
                d.set_item("x", s.x)?;
                d.set_item("left_value", s.left_value)?;
                d.set_item("right_value", s.right_value)?;
                d.set_item("left_flux", s.left_flux)?;
                d.set_item("right_flux", s.right_flux)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Solution(points={}, times={:?})", self.inner.grid_x.len(), self.inner.times)
    }
}

fn points(problem: &Problem, x: Option<Vec<f64>>, grid: usize) -> Vec<f64> {
    x.unwrap_or_else(|| evaluate::output_grid(&problem.inner, grid))
}

/// Transform-method solution at `times` on `x` (or an `grid`-point grid).
#[pyfunction]
#[pyo3(signature = (problem, times, x=None, grid=401, theta_max=None, nodes=None, fixed_t=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &Problem,
    times: Vec<f64>,
    x: Option<Vec<f64>>,
    grid: usize,
    theta_max: Option<f64>,
    nodes: Option<usize>,
    fixed_t: Option<f64>,
) -> PyResult<Solution> {
    let mut options = SolveOptions { fixed_horizon: fixed_t, ..SolveOptions::default() };
    if let Some(v) = theta_max {
        options.contour.theta_max = v;
    }
    if let Some(v) = nodes {
        options.contour.count = v;
    }
    let x = points(problem, x, grid);
    let field = py
        .detach(|| evaluate::solve_field(&problem.inner, &x, &times, &options))
        .map_err(runtime_error)?;
    Ok(Solution { inner: field })
}

/// Crank–Nicolson reference solution.
#[pyfunction]
#[pyo3(signature = (problem, times, x=None, grid=401, cells_per_layer=200, dt=1e-4))]
fn crank_nicolson(
    py: Python<'_>,
    problem: &Problem,
    times: Vec<f64>,
    x: Option<Vec<f64>>,
    grid: usize,
    cells_per_layer: usize,
    dt: f64,
) -> PyResult<Solution> {
    let settings = CrankNicolson { cells_per_layer, dt, ..CrankNicolson::default() };
    let x = points(problem, x, grid);
    let field = py
        .detach(|| oracles::crank_nicolson(&problem.inner, &settings, &x, &times))
        .map_err(runtime_error)?;
    Ok(Solution { inner: field })
}

/// Sine-series reference for a single effective material with constant Dirichlet ends.
#[pyfunction]
#[pyo3(signature = (problem, times, x=None, grid=401, terms=400))]
fn fourier_series(problem: &Problem, times: Vec<f64>, x: Option<Vec<f64>>, grid: usize, terms: usize) -> PyResult<Solution> {
    let x = points(problem, x, grid);
    let field = oracles::fourier_field(&problem.inner, &x, &times, terms).map_err(value_error)?;
    Ok(Solution { inner: field })
}

/// Piecewise-linear steady state evaluated at `x`.
#[pyfunction]
fn steady_state(problem: &Problem, x: Vec<f64>) -> PyResult<Vec<f64>> {
    let steady = oracles::steady_state_profile(&problem.inner).map_err(value_error)?;
    Ok(x.iter().map(|&p| steady.eval(p)).collect())
}

/// `max |u - U| / max |u|` at time `t`.
#[pyfunction]
#[pyo3(signature = (computed, reference, t, exclude_endpoints=false))]
fn relative_error(computed: &Solution, reference: &Solution, t: f64, exclude_endpoints: bool) -> PyResult<f64> {
    oracles::relative_error(&computed.inner, &reference.inner, t, exclude_endpoints)
        .map(|r| r.error)
        .map_err(value_error)
}

#[pymodule]
fn utm_heat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(crank_nicolson, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_series, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    Ok(())
}
