//! Python bindings: problems, trajectories, residual checks and the solvers.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use isodelay_core::euler_lagrange::el_residual;
use isodelay_core::problem::ProblemFile;
use isodelay_core::registry::{self, Example};
use isodelay_core::solver::{self, CollocationScheme, InitialGuess};
use isodelay_core::{constraint_values, functional_value, AugmentedSetup, Error};

create_exception!(isodelay, NonConvergenceError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence(report) => NonConvergenceError::new_err(format!(
            "no convergence after {} iterations, residual {:e}",
            report.iterations, report.final_residual
        )),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_object(py: Python<'_>, value: &serde_json::Value) -> PyObject {
    use serde_json::Value;
    match value {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_py(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_py(py),
        },
        Value::String(s) => s.into_py(py),
        Value::Array(items) => PyList::new_bound(py, items.iter().map(|v| to_object(py, v))).into_py(py),
        Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, v) in map {
                dict.set_item(k, to_object(py, v)).expect("string keys");
            }
            dict.into_py(py)
        }
    }
}

fn serialize<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyObject {
    to_object(py, &serde_json::to_value(value).expect("serializable"))
}

/// Piecewise-polynomial trajectory.
#[pyclass(module = "isodelay")]
#[derive(Clone)]
struct Trajectory {
    inner: isodelay_core::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        isodelay_core::Trajectory::from_json(text).map(|inner| Trajectory { inner }).map_err(to_py)
    }

    /// The piecewise quartic of `example1`.
    #[staticmethod]
    fn example1() -> Self {
        Trajectory { inner: isodelay_core::Trajectory::example1() }
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[pyo3(signature = (t, order=0))]
    fn eval(&self, t: f64, order: usize) -> PyResult<Vec<f64>> {
        self.inner.eval(t, order).map_err(to_py)
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        self.inner.domain()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

/// Delayed isoperimetric variational problem.
#[pyclass(module = "isodelay")]
struct Problem {
    inner: isodelay_core::IsoperimetricProblem,
}

#[pymethods]
impl Problem {
    /// Builds a problem from its JSON description.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = ProblemFile::from_json(text).map_err(to_py)?;
        file.build().map(|inner| Problem { inner }).map_err(to_py)
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn constraints(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        (self.inner.t1, self.inner.t2)
    }

    #[getter]
    fn delay(&self) -> f64 {
        self.inner.tau
    }

    fn functional_value(&self, trajectory: &Trajectory) -> PyResult<f64> {
        functional_value(&self.inner, &trajectory.inner).map_err(to_py)
    }

    fn constraint_values(&self, trajectory: &Trajectory) -> PyResult<Vec<f64>> {
        constraint_values(&self.inner, &trajectory.inner).map_err(to_py)
    }

    fn el_residual(&self, trajectory: &Trajectory, lambda: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let setup = AugmentedSetup::new(self.inner.clone(), lambda).map_err(to_py)?;
        el_residual(&setup, &trajectory.inner, t).map_err(to_py)
    }

    /// Residual summary on a sample grid, as a dict.
    #[pyo3(signature = (trajectory, lambda, tol=1e-6, points=200))]
    fn verify(&self, py: Python<'_>, trajectory: &Trajectory, lambda: Vec<f64>, tol: f64, points: usize) -> PyResult<PyObject> {
        let report = solver::verify_on(&self.inner, &trajectory.inner, &lambda, tol, points).map_err(to_py)?;
        let mut summary = report.summary();
        summary["el_sup"] = serde_json::json!(report.el_sup());
        Ok(to_object(py, &summary))
    }

    /// Solves the necessary conditions; returns `(trajectory, lambda, report)`.
    #[pyo3(signature = (nodes=64, tol=1e-10, maxiter=50))]
    fn solve(&self, py: Python<'_>, nodes: usize, tol: f64, maxiter: usize) -> PyResult<(Trajectory, Vec<f64>, PyObject)> {
        let scheme = CollocationScheme::default().with_nodes(nodes).with_tolerance(tol).with_max_iterations(maxiter);
        let sol = py
            .allow_threads(|| solver::solve_el(&self.inner, &InitialGuess::default(), &scheme))
            .map_err(to_py)?;
        let report = serialize(py, &sol.report);
        Ok((Trajectory { inner: sol.trajectory }, sol.lambda, report))
    }
}

/// Delayed optimal-control problem.
#[pyclass(module = "isodelay")]
struct ControlProblem {
    inner: isodelay_core::ControlProblem,
}

#[pymethods]
impl ControlProblem {
    /// Solves the Pontryagin system; returns a dict with `state`, `costate`,
    /// `control` (trajectory JSON), `lambda` and `report`.
    #[pyo3(signature = (nodes=64, tol=1e-10, maxiter=50))]
    fn solve(&self, py: Python<'_>, nodes: usize, tol: f64, maxiter: usize) -> PyResult<PyObject> {
        let scheme = CollocationScheme::default().with_nodes(nodes).with_tolerance(tol).with_max_iterations(maxiter);
        let sol = py.allow_threads(|| solver::solve_pmp(&self.inner, &scheme)).map_err(to_py)?;
        let dict = PyDict::new_bound(py);
        dict.set_item("state", Trajectory { inner: sol.triple.state.clone() }.into_py(py))?;
        dict.set_item("costate", Trajectory { inner: sol.triple.costate.clone() }.into_py(py))?;
        dict.set_item("control", Trajectory { inner: sol.triple.control.clone() }.into_py(py))?;
        dict.set_item("lambda", sol.lambda.clone())?;
        dict.set_item("report", serialize(py, &sol.report))?;
        Ok(dict.into_py(py))
    }
}

/// Names of the registered examples.
#[pyfunction]
fn examples() -> Vec<&'static str> {
    registry::NAMES.to_vec()
}

/// Registered example: `(Problem, Trajectory | None, lambda)` or a `ControlProblem`.
#[pyfunction]
fn example(py: Python<'_>, name: &str) -> PyResult<PyObject> {
    Ok(match registry::example(name).map_err(to_py)? {
        Example::Variational { problem, trajectory, lambda } => {
            let trajectory = trajectory.map(|inner| Trajectory { inner });
            (Problem { inner: problem }, trajectory, lambda).into_py(py)
        }
        Example::Control { problem } => ControlProblem { inner: problem }.into_py(py),
    })
}

/// Runs an example's verification suite; returns `(passed, checks)`.
#[pyfunction]
#[pyo3(signature = (name, tol=1e-6))]
fn verify_example(py: Python<'_>, name: &str, tol: f64) -> PyResult<(bool, PyObject)> {
    let checks = py.allow_threads(|| registry::run_checks(name, tol)).map_err(to_py)?;
    Ok((registry::suite_passed(&checks), serialize(py, &checks)))
}

#[pymodule]
fn isodelay(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_class::<Problem>()?;
    m.add_class::<ControlProblem>()?;
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(example, m)?)?;
    m.add_function(wrap_pyfunction!(verify_example, m)?)?;
    m.add("NonConvergenceError", m.py().get_type_bound::<NonConvergenceError>())?;
    Ok(())
}
