use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pwconvex::formulation::{build, Formulation, Model, Strengthening};
use pwconvex::harness::cli::named_function;
use pwconvex::oracles::{profile_config, profile_model, profile_series};
use pwconvex::problems::{Family, Instance};
use pwconvex::solver::{branch_and_cut, solve_root_relaxation, SolveConfig, SolveReport};
use pwconvex::univariate::decompose;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn formulation(name: &str) -> PyResult<Formulation> {
    name.parse().map_err(value_err)
}

fn strengthening(form: Formulation, pr: bool) -> PyResult<Strengthening> {
    match (form, pr) {
        (_, true) => Ok(Strengthening::Perspective),
        (Formulation::Im, false) => Ok(Strengthening::Plain),
        _ => Err(PyValueError::new_err("pr=False is only available for IM")),
    }
}

/// A benchmark instance.
#[pyclass(name = "Instance", module = "pypwconvex")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// Generates an instance of `family` (nck-logistic, nck-trig, ufl-1..3).
    #[staticmethod]
    #[pyo3(signature = (family, size, seed, facilities=0))]
    fn generate(family: &str, size: usize, seed: u64, facilities: usize) -> PyResult<Self> {
        let family: Family = family.parse().map_err(value_err)?;
        let inner = family.generate((size, facilities), seed).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn n_vars(&self) -> PyResult<usize> {
        Ok(self.inner.to_separable().map_err(value_err)?.n_vars())
    }

    /// Objective of the original problem at `x`.
    fn evaluate(&self, x: Vec<f64>) -> f64 {
        self.inner.evaluate_original(&x)
    }

    /// Builds the model of this instance under `formulation`.
    #[pyo3(signature = (formulation="mcm", pr=true))]
    fn model(&self, formulation: &str, pr: bool) -> PyResult<PyModel> {
        let form = self::formulation(formulation)?;
        let p = self.inner.to_separable().map_err(value_err)?;
        let inner = build(&p, form, strengthening(form, pr)?).map_err(value_err)?;
        Ok(PyModel { inner })
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            Instance::Nck(n) => format!("Instance(nck, n={}, seed={})", n.weights.len(), self.inner.seed()),
            Instance::Ufl(u) => format!("Instance(ufl, k={}, seed={})", u.fixed_costs.len(), self.inner.seed()),
        }
    }
}

/// An MILP model with perspective terms.
#[pyclass(name = "Model", module = "pypwconvex")]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn formulation(&self) -> &'static str {
        self.inner.formulation.label()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    #[getter]
    fn n_binaries(&self) -> usize {
        self.inner.free_integer_vars().len()
    }

    #[getter]
    fn n_terms(&self) -> usize {
        self.inner.terms.len()
    }

    /// Root relaxation bound after the cutting-plane loop.
    #[pyo3(signature = (cut_eps=1e-6))]
    fn relax(&self, cut_eps: f64) -> PyResult<(f64, usize, bool)> {
        let cfg = SolveConfig {
            cut_eps,
            ..SolveConfig::default()
        };
        let r = solve_root_relaxation(&self.inner, &cfg);
        if !r.bound.is_finite() {
            return Err(PyRuntimeError::new_err(format!("root relaxation ended with {:?}", r.status)));
        }
        Ok((r.bound, r.cuts_used, r.converged))
    }

    /// Branch-and-cut.
    #[pyo3(signature = (time_limit=60.0, seed=0))]
    fn solve(&self, py: Python<'_>, time_limit: f64, seed: u64) -> PyResult<PyReport> {
        if !(time_limit > 0.0) {
            return Err(PyValueError::new_err("time_limit must be positive"));
        }
        let cfg = SolveConfig {
            time_limit_seconds: time_limit,
            seed,
            ..SolveConfig::default()
        };
        let inner = py.detach(|| branch_and_cut(&self.inner, &cfg, None));
        Ok(PyReport { inner })
    }
}

/// Result of a branch-and-cut run.
#[pyclass(name = "Report", module = "pypwconvex")]
struct PyReport {
    inner: SolveReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn status(&self) -> &'static str {
        self.inner.status.label()
    }

    #[getter]
    fn incumbent(&self) -> Option<f64> {
        self.inner.incumbent
    }

    #[getter]
    fn root_bound(&self) -> f64 {
        self.inner.root_bound
    }

    #[getter]
    fn final_bound(&self) -> f64 {
        self.inner.final_bound
    }

    #[getter]
    fn gap_percent(&self) -> Option<f64> {
        self.inner.gap_percent
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.inner.nodes
    }

    #[getter]
    fn total_cuts(&self) -> usize {
        self.inner.total_cuts
    }

    #[getter]
    fn point(&self) -> Option<Vec<f64>> {
        self.inner.incumbent_point.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report({}, status={}, incumbent={:?}, bound={})",
            self.inner.formulation,
            self.status(),
            self.inner.incumbent,
            self.inner.final_bound
        )
    }
}

/// Breakpoints and segment kinds (`"convex"`/`"concave"`) of a named function.
#[pyfunction]
#[pyo3(signature = (name, seed=0))]
fn decompose_function(name: &str, seed: u64) -> PyResult<(Vec<f64>, Vec<&'static str>)> {
    let (f, l, u) = named_function(name, seed).ok_or_else(|| value_err(format!("unknown function '{name}'")))?;
    let d = decompose(&f, l, u).map_err(value_err)?;
    let kinds = d.kinds.iter().map(|k| if k.is_convex() { "convex" } else { "concave" }).collect();
    Ok((d.breakpoints, kinds))
}

/// Relaxation value of a named function's epigraph model at each of `xs`.
#[pyfunction]
#[pyo3(signature = (name, xs, formulation="mcm", seed=0))]
fn profile(name: &str, xs: Vec<f64>, formulation: &str, seed: u64) -> PyResult<Vec<f64>> {
    let form = self::formulation(formulation)?;
    let (f, l, u) = named_function(name, seed).ok_or_else(|| value_err(format!("unknown function '{name}'")))?;
    let d = decompose(&f, l, u).map_err(value_err)?;
    let m = profile_model(&f, &d, form, Strengthening::Perspective).map_err(value_err)?;
    profile_series(&m, &xs, &profile_config()).map_err(value_err)
}

#[pymodule]
fn pypwconvex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(decompose_function, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    Ok(())
}
