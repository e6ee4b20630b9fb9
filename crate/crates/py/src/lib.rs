//! Python bindings: grids, potentials, Fokker-Planck runs, coupled runs,
//! Poincare constants and the acceptance checks.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cs::fokker_planck::{dual_solve, fp_solve as core_fp_solve, FpOptions, FpTrajectory};
use cs::grid::{GridSpec, ProfileKind, RadialGrid as CoreGrid, RadialProfile};
use cs::potential::{AnnulusPotential as CoreAnnulus, RadialPotential};
use cs::reaction::{self, CoupledOptions, CoupledTrajectory};
use cs::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::KindMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::GridMismatch
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Normalised parameters of the coupled system.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: reaction::Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (chi, eps, theta, L, M0))]
    #[allow(non_snake_case)]
    fn new(chi: f64, eps: f64, theta: f64, L: f64, M0: f64) -> PyResult<Self> {
        Ok(Self { inner: reaction::Params::new(chi, eps, theta, L, M0).map_err(to_py)? })
    }

    /// Parameters with given `gamma` and `M0 eps / gamma`.
    #[staticmethod]
    #[pyo3(signature = (gamma, L, m0_eps_over_gamma, eps = 0.1, theta = 8.0))]
    #[allow(non_snake_case)]
    fn from_gamma(gamma: f64, L: f64, m0_eps_over_gamma: f64, eps: f64, theta: f64) -> PyResult<Self> {
        Ok(Self { inner: reaction::Params::from_gamma(gamma, theta, eps, L, m0_eps_over_gamma).map_err(to_py)? })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }
    #[getter(L)]
    fn l(&self) -> f64 {
        self.inner.l
    }
    #[getter(M0)]
    fn m0(&self) -> f64 {
        self.inner.m0
    }

    /// Whether all regime thresholds hold for `b`.
    fn in_regime(&self, b: f64) -> bool {
        self.inner.regime(b).all()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Params(chi={}, eps={}, theta={}, L={}, M0={})", p.chi, p.eps, p.theta, p.l, p.m0)
    }
}

#[pyclass(name = "RadialGrid", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Arc<CoreGrid>,
}

#[pymethods]
impl PyGrid {
    /// Graded grid with exact edges at `1/sqrt(2)`, `3/4` and `1`.
    #[new]
    #[pyo3(signature = (r_max, n_core, n_far, gamma, breakpoints = Vec::new()))]
    fn new(r_max: f64, n_core: usize, n_far: usize, gamma: f64, breakpoints: Vec<f64>) -> PyResult<Self> {
        let inner = GridSpec::new(r_max, n_core, n_far, gamma).with_breakpoints(&breakpoints).build().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Grid used for coupled runs with these parameters.
    #[staticmethod]
    fn for_params(params: &PyParams) -> PyResult<Self> {
        Ok(Self { inner: reaction::GridPolicy::default().build(&params.inner).map_err(to_py)? })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }
    #[getter]
    fn r_max(&self) -> f64 {
        self.inner.r_max()
    }
    fn edges(&self) -> Vec<f64> {
        self.inner.edges().to_vec()
    }
    fn centers(&self) -> Vec<f64> {
        self.inner.centers().to_vec()
    }
    fn volumes(&self) -> Vec<f64> {
        self.inner.volumes().to_vec()
    }
    fn __len__(&self) -> usize {
        self.inner.n_cells()
    }
}

#[pyclass(name = "AnnulusPotential", from_py_object)]
#[derive(Clone)]
struct PyAnnulus {
    inner: CoreAnnulus,
}

#[pymethods]
impl PyAnnulus {
    #[new]
    fn new(gamma: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreAnnulus::new(gamma).map_err(to_py)? })
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    fn value(&self, r: f64) -> f64 {
        self.inner.value(r)
    }
    fn derivative(&self, r: f64) -> f64 {
        self.inner.derivative(r)
    }
    fn sample(&self, grid: &PyGrid) -> Vec<f64> {
        self.inner.sample(&grid.inner)
    }
}

fn trajectory_dict<'py>(py: Python<'py>, tr: &FpTrajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", tr.frames.iter().map(|f| f.t).collect::<Vec<_>>())?;
    d.set_item("values", tr.frames.iter().map(|f| f.values.clone()).collect::<Vec<_>>())?;
    d.set_item("conserved", tr.frames.iter().map(|f| f.conserved).collect::<Vec<_>>())?;
    d.set_item("Z", tr.frames.iter().map(|f| f.z).collect::<Vec<_>>())?;
    d.set_item("W", tr.frames.iter().map(|f| f.w).collect::<Vec<_>>())?;
    d.set_item("steps", tr.steps)?;
    Ok(d)
}

/// Linear Fokker-Planck run with the annulus potential.
///
/// `direction` is `"forward"` (density) or `"dual"`.
#[pyfunction]
#[pyo3(signature = (grid, gamma, initial, times, dt_max = 0.01, direction = "forward"))]
fn fp_solve<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    gamma: f64,
    initial: Vec<f64>,
    times: Vec<f64>,
    dt_max: f64,
    direction: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let pot = CoreAnnulus::new(gamma).map_err(to_py)?;
    let opts = FpOptions::at(times, dt_max);
    let tr = match direction {
        "forward" => {
            let p = RadialProfile::new(grid.inner.clone(), ProfileKind::Density, initial).map_err(to_py)?;
            py.detach(|| core_fp_solve(&p, &pot, &opts)).map_err(to_py)?
        }
        "dual" => {
            let p = RadialProfile::new(grid.inner.clone(), ProfileKind::Field, initial).map_err(to_py)?;
            py.detach(|| dual_solve(&p, &pot, &opts)).map_err(to_py)?
        }
        other => return Err(PyValueError::new_err(format!("unknown direction {other:?}"))),
    };
    trajectory_dict(py, &tr)
}

/// Result of a coupled or baseline run.
#[pyclass(name = "CoupledRun")]
struct PyCoupled {
    inner: CoupledTrajectory,
}

#[pymethods]
impl PyCoupled {
    fn times(&self) -> Vec<f64> {
        self.inner.frames.iter().map(|f| f.t).collect()
    }
    fn rho1(&self, k: usize) -> PyResult<Vec<f64>> {
        self.frame(k).map(|f| f.rho1.clone())
    }
    fn rho2(&self, k: usize) -> PyResult<Vec<f64>> {
        self.frame(k).map(|f| f.rho2.clone())
    }
    /// `(t, mass1, mass2)` after every step.
    fn mass_series(&self) -> Vec<(f64, f64, f64)> {
        self.inner.mass_series.clone()
    }
    #[getter]
    fn budget_mismatch(&self) -> f64 {
        self.inner.max_budget_mismatch
    }
    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }
    /// First time the attractant lost `fraction * pi * theta`, or `None`.
    #[pyo3(signature = (fraction = 0.5))]
    fn half_time(&self, fraction: f64) -> Option<f64> {
        reaction::half_time(&self.inner, fraction).tau
    }
    /// Fitted pass-through constant at `t_end`.
    fn pass_through(&self, t_end: f64) -> PyResult<f64> {
        Ok(reaction::verify_pass_through(&self.inner, t_end).map_err(to_py)?.c_fit)
    }
    /// Number of mass-comparison violations up to the half-time.
    #[pyo3(signature = (dt_max = 0.01))]
    fn mass_comparison_violations(&self, py: Python<'_>, dt_max: f64) -> PyResult<usize> {
        let inner = &self.inner;
        Ok(py.detach(|| reaction::verify_mass_comparison(inner, dt_max)).map_err(to_py)?.violations)
    }
}

impl PyCoupled {
    fn frame(&self, k: usize) -> PyResult<&reaction::CoupledFrame> {
        self.inner.frames.get(k).ok_or_else(|| PyValueError::new_err(format!("no frame {k}")))
    }
}

/// Coupled run from the standard shell and attractant data.
///
/// With `stop_extra` set the run stops that long after the half-time.
#[pyfunction]
#[pyo3(signature = (params, t_end, frame_dt, dt_max = 0.05, stop_extra = None, chemotaxis = true))]
fn simulate(
    py: Python<'_>,
    params: &PyParams,
    t_end: f64,
    frame_dt: f64,
    dt_max: f64,
    stop_extra: Option<f64>,
    chemotaxis: bool,
) -> PyResult<PyCoupled> {
    let p = params.inner;
    let run = || -> cs::Result<CoupledTrajectory> {
        let grid = reaction::GridPolicy::default().build(&p)?;
        let rho1 = reaction::initial_shell(grid.clone(), p.l, p.m0)?;
        let rho2 = reaction::initial_attractant(grid, p.theta)?;
        let mut opts = CoupledOptions::new(t_end, frame_dt, dt_max);
        opts.stop_after_half_time = stop_extra.map(|e| (0.5, e));
        if chemotaxis {
            reaction::coupled_solve(&p, &rho1, &rho2, &opts)
        } else {
            reaction::diffusion_baseline_solve(&p, &rho1, &rho2, &opts)
        }
    };
    Ok(PyCoupled { inner: py.detach(run).map_err(to_py)? })
}

/// Analytic lower bound for the diffusion-only half-time.
#[pyfunction]
#[pyo3(signature = (params, c = 1.0))]
fn tau_d_lower_bound(params: &PyParams, c: f64) -> PyResult<f64> {
    Ok(reaction::tau_d_lower_bound(&params.inner, c).map_err(to_py)?.tau)
}

#[pyfunction]
fn exp_integral_e1(x: f64) -> PyResult<f64> {
    cs::quadrature::exp_integral_e1(x).map_err(to_py)
}

/// Fitted Poincare constants as a list of dicts.
#[pyfunction]
#[pyo3(signature = (gammas, truncation_radius = 3.0, extremals = false))]
fn poincare_suite<'py>(
    py: Python<'py>,
    gammas: Vec<f64>,
    truncation_radius: f64,
    extremals: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .detach(|| cs::poincare::poincare_suite(&gammas, truncation_radius, extremals))
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("weight_kind", &r.weight_kind)?;
            d.set_item("gamma", r.gamma)?;
            d.set_item("inequality_id", &r.inequality_id)?;
            d.set_item("fitted_C", r.fitted_c)?;
            d.set_item("extremal_ratio", r.extremal_ratio)?;
            d.set_item("battery_id", &r.battery_id)?;
            Ok(d)
        })
        .collect()
}

/// Run one acceptance criterion; returns `(passed, summary_line)`.
#[pyfunction]
fn check(py: Python<'_>, criterion: &str) -> PyResult<(bool, String)> {
    let id = cs::acceptance::parse_id(criterion)
        .ok_or_else(|| PyValueError::new_err(format!("unknown criterion {criterion:?}")))?;
    let o = py.detach(|| cs::acceptance::run(id)).map_err(to_py)?;
    Ok((o.passed, o.line()))
}

#[pymodule(name = "chemoscale")]
fn chemoscale_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyAnnulus>()?;
    m.add_class::<PyCoupled>()?;
    m.add_function(wrap_pyfunction!(fp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(tau_d_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(exp_integral_e1, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_suite, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
