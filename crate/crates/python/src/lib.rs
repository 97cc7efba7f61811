//! Python bindings for the dephasing simulator.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dephasing_sim as core;
use dephasing_sim::calibration::{DEFAULT_SCAN_POINTS, Q0Y_LIMIT};
use dephasing_sim::environment::DEFAULT_BASELINE_WINDOW;
use dephasing_sim::nonmarkov::{default_range, DEFAULT_ND_THRESHOLD, DEFAULT_TRAJECTORY_POINTS};

create_exception!(dephasing_sim, DephasingError, PyValueError);

fn to_py(e: core::Error) -> PyErr {
    DephasingError::new_err(e.to_string())
}

/// Polarization qubit as a density matrix in the (V, H) basis.
#[pyclass(name = "QubitState", module = "dephasing_sim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQubitState(core::QubitState);

#[pymethods]
impl PyQubitState {
    #[new]
    fn new(pop_v: f64, pop_h: f64, coh: Complex64) -> PyResult<Self> {
        core::QubitState::new(pop_v, pop_h, coh).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_bloch(x: f64, y: f64, z: f64) -> PyResult<Self> {
        core::QubitState::from_bloch(x, y, z).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn psi_plus() -> Self {
        Self(core::QubitState::psi_plus())
    }

    #[staticmethod]
    fn psi_minus() -> Self {
        Self(core::QubitState::psi_minus())
    }

    #[staticmethod]
    fn vertical() -> Self {
        Self(core::QubitState::vertical())
    }

    #[staticmethod]
    fn horizontal() -> Self {
        Self(core::QubitState::horizontal())
    }

    #[staticmethod]
    fn maximally_mixed() -> Self {
        Self(core::QubitState::maximally_mixed())
    }

    #[getter]
    fn pop_v(&self) -> f64 {
        self.0.pop_v()
    }

    #[getter]
    fn pop_h(&self) -> f64 {
        self.0.pop_h()
    }

    #[getter]
    fn coh(&self) -> Complex64 {
        self.0.coh()
    }

    fn bloch(&self) -> (f64, f64, f64) {
        let [x, y, z] = self.0.bloch();
        (x, y, z)
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.0.matrix()
    }

    fn __repr__(&self) -> String {
        format!("QubitState(pop_v={}, pop_h={}, coh={})", self.0.pop_v(), self.0.pop_h(), self.0.coh())
    }
}

/// Parameters of the analytic environment.
#[pyclass(name = "EnvParams", module = "dephasing_sim", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyEnvParams(core::EnvParams);

#[pymethods]
impl PyEnvParams {
    #[new]
    #[pyo3(signature = (w0, q0y, dv = 0.0, phi = 0.0))]
    fn new(w0: f64, q0y: f64, dv: f64, phi: f64) -> PyResult<Self> {
        core::EnvParams::new(w0, q0y, dv, phi).map(Self).map_err(to_py)
    }

    #[getter]
    fn w0(&self) -> f64 {
        self.0.w0
    }

    #[getter]
    fn q0y(&self) -> f64 {
        self.0.q0y
    }

    #[getter]
    fn dv(&self) -> f64 {
        self.0.dv
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.0.phi
    }

    fn is_structured(&self) -> bool {
        self.0.is_structured()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("EnvParams(w0={}, q0y={}, dv={}, phi={})", p.w0, p.q0y, p.dv, p.phi)
    }
}

/// Normalized momentum density on a uniform grid.
#[pyclass(name = "EnvironmentSpectrum", module = "dephasing_sim", frozen)]
struct PySpectrum(core::EnvironmentSpectrum);

#[pymethods]
impl PySpectrum {
    #[staticmethod]
    fn from_samples(q_grid: Vec<f64>, density: Vec<f64>) -> PyResult<Self> {
        core::EnvironmentSpectrum::from_samples(q_grid, density, None).map(Self).map_err(to_py)
    }

    #[getter]
    fn q_grid(&self) -> Vec<f64> {
        self.0.q_grid().to_vec()
    }

    #[getter]
    fn density(&self) -> Vec<f64> {
        self.0.density().to_vec()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Trace distance of the optimal pair along the displacement axis.
#[pyclass(name = "Trajectory", module = "dephasing_sim", frozen)]
struct PyTrajectory(core::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dc(&self) -> Vec<f64> {
        self.0.dc().to_vec()
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.0.d().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "DynamicsReport", module = "dephasing_sim", frozen, get_all)]
struct PyReport {
    nd: f64,
    classification: String,
    dc_max: Option<f64>,
    nd_threshold: f64,
}

impl From<core::DynamicsReport> for PyReport {
    fn from(r: core::DynamicsReport) -> Self {
        Self { nd: r.nd, classification: r.classification.to_string(), dc_max: r.dc_max, nd_threshold: r.nd_threshold }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        let dc_max = self.dc_max.map_or("None".to_string(), |x| x.to_string());
        format!("DynamicsReport(nd={}, classification={}, dc_max={dc_max})", self.nd, self.classification)
    }
}

#[pyclass(name = "CalibrationResult", module = "dephasing_sim", frozen, get_all)]
struct PyCalibration {
    q0y_fit: f64,
    residual: f64,
    /// `(dv_mm, nd_target, nd_model)` per row.
    table: Vec<(f64, f64, f64)>,
}

#[derive(FromPyObject)]
enum Source<'py> {
    Params(PyRef<'py, PyEnvParams>),
    Spectrum(PyRef<'py, PySpectrum>),
}

#[pyfunction]
fn prepare_state(hwp_deg: f64) -> PyQubitState {
    PyQubitState(core::prepare_state(hwp_deg))
}

#[pyfunction]
fn trace_distance(a: &PyQubitState, b: &PyQubitState) -> f64 {
    core::trace_distance(&a.0, &b.0)
}

#[pyfunction]
fn optimal_pair() -> (PyQubitState, PyQubitState) {
    let (a, b) = core::optimal_pair();
    (PyQubitState(a), PyQubitState(b))
}

/// Applies the dephasing channel with decoherence factor `kappa`.
#[pyfunction]
#[pyo3(signature = (rho, kappa, dc = 0.0))]
fn evolve_state(rho: &PyQubitState, kappa: Complex64, dc: f64) -> PyResult<PyQubitState> {
    core::evolve_state(&rho.0, &core::Kappa::new(kappa, dc)).map(PyQubitState).map_err(to_py)
}

#[pyfunction]
fn build_gaussian(params: &PyEnvParams) -> PyResult<PySpectrum> {
    core::build_gaussian(&params.0).map(PySpectrum).map_err(to_py)
}

#[pyfunction]
fn build_structured(params: &PyEnvParams) -> PyResult<PySpectrum> {
    core::build_structured(&params.0).map(PySpectrum).map_err(to_py)
}

/// Cleans measured `(q, counts)` rows into a normalized spectrum.
#[pyfunction]
#[pyo3(signature = (rows, baseline_window = DEFAULT_BASELINE_WINDOW))]
fn ingest_tabulated(rows: Vec<(f64, f64)>, baseline_window: f64) -> PyResult<PySpectrum> {
    core::ingest_tabulated(&rows, baseline_window).map(PySpectrum).map_err(to_py)
}

#[pyfunction]
fn kappa_closed_form(params: &PyEnvParams, dc: f64) -> PyResult<f64> {
    core::kappa_closed_form(&params.0, dc).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (spectrum, dc, phi = 0.0))]
fn kappa_quadrature(spectrum: &PySpectrum, dc: f64, phi: f64) -> PyResult<Complex64> {
    core::kappa_quadrature(&spectrum.0, dc, phi).map(|k| k.value).map_err(to_py)
}

/// Trajectory on `n_points` samples of `[0, range]`. The range defaults to
/// `dv + 4 w0`, which needs `EnvParams`.
#[pyfunction]
#[pyo3(signature = (source, range = None, n_points = DEFAULT_TRAJECTORY_POINTS))]
fn trajectory(py: Python<'_>, source: Source<'_>, range: Option<f64>, n_points: usize) -> PyResult<PyTrajectory> {
    let traj = match &source {
        Source::Params(p) => {
            let params = p.0;
            let range = range.unwrap_or_else(|| default_range(&params));
            py.detach(|| core::trajectory(core::EnvSource::Params(params), range, n_points))
        }
        Source::Spectrum(s) => {
            let range = range.ok_or_else(|| DephasingError::new_err("a spectrum needs an explicit range"))?;
            core::trajectory(core::EnvSource::Spectrum(&s.0), range, n_points)
        }
    };
    traj.map(PyTrajectory).map_err(to_py)
}

#[pyfunction]
fn blp_measure(traj: &PyTrajectory) -> f64 {
    core::blp_measure(&traj.0)
}

#[pyfunction]
#[pyo3(signature = (traj, nd_threshold = DEFAULT_ND_THRESHOLD))]
fn report(traj: &PyTrajectory, nd_threshold: f64) -> PyReport {
    core::report(&traj.0, nd_threshold).into()
}

/// `(dv, N_D)` for each separation; failed points carry `None`.
#[pyfunction]
fn nd_sweep(py: Python<'_>, w0: f64, q0y: f64, dv_grid: Vec<f64>) -> PyResult<Vec<(f64, Option<f64>)>> {
    let sweep = py.detach(|| core::nd_sweep(w0, q0y, &dv_grid)).map_err(to_py)?;
    Ok(sweep.into_iter().map(|(dv, nd)| (dv, nd.ok())).collect())
}

/// Calibrates `q0y` so the model `N_D` matches `rows` of `(dv, nd)`.
#[pyfunction]
#[pyo3(signature = (w0, rows, q0y_range = (0.0, Q0Y_LIMIT), n_scan = DEFAULT_SCAN_POINTS))]
fn fit_q0y(py: Python<'_>, w0: f64, rows: Vec<(f64, f64)>, q0y_range: (f64, f64), n_scan: usize) -> PyResult<PyCalibration> {
    let r = py.detach(|| core::fit_q0y(w0, &rows, q0y_range, n_scan)).map_err(to_py)?;
    Ok(PyCalibration {
        q0y_fit: r.q0y_fit,
        residual: r.residual,
        table: r.table.iter().map(|t| (t.dv_mm, t.nd_target, t.nd_model)).collect(),
    })
}

/// Qubit dephasing in interference-structured continuous environments.
#[pymodule]
#[pyo3(name = "dephasing_sim")]
fn dephasing_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DephasingError", m.py().get_type::<DephasingError>())?;
    m.add_class::<PyQubitState>()?;
    m.add_class::<PyEnvParams>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyCalibration>()?;
    m.add_function(wrap_pyfunction!(prepare_state, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_pair, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_state, m)?)?;
    m.add_function(wrap_pyfunction!(build_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(build_structured, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_tabulated, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(blp_measure, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(nd_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_q0y, m)?)?;
    Ok(())
}
