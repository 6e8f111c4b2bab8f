use nalgebra::Complex;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use switchpred::harness::{self, reference, ConfigFile, Scenario};
use switchpred::margins::{rate_pipeline, MarginConstants, Mismatch};
use switchpred::numerics::{self, from_rows, to_rows};
use switchpred::switching::generate;
use switchpred::{
    CenterMethod, ControllerKind, ControllerSpec, DesignResult, DwellSpec, Matrix, NormKind,
    SimOptions, SwitchedPlantSpec, SwitchingSignal, Vector,
};

type Rows = Vec<Vec<f64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &Rows) -> PyResult<Matrix> {
    from_rows(rows).map_err(err)
}

fn column(v: &[f64]) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v)
}

fn norm_kind(name: &str) -> PyResult<NormKind> {
    match name {
        "spectral" => Ok(NormKind::Spectral),
        "frobenius" => Ok(NormKind::Frobenius),
        other => Err(err(format!("unknown norm {other:?}"))),
    }
}

fn center_method(name: &str) -> PyResult<CenterMethod> {
    match name {
        "chebyshev" => Ok(CenterMethod::Chebyshev),
        "mean" => Ok(CenterMethod::Mean),
        other => Err(err(format!("unknown center method {other:?}"))),
    }
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

/// Switched plant `dX/dt = A_σ X + B_σ U(t - D)`; `b` holds one input
/// column per mode.
#[pyclass(name = "Plant", module = "switchpred_py")]
pub struct PyPlant {
    inner: SwitchedPlantSpec,
}

#[pymethods]
impl PyPlant {
    #[new]
    fn new(a: Vec<Rows>, b: Vec<Vec<f64>>, delay: f64) -> PyResult<Self> {
        let a = a.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let b = b.iter().map(|v| column(v)).collect();
        Ok(Self {
            inner: SwitchedPlantSpec::new(a, b, delay).map_err(err)?,
        })
    }

    /// The three-mode example with unit delay.
    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: reference::plant(),
        }
    }

    #[getter]
    fn delay(&self) -> f64 {
        self.inner.delay()
    }

    #[getter]
    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn a(&self, mode: usize) -> PyResult<Rows> {
        self.check(mode)?;
        Ok(to_rows(self.inner.a(mode)))
    }

    fn b(&self, mode: usize) -> PyResult<Vec<f64>> {
        self.check(mode)?;
        Ok(self.inner.b(mode).iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Plant(modes={}, states={}, delay={})",
            self.inner.mode_count(),
            self.inner.state_dim(),
            self.inner.delay()
        )
    }
}

impl PyPlant {
    fn check(&self, mode: usize) -> PyResult<()> {
        if mode >= self.inner.mode_count() {
            return Err(err(format!("mode {mode} out of range")));
        }
        Ok(())
    }
}

/// Gains, Lyapunov certificates, representative matrices and mismatch radii.
#[pyclass(name = "Design", module = "switchpred_py")]
pub struct PyDesign {
    inner: DesignResult,
}

#[pymethods]
impl PyDesign {
    #[getter]
    fn k_list(&self) -> Vec<Rows> {
        self.inner.k_list.iter().map(to_rows).collect()
    }

    #[getter]
    fn s_list(&self) -> Vec<Rows> {
        self.inner.s_list.iter().map(to_rows).collect()
    }

    #[getter]
    fn a_bar(&self) -> Rows {
        to_rows(&self.inner.a_bar)
    }

    #[getter]
    fn b_bar(&self) -> Rows {
        to_rows(&self.inner.b_bar)
    }

    #[getter]
    fn k_bar(&self) -> Rows {
        to_rows(&self.inner.k_bar)
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn eps_bar(&self) -> f64 {
        self.inner.eps_bar
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: DesignResult::from_json(text).map_err(err)?,
        })
    }

    fn report(&self) -> String {
        self.inner.report()
    }
}

/// Piecewise-constant switching signal; modes are 0-based.
#[pyclass(name = "SwitchingSignal", module = "switchpred_py")]
pub struct PySignal {
    inner: SwitchingSignal,
}

#[pymethods]
impl PySignal {
    #[new]
    fn new(
        switch_times: Vec<f64>,
        modes: Vec<usize>,
        mode_count: usize,
        horizon: f64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: SwitchingSignal::new(switch_times, modes, mode_count, horizon).map_err(err)?,
        })
    }

    /// Seeded signal whose dwell lengths lie in `[tau_d, tau_bar_d]`.
    #[staticmethod]
    #[pyo3(signature = (tau_d, tau_bar_d, mode_count, horizon, seed, grid_dt = 1e-3))]
    fn generate(
        tau_d: f64,
        tau_bar_d: f64,
        mode_count: usize,
        horizon: f64,
        seed: u64,
        grid_dt: f64,
    ) -> PyResult<Self> {
        let spec = DwellSpec::new(tau_d, tau_bar_d).map_err(err)?;
        Ok(Self {
            inner: generate(&spec, mode_count, horizon, grid_dt, seed).map_err(err)?,
        })
    }

    #[getter]
    fn switch_times(&self) -> Vec<f64> {
        self.inner.switch_times().to_vec()
    }

    #[getter]
    fn modes(&self) -> Vec<usize> {
        self.inner.modes().to_vec()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn mode_at(&self, t: f64) -> PyResult<usize> {
        self.inner.mode_at(t).map_err(err)
    }

    #[pyo3(signature = (t, tau_d, delay, dwell_known = true))]
    fn tau(&self, t: f64, tau_d: f64, delay: f64, dwell_known: bool) -> PyResult<f64> {
        self.inner.tau(t, tau_d, delay, dwell_known).map_err(err)
    }

    fn to_table(&self) -> String {
        self.inner.to_table()
    }
}

/// Sampled closed-loop run.
#[pyclass(name = "Trajectory", module = "switchpred_py", get_all)]
pub struct PyTrajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    inputs: Vec<f64>,
    modes: Vec<usize>,
    taus: Vec<f64>,
    residuals: Option<Vec<f64>>,
    cost: f64,
    terminal_state_norm: f64,
}

#[pyfunction]
fn expm(m: Rows) -> PyResult<Rows> {
    Ok(to_rows(&numerics::expm(&matrix(&m)?).map_err(err)?))
}

/// Solves `Hᵀ S + S H = -Q`.
#[pyfunction]
fn solve_lyapunov(h: Rows, q: Rows) -> PyResult<Rows> {
    Ok(to_rows(
        &numerics::solve_lyapunov(&matrix(&h)?, &matrix(&q)?).map_err(err)?,
    ))
}

/// Single-input gain placing the eigenvalues of `A + B K` at real `poles`.
#[pyfunction]
fn pole_place(a: Rows, b: Vec<f64>, poles: Vec<f64>) -> PyResult<Rows> {
    let poles: Vec<Complex<f64>> = poles.into_iter().map(|p| Complex::new(p, 0.0)).collect();
    Ok(to_rows(
        &numerics::pole_place(&matrix(&a)?, &column(&b), &poles).map_err(err)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (family, norm = "spectral"))]
fn chebyshev_center(family: Vec<Rows>, norm: &str) -> PyResult<(Rows, f64)> {
    let ys = family.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    let (c, r) = switchpred::chebyshev_center(&ys, norm_kind(norm)?).map_err(err)?;
    Ok((to_rows(&c), r))
}

#[pyfunction]
#[pyo3(signature = (plant, poles, q = None, norm = "spectral", center = "chebyshev"))]
fn design(
    plant: &PyPlant,
    poles: Vec<f64>,
    q: Option<Vec<Rows>>,
    norm: &str,
    center: &str,
) -> PyResult<PyDesign> {
    let poles: Vec<Complex<f64>> = poles.into_iter().map(|p| Complex::new(p, 0.0)).collect();
    let q = q
        .map(|qs| qs.iter().map(matrix).collect::<PyResult<Vec<_>>>())
        .transpose()?;
    let inner = switchpred::synthesize(
        &plant.inner,
        &poles,
        q,
        norm_kind(norm)?,
        center_method(center)?,
    )
    .map_err(err)?;
    Ok(PyDesign { inner })
}

/// Margin report as a dict; `eps_used` is `"zero"` or `"actual"`.
#[pyfunction]
#[pyo3(signature = (plant, design, tau_d, tau_bar_d, eps_used = "zero"))]
fn margins(
    py: Python<'_>,
    plant: &PyPlant,
    design: &PyDesign,
    tau_d: f64,
    tau_bar_d: f64,
    eps_used: &str,
) -> PyResult<Py<PyAny>> {
    let c = MarginConstants::from_design(&plant.inner, &design.inner).map_err(err)?;
    let used = match eps_used {
        "zero" => Mismatch::zero(),
        "actual" => Mismatch::actual(&design.inner),
        other => {
            return Err(err(format!(
                "eps_used must be \"zero\" or \"actual\", got {other:?}"
            )))
        }
    };
    let report = rate_pipeline(&design.inner, &c, used, tau_d, tau_bar_d).map_err(err)?;
    json_to_py(py, &report.to_json())
}

/// Closed-loop run of `controller` in `{"u1", "u2", "exact", "open_loop"}`.
#[pyfunction]
#[pyo3(signature = (
    plant, design, signal, x0, controller = "u1", dwell_known = true, tau_d = 0.0,
    u0 = 0.0, horizon = 20.0, grid_dt = 1e-3, record_residuals = false
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    plant: &PyPlant,
    design: &PyDesign,
    signal: &PySignal,
    x0: Vec<f64>,
    controller: &str,
    dwell_known: bool,
    tau_d: f64,
    u0: f64,
    horizon: f64,
    grid_dt: f64,
    record_residuals: bool,
) -> PyResult<PyTrajectory> {
    let d = &design.inner;
    let kind = match controller {
        "u1" => ControllerKind::AveragePredictor {
            a_bar: d.a_bar.clone(),
            b_bar: d.b_bar.clone(),
            k_bar: d.k_bar.clone(),
        },
        "u2" => ControllerKind::AveragingPredictors {
            gains: d.k_list.clone(),
        },
        "exact" => ControllerKind::ExactOracle {
            gains: d.k_list.clone(),
        },
        "open_loop" => ControllerKind::OpenLoop,
        other => return Err(err(format!("unknown controller {other:?}"))),
    };
    let spec = ControllerSpec::new(kind, dwell_known, tau_d);
    let mut opts = SimOptions::new(horizon, grid_dt);
    if record_residuals {
        opts.residual_gains = Some(d.k_list.clone());
    }
    let x0 = Vector::from_vec(x0);
    let traj = py
        .detach(|| switchpred::simulate(&plant.inner, &signal.inner, &spec, &x0, &|_| u0, &opts))
        .map_err(err)?;
    Ok(PyTrajectory {
        cost: traj.cost(),
        terminal_state_norm: traj.terminal_state_norm(),
        states: traj
            .states
            .iter()
            .map(|x| x.iter().copied().collect())
            .collect(),
        times: traj.times,
        inputs: traj.inputs,
        modes: traj.modes,
        taus: traj.taus,
        residuals: traj.residuals,
    })
}

/// Runs a TOML scenario file and returns the summary as a dict.
#[pyfunction]
fn run_config(py: Python<'_>, path: std::path::PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = ConfigFile::load(&path).map_err(err)?;
    let scenario = Scenario::from_config(&cfg).map_err(err)?;
    let (summary, _) = py.detach(|| harness::run(&scenario)).map_err(err)?;
    json_to_py(py, &serde_json::to_string(&summary).map_err(err)?)
}

/// Rebuilds the three-mode example; returns `(report_text, all_pass)`.
#[pyfunction]
#[pyo3(signature = (seeds = 5))]
fn reproduce(py: Python<'_>, seeds: usize) -> PyResult<(String, bool)> {
    let report = py.detach(|| reference::reproduce(seeds)).map_err(err)?;
    Ok((report.text(), report.all_pass()))
}

#[pymodule]
fn switchpred_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlant>()?;
    m.add_class::<PyDesign>()?;
    m.add_class::<PySignal>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(pole_place, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_center, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(margins, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
