//! The switched plant `x' = A_σ x + B_σ u(t - D)`, its grid-resolution
//! input history and the closed-loop simulator.
//!
//! Inputs are held constant over each grid cell, so propagation across a
//! step is exact (zero-order hold) and every predictor integral is a finite
//! sum over cells.

use std::io::Write;

use crate::control::{ControllerKind, ControllerSpec, Predictors};
use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, ensure_square, expm, zoh_discretize, Matrix, Vector};
use crate::switching::{grid_steps, SwitchingSignal};

/// Mode family `{(A_i, B_i)}` with a common input delay.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedPlantSpec {
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    delay: f64,
}

impl SwitchedPlantSpec {
    pub fn new(a: Vec<Matrix>, b: Vec<Matrix>, delay: f64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "{} A matrices and {} B matrices",
                a.len(),
                b.len()
            )));
        }
        let q = ensure_square(&a[0])?;
        if q == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        for (i, (ai, bi)) in a.iter().zip(&b).enumerate() {
            if ai.nrows() != q || ai.ncols() != q {
                return Err(Error::Dimension(format!("A_{} is not {q}x{q}", i + 1)));
            }
            if bi.nrows() != q || bi.ncols() != 1 {
                return Err(Error::Dimension(format!("B_{} is not {q}x1", i + 1)));
            }
            ensure_finite(ai)?;
            ensure_finite(bi)?;
        }
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(Error::Config(format!(
                "delay must be positive, got {delay}"
            )));
        }
        Ok(Self { a, b, delay })
    }

    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn mode_count(&self) -> usize {
        self.a.len()
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn a(&self, mode: usize) -> &Matrix {
        &self.a[mode]
    }

    pub fn b(&self, mode: usize) -> &Matrix {
        &self.b[mode]
    }

    pub fn a_list(&self) -> &[Matrix] {
        &self.a
    }

    pub fn b_list(&self) -> &[Matrix] {
        &self.b
    }

    pub fn with_delay(&self, delay: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), delay)
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count() {
            return Err(Error::InvalidMode {
                mode,
                p: self.mode_count(),
            });
        }
        Ok(())
    }
}

/// One plant step under a held delayed input:
/// `x+ = Ad x + Bd u_delayed` with `(Ad, Bd)` the ZOH pair of the mode.
pub fn step(
    spec: &SwitchedPlantSpec,
    x: &Vector,
    mode: usize,
    u_delayed: f64,
    grid_dt: f64,
) -> Result<Vector> {
    spec.check_mode(mode)?;
    if x.len() != spec.state_dim() {
        return Err(Error::Dimension(format!("state has length {}", x.len())));
    }
    let (ad, bd) = zoh_discretize(spec.a(mode), spec.b(mode), grid_dt)?;
    Ok(ad * x + bd.column(0) * u_delayed)
}

/// Past inputs over `[t - D, t)`, one held sample per grid cell, oldest
/// first. `U(t - D)` is the first sample of the window.
#[derive(Debug, Clone)]
pub struct InputHistory {
    grid_dt: f64,
    window: usize,
    current_time: f64,
    samples: Vec<f64>,
}

impl InputHistory {
    /// Samples `u0` at the start of each cell of `[-D, 0)`.
    pub fn new(grid_dt: f64, delay: f64, u0: &dyn Fn(f64) -> f64) -> Result<Self> {
        if !(grid_dt > 0.0) {
            return Err(Error::NonPositiveStep(grid_dt));
        }
        let window = grid_steps(delay, grid_dt, "delay")?;
        if window == 0 {
            return Err(Error::Config(
                "delay must span at least one grid cell".into(),
            ));
        }
        let samples = (0..window)
            .map(|j| u0(-delay + j as f64 * grid_dt))
            .collect();
        Ok(Self {
            grid_dt,
            window,
            current_time: 0.0,
            samples,
        })
    }

    /// `samples` covers `[-D, 0)` oldest first; its length fixes `D`.
    pub fn from_samples(grid_dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(grid_dt > 0.0) {
            return Err(Error::NonPositiveStep(grid_dt));
        }
        if samples.is_empty() {
            return Err(Error::Config("history needs at least one sample".into()));
        }
        Ok(Self {
            grid_dt,
            window: samples.len(),
            current_time: 0.0,
            samples,
        })
    }

    pub fn grid_dt(&self) -> f64 {
        self.grid_dt
    }

    pub fn current_time(&self) -> f64 {
        self.current_time
    }

    pub fn delay(&self) -> f64 {
        self.window as f64 * self.grid_dt
    }

    /// The `[t - D, t)` window, oldest first.
    pub fn window(&self) -> &[f64] {
        &self.samples[self.samples.len() - self.window..]
    }

    /// The most recent `n` samples (may reach further back than the window
    /// when the history was built with a longer delay).
    pub fn tail(&self, n: usize) -> Result<&[f64]> {
        if n > self.samples.len() {
            return Err(Error::HistoryTooShort {
                have: self.samples.len(),
                need: n,
            });
        }
        Ok(&self.samples[self.samples.len() - n..])
    }

    /// `U(t - D)`.
    pub fn delayed(&self) -> f64 {
        self.window()[0]
    }

    /// Appends `U(t)` and advances time by one cell.
    pub fn push(&mut self, u: f64) {
        self.samples.push(u);
        self.current_time += self.grid_dt;
        // keep the buffer bounded; drop cells that no window can reach
        if self.samples.len() > 4 * self.window + 64 {
            let excess = self.samples.len() - self.window;
            self.samples.drain(..excess);
        }
    }

    /// Cell index inside the window for a time in `[t - D, t]`.
    fn cell(&self, time: f64, what: &'static str) -> Result<usize> {
        let start = self.current_time - self.delay();
        let rel = time - start;
        if rel < -1e-9 * self.grid_dt || rel > self.delay() + 1e-9 * self.grid_dt {
            return Err(Error::TimeOutOfRange {
                t: time,
                horizon: self.current_time,
            });
        }
        grid_steps(rel.max(0.0), self.grid_dt, what)
    }
}

/// `∫_{from}^{to} e^{A (anchor - θ)} B U(θ) dθ` over the held history,
/// accumulated cell by cell from the ZOH pair of `(A, B)`.
pub fn history_integral(
    history: &InputHistory,
    a: &Matrix,
    b: &Matrix,
    from: f64,
    to: f64,
    anchor: f64,
) -> Result<Vector> {
    let j0 = history.cell(from, "integral lower limit")?;
    let j1 = history.cell(to, "integral upper limit")?;
    if j1 < j0 {
        return Err(Error::Config(format!(
            "integral limits reversed: {from} > {to}"
        )));
    }
    let (ad, bd) = zoh_discretize(a, b, history.grid_dt)?;
    let mut z = Vector::zeros(a.nrows());
    for &u in &history.window()[j0..j1] {
        z = &ad * z + bd.column(0) * u;
    }
    if anchor != to {
        z = expm(&(a * (anchor - to)))? * z;
    }
    Ok(z)
}

/// Cached ZOH pair and exponential table of one `(A, B)` pair on a fixed
/// grid; the hot path of simulation and prediction.
#[derive(Debug, Clone)]
pub struct Propagator {
    q: usize,
    ad: Vec<f64>,
    bd: Vec<f64>,
    exp_table: Vec<Matrix>,
}

impl Propagator {
    /// Tabulates `e^{A k dt}` for `k = 0..=max_steps`.
    pub fn new(a: &Matrix, b: &Matrix, grid_dt: f64, max_steps: usize) -> Result<Self> {
        let (ad, bd) = zoh_discretize(a, b, grid_dt)?;
        let q = a.nrows();
        let mut ad_rows = Vec::with_capacity(q * q);
        for r in 0..q {
            for c in 0..q {
                ad_rows.push(ad[(r, c)]);
            }
        }
        let exp_table = (0..=max_steps)
            .map(|k| expm(&(a * (k as f64 * grid_dt))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            q,
            ad: ad_rows,
            bd: bd.column(0).iter().copied().collect(),
            exp_table,
        })
    }

    /// `e^{A k dt}`.
    pub fn exp_steps(&self, k: usize) -> &Matrix {
        &self.exp_table[k]
    }

    pub fn max_steps(&self) -> usize {
        self.exp_table.len() - 1
    }

    pub fn step(&self, x: &Vector, u: f64) -> Vector {
        let q = self.q;
        Vector::from_fn(q, |r, _| {
            let row = &self.ad[r * q..(r + 1) * q];
            row.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() + self.bd[r] * u
        })
    }

    /// Convolution of the held `cells` through `(A, B)`, anchored at the end
    /// of the last cell.
    pub fn convolve(&self, cells: &[f64]) -> Vector {
        let q = self.q;
        let mut z = vec![0.0; q];
        let mut next = vec![0.0; q];
        for &u in cells {
            for r in 0..q {
                let row = &self.ad[r * q..(r + 1) * q];
                let mut s = self.bd[r] * u;
                for c in 0..q {
                    s += row[c] * z[c];
                }
                next[r] = s;
            }
            std::mem::swap(&mut z, &mut next);
        }
        Vector::from_vec(z)
    }
}

/// Recorded closed-loop run on the grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid_dt: f64,
    /// Plant delay.
    pub delay: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub inputs: Vec<f64>,
    pub modes: Vec<usize>,
    pub taus: Vec<f64>,
    /// Backstepping residual `W(t)`, when recorded.
    pub residuals: Option<Vec<f64>>,
    /// Initial history `U(θ)`, `θ ∈ [-D, 0)`, one sample per cell.
    pub initial_inputs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `U` on cell `j` relative to time zero; negative cells come from the
    /// initial history.
    pub fn input_at_cell(&self, cell: isize) -> f64 {
        if cell < 0 {
            let n = self.initial_inputs.len() as isize;
            self.initial_inputs[(n + cell) as usize]
        } else {
            self.inputs[cell as usize]
        }
    }

    /// `J = ∫_0^T (|X|^2 + |U|^2) dt`, trapezoid rule on the grid.
    pub fn cost(&self) -> f64 {
        let f: Vec<f64> = self
            .states
            .iter()
            .zip(&self.inputs)
            .map(|(x, u)| x.norm_squared() + u * u)
            .collect();
        f.windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * self.grid_dt)
            .sum()
    }

    pub fn terminal_state_norm(&self) -> f64 {
        self.states.last().map_or(0.0, |x| x.norm())
    }

    /// CSV with header `t,x1..xq,u,mode,tau[,w]`; modes are labelled from 1
    /// and reals carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let q = self.states.first().map_or(0, |x| x.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=q).map(|i| format!("x{i}")));
        header.extend(["u", "mode", "tau"].map(String::from));
        if self.residuals.is_some() {
            header.push("w".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = format!("{:.16e}", self.times[k]);
            for v in self.states[k].iter() {
                row.push_str(&format!(",{v:.16e}"));
            }
            row.push_str(&format!(
                ",{:.16e},{},{:.16e}",
                self.inputs[k],
                self.modes[k] + 1,
                self.taus[k]
            ));
            if let Some(w) = &self.residuals {
                row.push_str(&format!(",{:.16e}", w[k]));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Simulation horizon, grid and diagnostics.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub horizon: f64,
    pub grid_dt: f64,
    /// Delay assumed by the controller; `None` means the plant delay.
    pub controller_delay: Option<f64>,
    /// Gains `K_i` for the backstepping residual; recording is enabled when
    /// present.
    pub residual_gains: Option<Vec<Matrix>>,
}

impl SimOptions {
    pub fn new(horizon: f64, grid_dt: f64) -> Self {
        Self {
            horizon,
            grid_dt,
            controller_delay: None,
            residual_gains: None,
        }
    }
}

/// Runs the closed loop on the grid. At each instant the controller sees
/// the state, its input window and the switching information it is entitled
/// to; its output is held over the step while the plant consumes the input
/// issued `D` seconds earlier.
pub fn simulate(
    plant: &SwitchedPlantSpec,
    signal: &SwitchingSignal,
    controller: &ControllerSpec,
    x0: &Vector,
    u0: &dyn Fn(f64) -> f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let dt = opts.grid_dt;
    if !(dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    if x0.len() != plant.state_dim() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, state dimension is {}",
            x0.len(),
            plant.state_dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if signal.mode_count() != plant.mode_count() {
        return Err(Error::Dimension(format!(
            "signal has {} modes, plant has {}",
            signal.mode_count(),
            plant.mode_count()
        )));
    }
    let plant_steps = grid_steps(plant.delay(), dt, "delay")?;
    let total = grid_steps(opts.horizon, dt, "horizon")?;
    let controller_delay = opts.controller_delay.unwrap_or(plant.delay());
    let ctrl_steps = grid_steps(controller_delay, dt, "controller delay")?;
    if plant_steps == 0 || ctrl_steps == 0 {
        return Err(Error::Config(
            "delays must span at least one grid cell".into(),
        ));
    }

    let grid = signal.on_grid(dt)?;
    let oracle_for_control = matches!(controller.kind, ControllerKind::ExactOracle { .. });
    let record = opts.residual_gains.is_some();
    let mut required = total;
    if oracle_for_control {
        required = required.max(total + ctrl_steps);
    }
    if record {
        required = required.max(total + plant_steps);
    }
    if grid.horizon_steps() < required {
        return Err(Error::SignalTooShort {
            horizon: signal.horizon(),
            required: required as f64 * dt,
        });
    }
    if (oracle_for_control || record) && grid.is_causal() {
        return Err(Error::CausalSignal);
    }

    let ctrl_plant = plant.with_delay(controller_delay)?;
    let predictors = Predictors::for_controller(&ctrl_plant, dt, controller)?;
    let residual_predictors = match &opts.residual_gains {
        Some(_) if ctrl_steps == plant_steps => None,
        Some(_) => Some(Predictors::new(plant, dt, None)?),
        None => None,
    };
    let residual_bank = residual_predictors.as_ref().unwrap_or(&predictors);
    let plant_props: Vec<Propagator> = (0..plant.mode_count())
        .map(|i| Propagator::new(plant.a(i), plant.b(i), dt, 0))
        .collect::<Result<_>>()?;

    let longest = plant_steps.max(ctrl_steps);
    let history_delay = longest as f64 * dt;
    let mut history = InputHistory::new(dt, history_delay, u0)?;
    let initial_inputs = history.tail(plant_steps)?.to_vec();
    let dwell_steps = controller.dwell_steps(dt);

    let mut traj = Trajectory {
        grid_dt: dt,
        delay: plant.delay(),
        times: Vec::with_capacity(total + 1),
        states: Vec::with_capacity(total + 1),
        inputs: Vec::with_capacity(total + 1),
        modes: Vec::with_capacity(total + 1),
        taus: Vec::with_capacity(total + 1),
        residuals: record.then(|| Vec::with_capacity(total + 1)),
        initial_inputs,
    };

    let mut x = x0.clone();
    for k in 0..=total {
        let mode = grid.mode_at_step(k);
        let tau = grid.tau_steps(k, dwell_steps, ctrl_steps, controller.dwell_known);
        let window = history.tail(ctrl_steps)?;
        let u = predictors.evaluate(controller, &x, window, &grid, k, tau)?;

        if let (Some(gains), Some(w)) = (&opts.residual_gains, traj.residuals.as_mut()) {
            let plant_window = history.tail(plant_steps)?;
            let tau_plant = grid.tau_steps(k, dwell_steps, plant_steps, controller.dwell_known);
            let p = residual_bank.exact_steps(&x, plant_window, &grid, k, tau_plant)?;
            let target = grid.mode_at_step(k + plant_steps);
            w.push(u - (&gains[target] * p)[0]);
        }

        traj.times.push(k as f64 * dt);
        traj.states.push(x.clone());
        traj.inputs.push(u);
        traj.modes.push(mode);
        traj.taus.push(tau as f64 * dt);
        if k == total {
            break;
        }
        let delayed = history.tail(plant_steps)?[0];
        x = plant_props[mode].step(&x, delayed);
        history.push(u);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::solve_lyapunov;
    use nalgebra::{dmatrix, dvector};

    fn a1() -> Matrix {
        dmatrix![1.0, 1.0; 1.0, 2.0]
    }
    fn b1() -> Matrix {
        dmatrix![0.0; 1.0]
    }

    #[test]
    fn stable_free_motion_decreases_lyapunov_norm() {
        let a = dmatrix![-1.0, 2.0; 0.0, -3.0];
        let spec = SwitchedPlantSpec::new(vec![a.clone()], vec![b1()], 1.0).unwrap();
        let s = solve_lyapunov(&a, &Matrix::identity(2, 2)).unwrap();
        let x = dvector![1.0, -0.5];
        let next = step(&spec, &x, 0, 0.0, 0.01).unwrap();
        let v = |z: &Vector| (z.transpose() * &s * z)[0];
        assert!(v(&next) < v(&x));
    }

    #[test]
    fn integrator_step() {
        let spec = SwitchedPlantSpec::new(vec![Matrix::zeros(2, 2)], vec![b1()], 1.0).unwrap();
        let x = dvector![0.2, 0.3];
        let next = step(&spec, &x, 0, 1.0, 0.1).unwrap();
        assert!((next - dvector![0.2, 0.4]).amax() < 1e-15);
        assert!(matches!(
            step(&spec, &x, 1, 1.0, 0.1),
            Err(Error::InvalidMode { .. })
        ));
    }

    #[test]
    fn step_matches_fine_euler() {
        let spec = SwitchedPlantSpec::new(vec![a1()], vec![b1()], 1.0).unwrap();
        let dt = 1e-3;
        for (x, u) in [(dvector![0.4, -1.1], 0.3), (dvector![-2.0, 0.5], -1.7)] {
            let exact = step(&spec, &x, 0, u, dt).unwrap();
            let n = 1000;
            let h = dt / n as f64;
            let mut z = x.clone();
            for _ in 0..n {
                // Heun substeps keep the oracle error far below tolerance.
                let k1 = a1() * &z + b1() * u;
                let k2 = a1() * (&z + &k1 * h) + b1() * u;
                z += (k1 + k2) * (0.5 * h);
            }
            assert!((exact - z).amax() < 1e-8);
        }
    }

    #[test]
    fn plant_spec_validation() {
        assert!(SwitchedPlantSpec::new(vec![a1()], vec![b1()], 0.0).is_err());
        assert!(SwitchedPlantSpec::new(vec![a1()], vec![dmatrix![1.0, 2.0]], 1.0).is_err());
        assert!(
            SwitchedPlantSpec::new(vec![a1(), Matrix::zeros(3, 3)], vec![b1(), b1()], 1.0).is_err()
        );
        assert!(SwitchedPlantSpec::new(vec![], vec![], 1.0).is_err());
    }

    #[test]
    fn history_window_and_push() {
        let mut h = InputHistory::new(0.25, 1.0, &|t| t).unwrap();
        assert_eq!(h.window(), &[-1.0, -0.75, -0.5, -0.25]);
        assert_eq!(h.delayed(), -1.0);
        h.push(9.0);
        assert_eq!(h.window(), &[-0.75, -0.5, -0.25, 9.0]);
        assert!((h.current_time() - 0.25).abs() < 1e-15);
        for i in 0..100 {
            h.push(i as f64);
        }
        assert_eq!(h.window(), &[96.0, 97.0, 98.0, 99.0]);
        assert!(InputHistory::new(0.3, 1.0, &|_| 0.0).is_err());
    }

    #[test]
    fn history_integral_closed_forms() {
        let zero = InputHistory::new(0.01, 1.0, &|_| 0.0).unwrap();
        let v = history_integral(&zero, &a1(), &b1(), -1.0, 0.0, 0.0).unwrap();
        assert_eq!(v.amax(), 0.0);

        let ones = InputHistory::new(0.01, 1.0, &|_| 1.0).unwrap();
        let v = history_integral(&ones, &a1(), &b1(), -0.5, -0.5, -0.5).unwrap();
        assert_eq!(v.amax(), 0.0);

        let b = dmatrix![0.5; 2.0];
        let v = history_integral(&ones, &Matrix::zeros(2, 2), &b, -0.7, -0.2, -0.2).unwrap();
        assert!((v - dvector![0.25, 1.0]).amax() < 1e-13);

        assert!(history_integral(&ones, &a1(), &b1(), -1.5, 0.0, 0.0).is_err());
        assert!(history_integral(&ones, &a1(), &b1(), -0.505, 0.0, 0.0).is_err());
    }

    #[test]
    fn history_integral_matches_fine_trapezoid() {
        let dt = 0.01;
        let u = |t: f64| (3.0 * t).sin() + 0.5 * (7.0 * t).cos();
        let hist = InputHistory::new(dt, 1.0, &u).unwrap();
        let (from, to, anchor) = (-0.8, -0.1, 0.0);
        let got = history_integral(&hist, &a1(), &b1(), from, to, anchor).unwrap();

        // trapezoid rule inside each held cell, where the integrand is smooth
        let mut acc = Vector::zeros(2);
        let per_cell = 200;
        let first = ((from + 1.0) / dt).round() as usize;
        let last = ((to + 1.0) / dt).round() as usize;
        for j in first..last {
            let (lo, u) = (-1.0 + j as f64 * dt, hist.window()[j]);
            let h = dt / per_cell as f64;
            for i in 0..=per_cell {
                let theta = lo + i as f64 * h;
                let w = if i == 0 || i == per_cell { 0.5 } else { 1.0 };
                acc += expm(&(a1() * (anchor - theta))).unwrap() * b1().column(0) * (u * w * h);
            }
        }
        assert!((got - acc).amax() < 1e-7);
    }

    #[test]
    fn propagator_matches_reference() {
        let prop = Propagator::new(&a1(), &b1(), 0.01, 50).unwrap();
        let x = dvector![0.3, -0.4];
        let spec = SwitchedPlantSpec::new(vec![a1()], vec![b1()], 1.0).unwrap();
        let reference = step(&spec, &x, 0, 0.8, 0.01).unwrap();
        assert!((prop.step(&x, 0.8) - reference).amax() < 1e-15);
        assert!((prop.exp_steps(50) - expm(&(a1() * 0.5)).unwrap()).amax() < 1e-12);

        let hist = InputHistory::new(0.01, 1.0, &|t| (5.0 * t).sin()).unwrap();
        let reference = history_integral(&hist, &a1(), &b1(), -0.6, -0.2, -0.2).unwrap();
        let fast = prop.convolve(&hist.window()[40..80]);
        assert!((reference - fast).amax() < 1e-13);
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            grid_dt: 0.5,
            delay: 1.0,
            times: vec![0.0, 0.5],
            states: vec![dvector![1.0, 2.0], dvector![0.5, 0.25]],
            inputs: vec![0.0, -1.0],
            modes: vec![0, 2],
            taus: vec![0.5, 0.0],
            residuals: Some(vec![0.0, 0.1]),
            initial_inputs: vec![0.0, 0.0],
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,u,mode,tau,w");
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "5.0000000000000000e-1");
        assert_eq!(row[4], "3");
        assert!((traj.cost() - 0.5 * 0.5 * (5.0 + 0.3125 + 1.0)).abs() < 1e-15);
    }
}
