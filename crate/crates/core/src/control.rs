//! Predictor-feedback laws for the delayed switched plant.
//!
//! All laws share the same first stage: the state is propagated exactly
//! over the short horizon `tau(t)`, during which the active mode is known
//! from the dwell-time bound. Beyond that horizon the laws differ:
//!
//! * `AveragePredictor` runs one predictor on a representative pair
//!   `(Ā, B̄)` and applies `K̄`;
//! * `AveragingPredictors` runs one predictor per mode and averages the
//!   resulting feedbacks `K_i P̂_i`;
//! * `ExactOracle` reads the future switching signal and reproduces
//!   `X(t + D)` exactly.
//!
//! Windows are slices of held input cells covering `[t - D, t)` oldest
//! first; `tau` and the delay are counted in grid steps internally.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::plant::{InputHistory, Propagator, SwitchedPlantSpec};
use crate::switching::{grid_steps, GridSignal};

/// Which feedback law to run.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    /// `U1`: single predictor on `(Ā, B̄)` with gain `K̄`.
    AveragePredictor {
        a_bar: Matrix,
        b_bar: Matrix,
        k_bar: Matrix,
    },
    /// `U2`: average of the per-mode predictor feedbacks.
    AveragingPredictors { gains: Vec<Matrix> },
    /// Exact predictor feedback; needs the future switching signal.
    ExactOracle { gains: Vec<Matrix> },
    /// `U = 0`.
    OpenLoop,
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::AveragePredictor { .. } => "u1",
            Self::AveragingPredictors { .. } => "u2",
            Self::ExactOracle { .. } => "exact",
            Self::OpenLoop => "open_loop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    /// Whether the short exact horizon `tau(t)` is used; without it
    /// `tau = 0` and prediction starts from the current state.
    pub dwell_known: bool,
    /// Minimum dwell time assumed by the controller.
    pub tau_d: f64,
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind, dwell_known: bool, tau_d: f64) -> Self {
        Self {
            kind,
            dwell_known,
            tau_d,
        }
    }

    /// Minimum dwell rounded down to the grid.
    pub(crate) fn dwell_steps(&self, dt: f64) -> usize {
        if self.tau_d <= 0.0 {
            0
        } else {
            (self.tau_d / dt + 1e-9).floor() as usize
        }
    }
}

/// Cached propagators for every mode, and optionally for `(Ā, B̄)`, on one
/// grid and one delay.
#[derive(Debug, Clone)]
pub struct Predictors {
    grid_dt: f64,
    delay_steps: usize,
    q: usize,
    modes: Vec<Propagator>,
    average: Option<Propagator>,
}

impl Predictors {
    /// `average` is the representative pair `(Ā, B̄)` used by `U1`.
    pub fn new(
        plant: &SwitchedPlantSpec,
        grid_dt: f64,
        average: Option<(&Matrix, &Matrix)>,
    ) -> Result<Self> {
        if !(grid_dt > 0.0) {
            return Err(Error::NonPositiveStep(grid_dt));
        }
        let n = grid_steps(plant.delay(), grid_dt, "delay")?;
        let q = plant.state_dim();
        let modes = (0..plant.mode_count())
            .map(|i| Propagator::new(plant.a(i), plant.b(i), grid_dt, n))
            .collect::<Result<Vec<_>>>()?;
        let average = match average {
            Some((a, b)) => {
                if a.nrows() != q || a.ncols() != q || b.nrows() != q || b.ncols() != 1 {
                    return Err(Error::Dimension(
                        "average pair does not match the plant".into(),
                    ));
                }
                Some(Propagator::new(a, b, grid_dt, n)?)
            }
            None => None,
        };
        Ok(Self {
            grid_dt,
            delay_steps: n,
            q,
            modes,
            average,
        })
    }

    pub fn for_controller(
        plant: &SwitchedPlantSpec,
        grid_dt: f64,
        spec: &ControllerSpec,
    ) -> Result<Self> {
        match &spec.kind {
            ControllerKind::AveragePredictor {
                a_bar,
                b_bar,
                k_bar,
            } => {
                check_gain(k_bar, plant.state_dim())?;
                Self::new(plant, grid_dt, Some((a_bar, b_bar)))
            }
            ControllerKind::AveragingPredictors { gains }
            | ControllerKind::ExactOracle { gains } => {
                check_gains(gains, plant.mode_count(), plant.state_dim())?;
                Self::new(plant, grid_dt, None)
            }
            ControllerKind::OpenLoop => Self::new(plant, grid_dt, None),
        }
    }

    pub fn grid_dt(&self) -> f64 {
        self.grid_dt
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    fn mode(&self, mode: usize) -> Result<&Propagator> {
        self.modes.get(mode).ok_or(Error::InvalidMode {
            mode,
            p: self.modes.len(),
        })
    }

    fn check_inputs(&self, x: &Vector, window: &[f64], tau: usize) -> Result<()> {
        if x.len() != self.q {
            return Err(Error::Dimension(format!("state has length {}", x.len())));
        }
        if window.len() != self.delay_steps {
            return Err(Error::HistoryTooShort {
                have: window.len(),
                need: self.delay_steps,
            });
        }
        if tau > self.delay_steps {
            return Err(Error::HorizonTooLong {
                tau: tau as f64 * self.grid_dt,
                delay: self.delay_steps as f64 * self.grid_dt,
            });
        }
        Ok(())
    }

    /// `X(t + tau)` from the current mode and the first `tau` cells.
    pub(crate) fn short_steps(
        &self,
        x: &Vector,
        window: &[f64],
        mode: usize,
        tau: usize,
    ) -> Result<Vector> {
        self.check_inputs(x, window, tau)?;
        let prop = self.mode(mode)?;
        Ok(prop.exp_steps(tau) * x + prop.convolve(&window[..tau]))
    }

    fn extend(prop: &Propagator, x_tau: &Vector, window: &[f64], tau: usize) -> Vector {
        let n = window.len();
        prop.exp_steps(n - tau) * x_tau + prop.convolve(&window[tau..])
    }

    /// `P̂_target(t)`: the short prediction continued to `t + D` under mode
    /// `target`.
    pub(crate) fn mode_steps(
        &self,
        x: &Vector,
        window: &[f64],
        mode_now: usize,
        tau: usize,
        target: usize,
    ) -> Result<Vector> {
        let x_tau = self.short_steps(x, window, mode_now, tau)?;
        Ok(Self::extend(self.mode(target)?, &x_tau, window, tau))
    }

    pub(crate) fn average_steps(
        &self,
        x: &Vector,
        window: &[f64],
        mode_now: usize,
        tau: usize,
    ) -> Result<Vector> {
        let avg = self
            .average
            .as_ref()
            .ok_or_else(|| Error::Config("no average pair configured".into()))?;
        let x_tau = self.short_steps(x, window, mode_now, tau)?;
        Ok(Self::extend(avg, &x_tau, window, tau))
    }

    /// Exact `X(t + D)` from the switching signal over `[t, t + D)`.
    ///
    /// The first factor uses the mode active at `t` over the short horizon;
    /// the remainder is a product over the constant-mode segments, taken in
    /// descending order. `tau` is clipped to the first segment so the result
    /// stays exact even when the signal violates the assumed dwell.
    pub(crate) fn exact_steps(
        &self,
        x: &Vector,
        window: &[f64],
        signal: &GridSignal,
        step: usize,
        tau: usize,
    ) -> Result<Vector> {
        if signal.is_causal() {
            return Err(Error::CausalSignal);
        }
        self.check_inputs(x, window, tau)?;
        let n = self.delay_steps;
        if step + n > signal.horizon_steps() {
            return Err(Error::SignalTooShort {
                horizon: signal.horizon_steps() as f64 * self.grid_dt,
                required: (step + n) as f64 * self.grid_dt,
            });
        }
        let first = signal.segments(step, step + n.max(1))[0];
        let tau = tau.min(first.2 - step);
        let x_tau = self.short_steps(x, window, first.0, tau)?;

        let segments = signal.segments(step + tau, step + n);
        let mut suffix = Matrix::identity(self.q, self.q);
        let mut p = Vector::zeros(self.q);
        for &(mode, start, end) in segments.iter().rev() {
            let prop = self.mode(mode)?;
            p += &suffix * prop.convolve(&window[start - step..end - step]);
            suffix = &suffix * prop.exp_steps(end - start);
        }
        Ok(p + suffix * x_tau)
    }

    pub(crate) fn u1_steps(
        &self,
        x: &Vector,
        window: &[f64],
        mode_now: usize,
        tau: usize,
        k_bar: &Matrix,
    ) -> Result<f64> {
        Ok((k_bar * self.average_steps(x, window, mode_now, tau)?)[0])
    }

    pub(crate) fn u2_steps(
        &self,
        x: &Vector,
        window: &[f64],
        mode_now: usize,
        tau: usize,
        gains: &[Matrix],
    ) -> Result<f64> {
        check_gains(gains, self.modes.len(), self.q)?;
        let x_tau = self.short_steps(x, window, mode_now, tau)?;
        let total: f64 = self
            .modes
            .iter()
            .zip(gains)
            .map(|(prop, k)| (k * Self::extend(prop, &x_tau, window, tau))[0])
            .sum();
        Ok(total / self.modes.len() as f64)
    }

    pub(crate) fn exact_u_steps(
        &self,
        x: &Vector,
        window: &[f64],
        signal: &GridSignal,
        step: usize,
        tau: usize,
        gains: &[Matrix],
    ) -> Result<f64> {
        check_gains(gains, self.modes.len(), self.q)?;
        let p = self.exact_steps(x, window, signal, step, tau)?;
        let target = signal.mode_at_step(step + self.delay_steps);
        Ok((&gains[target] * p)[0])
    }

    /// Control value at grid step `step`, given `tau` in steps.
    pub fn evaluate(
        &self,
        spec: &ControllerSpec,
        x: &Vector,
        window: &[f64],
        signal: &GridSignal,
        step: usize,
        tau: usize,
    ) -> Result<f64> {
        let mode_now = signal.mode_at_step(step);
        match &spec.kind {
            ControllerKind::AveragePredictor { k_bar, .. } => {
                self.u1_steps(x, window, mode_now, tau, k_bar)
            }
            ControllerKind::AveragingPredictors { gains } => {
                self.u2_steps(x, window, mode_now, tau, gains)
            }
            ControllerKind::ExactOracle { gains } => {
                self.exact_u_steps(x, window, signal, step, tau, gains)
            }
            ControllerKind::OpenLoop => Ok(0.0),
        }
    }

    fn tau_steps(&self, tau: f64) -> Result<usize> {
        let m = grid_steps(tau, self.grid_dt, "tau")?;
        if m > self.delay_steps {
            return Err(Error::HorizonTooLong {
                tau,
                delay: self.delay_steps as f64 * self.grid_dt,
            });
        }
        Ok(m)
    }

    fn window<'a>(&self, history: &'a InputHistory) -> Result<&'a [f64]> {
        if (history.grid_dt() - self.grid_dt).abs() > 1e-12 * self.grid_dt {
            return Err(Error::Config(
                "history and predictors use different grids".into(),
            ));
        }
        history.tail(self.delay_steps)
    }

    fn step_of(&self, t: f64) -> Result<usize> {
        grid_steps(t, self.grid_dt, "t")
    }

    /// `X(t + tau)` under the current mode.
    pub fn predict_short(
        &self,
        x: &Vector,
        history: &InputHistory,
        mode: usize,
        tau: f64,
    ) -> Result<Vector> {
        self.short_steps(x, self.window(history)?, mode, self.tau_steps(tau)?)
    }

    /// `P̂_target(t)`.
    pub fn predict_mode(
        &self,
        x: &Vector,
        history: &InputHistory,
        mode_now: usize,
        tau: f64,
        target: usize,
    ) -> Result<Vector> {
        self.mode_steps(
            x,
            self.window(history)?,
            mode_now,
            self.tau_steps(tau)?,
            target,
        )
    }

    /// Predictor of `U1` before the gain is applied.
    pub fn predict_average(
        &self,
        x: &Vector,
        history: &InputHistory,
        mode_now: usize,
        tau: f64,
    ) -> Result<Vector> {
        self.average_steps(x, self.window(history)?, mode_now, self.tau_steps(tau)?)
    }

    pub fn u1(
        &self,
        x: &Vector,
        history: &InputHistory,
        mode_now: usize,
        tau: f64,
        k_bar: &Matrix,
    ) -> Result<f64> {
        check_gain(k_bar, self.q)?;
        self.u1_steps(
            x,
            self.window(history)?,
            mode_now,
            self.tau_steps(tau)?,
            k_bar,
        )
    }

    pub fn u2(
        &self,
        x: &Vector,
        history: &InputHistory,
        mode_now: usize,
        tau: f64,
        gains: &[Matrix],
    ) -> Result<f64> {
        self.u2_steps(
            x,
            self.window(history)?,
            mode_now,
            self.tau_steps(tau)?,
            gains,
        )
    }

    /// Exact predictor `P(t) = X(t + D)` at time `t`.
    pub fn exact_predictor(
        &self,
        x: &Vector,
        history: &InputHistory,
        signal: &GridSignal,
        t: f64,
        tau: f64,
    ) -> Result<Vector> {
        self.exact_steps(
            x,
            self.window(history)?,
            signal,
            self.step_of(t)?,
            self.tau_steps(tau)?,
        )
    }

    pub fn u_exact(
        &self,
        x: &Vector,
        history: &InputHistory,
        signal: &GridSignal,
        t: f64,
        tau: f64,
        gains: &[Matrix],
    ) -> Result<f64> {
        self.exact_u_steps(
            x,
            self.window(history)?,
            signal,
            self.step_of(t)?,
            self.tau_steps(tau)?,
            gains,
        )
    }

    /// Backstepping residual `W(t) = U(t) - K_{σ(t+D)} P(t)`.
    pub fn residual_w(
        &self,
        u: f64,
        x: &Vector,
        history: &InputHistory,
        signal: &GridSignal,
        t: f64,
        gains: &[Matrix],
    ) -> Result<f64> {
        Ok(u - self.u_exact(x, history, signal, t, 0.0, gains)?)
    }
}

fn check_gain(k: &Matrix, q: usize) -> Result<()> {
    if k.nrows() != 1 || k.ncols() != q {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, expected 1x{q}",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

fn check_gains(gains: &[Matrix], p: usize, q: usize) -> Result<()> {
    if gains.len() != p {
        return Err(Error::Dimension(format!(
            "{} gains for {p} modes",
            gains.len()
        )));
    }
    gains.iter().try_for_each(|k| check_gain(k, q))
}
