//! Closed-loop runs, dwell ablation and delay-mismatch sweeps.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigFile, ControllerChoice, InitialInput};
use crate::control::{ControllerKind, ControllerSpec};
use crate::design::{synthesize, DesignResult};
use crate::error::{Error, Result};
use crate::margins::{lambda, lambda_hat, nu_constants, MarginConstants};
use crate::numerics::{Matrix, Vector};
use crate::plant::{simulate, SimOptions, SwitchedPlantSpec, Trajectory};
use crate::switching::{generate, grid_steps, DwellSpec, SwitchingSignal};

/// Terminal norm below `STABLE_FRACTION * |x0|` counts as stabilized.
pub const STABLE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub enum SignalSource {
    Seed(u64),
    Replay(SwitchingSignal),
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: SwitchedPlantSpec,
    pub design: DesignResult,
    pub dwell: DwellSpec,
    pub controller: ControllerChoice,
    pub dwell_known: bool,
    pub x0: Vector,
    pub u0: InitialInput,
    pub horizon: f64,
    pub grid_dt: f64,
    pub signal: SignalSource,
    /// Delay assumed by the controller when it differs from the plant's.
    pub controller_delay: Option<f64>,
    pub record_residuals: bool,
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let plant = SwitchedPlantSpec::new(cfg.a_matrices()?, cfg.b_matrices()?, cfg.plant.delay)?;
        let design = synthesize(
            &plant,
            &cfg.poles(),
            cfg.q_matrices()?,
            cfg.design.norm,
            cfg.design.center,
        )?;
        let dwell = DwellSpec::new(cfg.switching.tau_d, cfg.switching.tau_bar_d)?;
        let x0 = match &cfg.run.x0 {
            Some(v) => Vector::from_vec(v.clone()),
            None => {
                let mut v = Vector::zeros(plant.state_dim());
                v[0] = 1.0;
                v
            }
        };
        let signal = match &cfg.switching.replay {
            Some(path) => SignalSource::Replay(SwitchingSignal::from_table(
                &std::fs::read_to_string(path)?,
            )?),
            None => SignalSource::Seed(cfg.switching.seed),
        };
        Ok(Self {
            plant,
            design,
            dwell,
            controller: cfg.controller.kind,
            dwell_known: cfg.controller.dwell_known,
            x0,
            u0: cfg.run.u0.clone(),
            horizon: cfg.run.horizon,
            grid_dt: cfg.run.grid_dt,
            signal,
            controller_delay: cfg.controller.delay,
            record_residuals: cfg.run.record_residuals,
            output: cfg.run.output.clone(),
        })
    }

    pub fn controller_spec(&self) -> ControllerSpec {
        let d = &self.design;
        let kind = match self.controller {
            ControllerChoice::U1 => ControllerKind::AveragePredictor {
                a_bar: d.a_bar.clone(),
                b_bar: d.b_bar.clone(),
                k_bar: d.k_bar.clone(),
            },
            ControllerChoice::U2 => ControllerKind::AveragingPredictors {
                gains: d.k_list.clone(),
            },
            ControllerChoice::Exact => ControllerKind::ExactOracle {
                gains: d.k_list.clone(),
            },
            ControllerChoice::OpenLoop => ControllerKind::OpenLoop,
        };
        ControllerSpec::new(kind, self.dwell_known, self.dwell.tau_d)
    }

    /// The switching realization, covering the horizon plus the delay so
    /// oracle quantities are defined up to the end of the run.
    pub fn switching_signal(&self) -> Result<SwitchingSignal> {
        let needed = self.horizon + self.plant.delay().max(self.controller_delay.unwrap_or(0.0));
        match &self.signal {
            SignalSource::Seed(seed) => generate(
                &self.dwell,
                self.plant.mode_count(),
                needed,
                self.grid_dt,
                *seed,
            ),
            SignalSource::Replay(s) => {
                if s.horizon() + 1e-9 < needed {
                    return Err(Error::SignalTooShort {
                        horizon: s.horizon(),
                        required: needed,
                    });
                }
                Ok(s.clone())
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.signal {
            SignalSource::Seed(s) => Some(s),
            SignalSource::Replay(_) => None,
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub controller: String,
    pub dwell_known: bool,
    pub seed: Option<u64>,
    pub controller_delay: f64,
    /// `J = ∫ (|X|² + |U|²) dt` over the horizon.
    pub cost: f64,
    pub terminal_state_norm: f64,
    pub stable: bool,
    /// `max_t |W| / (λ (|X| + ∫|U|))`; recorded runs only.
    pub max_residual_bound_ratio: Option<f64>,
    /// Largest left/right ratios of the two norm-equivalence inequalities;
    /// recorded runs only.
    pub max_norm_equivalence_ratio: Option<[f64; 2]>,
    pub trajectory: Option<String>,
}

fn initial_input(
    u0: &InitialInput,
    delay: f64,
    dt: f64,
) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    match u0 {
        InitialInput::Constant(c) => {
            let c = *c;
            Ok(Box::new(move |_| c))
        }
        InitialInput::Samples(s) => {
            let n = grid_steps(delay, dt, "delay")?;
            if s.len() != n {
                return Err(Error::Config(format!(
                    "u0 needs {n} samples over [-D, 0), got {}",
                    s.len()
                )));
            }
            let s = s.clone();
            Ok(Box::new(move |t| {
                let j = ((t + delay) / dt + 1e-9).floor().max(0.0) as usize;
                s[j.min(s.len() - 1)]
            }))
        }
    }
}

/// Closed-loop run with diagnostics. The trajectory is returned alongside
/// the summary and written as CSV when the scenario names an output.
pub fn run(scenario: &Scenario) -> Result<(RunSummary, Trajectory)> {
    let signal = scenario.switching_signal()?;
    run_with_signal(scenario, &signal)
}

pub fn run_with_signal(
    scenario: &Scenario,
    signal: &SwitchingSignal,
) -> Result<(RunSummary, Trajectory)> {
    let plant = &scenario.plant;
    let controller = scenario.controller_spec();
    let u0 = initial_input(&scenario.u0, plant.delay(), scenario.grid_dt)?;
    let mut opts = SimOptions::new(scenario.horizon, scenario.grid_dt);
    opts.controller_delay = scenario.controller_delay;
    if scenario.record_residuals {
        opts.residual_gains = Some(scenario.design.k_list.clone());
    }
    let traj = simulate(plant, signal, &controller, &scenario.x0, &*u0, &opts)?;

    let (residual_ratio, equivalence) = if scenario.record_residuals {
        let consts = MarginConstants::from_design(plant, &scenario.design)?;
        let ratio = match scenario.controller {
            ControllerChoice::U1 => Some(residual_bound_ratio(&traj, |tau| {
                lambda(scenario.design.eps, tau, &consts)
            })?),
            ControllerChoice::U2 => Some(residual_bound_ratio(&traj, |tau| {
                lambda_hat(scenario.design.eps_bar, tau, &consts)
            })?),
            ControllerChoice::Exact => Some(residual_bound_ratio(&traj, |_| Ok(0.0))?),
            ControllerChoice::OpenLoop => None,
        };
        let (nu1, nu2) = nu_constants(&consts);
        let eq = norm_equivalence_ratios(&traj, signal, &scenario.design.k_list, nu1, nu2)?;
        (ratio, Some(eq))
    } else {
        (None, None)
    };

    if let Some(path) = &scenario.output {
        let file = std::fs::File::create(path)?;
        traj.write_csv(std::io::BufWriter::new(file))?;
    }

    let x0_norm = scenario.x0.norm();
    let terminal = traj.terminal_state_norm();
    let summary = RunSummary {
        controller: controller.kind.label().to_string(),
        dwell_known: scenario.dwell_known,
        seed: scenario.seed(),
        controller_delay: scenario.controller_delay.unwrap_or(plant.delay()),
        cost: traj.cost(),
        terminal_state_norm: terminal,
        stable: terminal.is_finite() && terminal <= STABLE_FRACTION * x0_norm,
        max_residual_bound_ratio: residual_ratio,
        max_norm_equivalence_ratio: equivalence,
        trajectory: scenario.output.as_ref().map(|p| p.display().to_string()),
    };
    Ok((summary, traj))
}

/// `∫_{t-D}^{t} |U|` on the grid, for every recorded instant.
fn input_window_l1(traj: &Trajectory) -> Vec<f64> {
    let n = traj.initial_inputs.len() as isize;
    let dt = traj.grid_dt;
    let mut acc: f64 = traj.initial_inputs.iter().map(|u| u.abs()).sum();
    let mut out = Vec::with_capacity(traj.len());
    for k in 0..traj.len() as isize {
        out.push(acc * dt);
        acc += traj.input_at_cell(k).abs() - traj.input_at_cell(k - n).abs();
    }
    out
}

/// Largest `|W| / (λ(τ) (|X| + ∫|U|))` along a run with recorded residuals.
/// Instants where both sides vanish are skipped.
pub fn residual_bound_ratio(traj: &Trajectory, gain: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let w = traj
        .residuals
        .as_ref()
        .ok_or_else(|| Error::Config("run did not record residuals".into()))?;
    let l1 = input_window_l1(traj);
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() {
        let bound = gain(traj.taus[k].min(traj.delay))? * (traj.states[k].norm() + l1[k]);
        let r = w[k].abs();
        if r == 0.0 {
            continue;
        }
        worst = worst.max(if bound > 0.0 {
            r / bound
        } else {
            f64::INFINITY
        });
    }
    Ok(worst)
}

/// Largest ratios of the two norm-equivalence inequalities between
/// `|X|² + ∫U²` and `|X|² + ∫W²` over `[t - D, t]`.
///
/// On the initial interval the residual is `U(θ) - K_{σ(θ+D)} X(θ+D)`.
pub fn norm_equivalence_ratios(
    traj: &Trajectory,
    signal: &SwitchingSignal,
    gains: &[Matrix],
    nu1: f64,
    nu2: f64,
) -> Result<[f64; 2]> {
    let w = traj
        .residuals
        .as_ref()
        .ok_or_else(|| Error::Config("run did not record residuals".into()))?;
    let n = traj.initial_inputs.len();
    if traj.len() < n {
        return Err(Error::Config("run shorter than one delay".into()));
    }
    let dt = traj.grid_dt;
    let grid = signal.on_grid(dt)?;
    let w_initial: Vec<f64> = (0..n)
        .map(|j| traj.initial_inputs[j] - (&gains[grid.mode_at_step(j)] * &traj.states[j])[0])
        .collect();
    let w_at = |cell: isize| {
        if cell < 0 {
            w_initial[(n as isize + cell) as usize]
        } else {
            w[cell as usize]
        }
    };

    let mut u2: f64 = traj.initial_inputs.iter().map(|u| u * u).sum();
    let mut w2: f64 = w_initial.iter().map(|v| v * v).sum();
    let mut worst = [0.0_f64; 2];
    for k in 0..traj.len() as isize {
        let x2 = traj.states[k as usize].norm_squared();
        let xu = x2 + u2 * dt;
        let xw = x2 + w2 * dt;
        if xu > 0.0 && xw > 0.0 {
            worst[0] = worst[0].max(xu / (nu1 * xw));
            worst[1] = worst[1].max(xw / (nu2 * xu));
        }
        let u_new = traj.input_at_cell(k);
        let u_old = traj.input_at_cell(k - n as isize);
        u2 += u_new * u_new - u_old * u_old;
        let (w_new, w_old) = (w_at(k), w_at(k - n as isize));
        w2 += w_new * w_new - w_old * w_old;
    }
    Ok(worst)
}

/// Runs the scenario with and without dwell-time knowledge on the same
/// switching realization.
pub fn ablate_dwell(scenario: &Scenario) -> Result<(RunSummary, RunSummary)> {
    if !matches!(
        scenario.controller,
        ControllerChoice::U1 | ControllerChoice::U2
    ) {
        return Err(Error::Config(
            "dwell ablation needs controller u1 or u2".into(),
        ));
    }
    let signal = scenario.switching_signal()?;
    let mut with = scenario.clone();
    with.dwell_known = true;
    with.output = None;
    let mut without = with.clone();
    without.dwell_known = false;
    let (a, b) = rayon::join(
        || run_with_signal(&with, &signal),
        || run_with_signal(&without, &signal),
    );
    Ok((a?.0, b?.0))
}

/// One entry of a delay-mismatch sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Delay used by the controller after snapping to the grid.
    pub controller_delay: f64,
    /// Snapped minus requested delay.
    pub snap_error: f64,
    pub summary: RunSummary,
}

/// Controller delay `D (1 + δ)` snapped to the grid.
pub fn snapped_delay(delay: f64, delta: f64, dt: f64) -> (f64, f64) {
    let requested = delay * (1.0 + delta);
    let snapped = (requested / dt).round().max(1.0) * dt;
    (snapped, snapped - requested)
}

/// Runs the scenario once per relative delay perturbation, in parallel.
pub fn mismatch_sweep(scenario: &Scenario, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    if deltas.iter().any(|d| !(d.is_finite() && *d > -1.0)) {
        return Err(Error::Config(
            "perturbations must be finite and above -1".into(),
        ));
    }
    let signal = scenario.switching_signal_for_sweep(deltas)?;
    deltas
        .par_iter()
        .map(|&delta| {
            let (delay, snap) = snapped_delay(scenario.plant.delay(), delta, scenario.grid_dt);
            let mut s = scenario.clone();
            s.controller_delay = Some(delay);
            s.output = None;
            let (summary, _) = run_with_signal(&s, &signal)?;
            Ok(SweepRow {
                delta,
                controller_delay: delay,
                snap_error: snap,
                summary,
            })
        })
        .collect()
}

impl Scenario {
    fn switching_signal_for_sweep(&self, deltas: &[f64]) -> Result<SwitchingSignal> {
        let largest = deltas
            .iter()
            .map(|&d| snapped_delay(self.plant.delay(), d, self.grid_dt).0)
            .fold(self.plant.delay(), f64::max);
        let mut probe = self.clone();
        probe.controller_delay = Some(largest);
        probe.switching_signal()
    }
}
