#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchpred::switching::generate;
use switchpred::{
    mean_fallback, simulate, ControllerKind, ControllerSpec, DwellSpec, InputHistory, Matrix,
    Predictors, SimOptions, SwitchedPlantSpec, SwitchingSignal, Trajectory, Vector,
};

pub const GRID_DT: f64 = 1e-3;

/// A randomly drawn closed-loop setup.
pub struct RandomCase {
    pub plant: SwitchedPlantSpec,
    pub signal: SwitchingSignal,
    pub controller: ControllerSpec,
    pub x0: Vector,
    pub u0: f64,
    pub horizon: f64,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// `p ≤ 4` modes, `q ≤ 4` states, `D ≤ 2`, any controller.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=4);
    let q = rng.random_range(1..=4);
    let delay = rng.random_range(1..=2000) as f64 * GRID_DT;
    let a: Vec<Matrix> = (0..p).map(|_| uniform(&mut rng, q, q, 1.0)).collect();
    let b: Vec<Matrix> = (0..p).map(|_| uniform(&mut rng, q, 1, 1.0)).collect();
    let gains: Vec<Matrix> = (0..p).map(|_| uniform(&mut rng, 1, q, 1.0)).collect();
    let plant = SwitchedPlantSpec::new(a.clone(), b.clone(), delay).unwrap();

    let tau_d = rng.random_range(50..=1000) as f64 * GRID_DT;
    let tau_bar_d = tau_d + rng.random_range(0.0..2.0);
    let dwell = DwellSpec::new(tau_d, tau_bar_d).unwrap();
    let horizon = ((delay + rng.random_range(0.5..1.5)) / GRID_DT).round() * GRID_DT;
    let signal = generate(&dwell, p, horizon + delay, GRID_DT, rng.random()).unwrap();

    let kind = match rng.random_range(0..4) {
        0 => ControllerKind::AveragePredictor {
            a_bar: mean_fallback(&a).unwrap(),
            b_bar: mean_fallback(&b).unwrap(),
            k_bar: mean_fallback(&gains).unwrap(),
        },
        1 => ControllerKind::AveragingPredictors { gains },
        2 => ControllerKind::ExactOracle { gains },
        _ => ControllerKind::OpenLoop,
    };
    let controller = ControllerSpec::new(kind, rng.random_bool(0.5), tau_d);
    let x0 = Vector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
    let u0 = rng.random_range(-1.0..1.0);
    RandomCase {
        plant,
        signal,
        controller,
        x0,
        u0,
        horizon,
    }
}

pub fn run_case(case: &RandomCase) -> Trajectory {
    let u0 = case.u0;
    let opts = SimOptions::new(case.horizon, GRID_DT);
    simulate(
        &case.plant,
        &case.signal,
        &case.controller,
        &case.x0,
        &|_| u0,
        &opts,
    )
    .unwrap()
}

/// `max_t |P(t) - X(t + D)|` and `max_t |X|` along a trajectory, with `P`
/// evaluated every `stride` steps from the recorded state and inputs.
pub fn exact_identity_error(
    plant: &SwitchedPlantSpec,
    signal: &SwitchingSignal,
    traj: &Trajectory,
    stride: usize,
) -> (f64, f64) {
    let n = (plant.delay() / GRID_DT).round() as usize;
    let grid = signal.on_grid(GRID_DT).unwrap();
    let predictors = Predictors::new(plant, GRID_DT, None).unwrap();
    let max_x = traj.states.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let last = traj.len() - 1;
    let mut k = 0;
    while k + n <= last {
        let samples: Vec<f64> = (0..n)
            .map(|j| traj.input_at_cell(k as isize - n as isize + j as isize))
            .collect();
        let history = InputHistory::from_samples(GRID_DT, samples).unwrap();
        let tau = traj.taus[k].min(plant.delay());
        let p = predictors
            .exact_predictor(&traj.states[k], &history, &grid, k as f64 * GRID_DT, tau)
            .unwrap();
        worst = worst.max((p - &traj.states[k + n]).norm());
        k += stride;
    }
    (worst, max_x)
}
