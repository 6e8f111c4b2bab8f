mod common;

use common::{exact_identity_error, random_case, run_case, GRID_DT};
use nalgebra::{dmatrix, dvector};
use switchpred::numerics::{expm, zoh_discretize};
use switchpred::switching::generate;
use switchpred::{
    simulate, ControllerKind, ControllerSpec, DwellSpec, Matrix, SimOptions, SwitchedPlantSpec,
    SwitchingSignal,
};

#[test]
fn exact_predictor_tracks_future_state() {
    for seed in 100..106 {
        let case = random_case(seed);
        let traj = run_case(&case);
        let (err, max_x) = exact_identity_error(&case.plant, &case.signal, &traj, 53);
        assert!(
            err <= 1e-6 * (1.0 + max_x),
            "seed {seed}: {err:e} vs {max_x:e}"
        );
    }
}

#[test]
fn open_loop_matches_closed_form() {
    let a = dmatrix![0.2, 1.0; -1.0, -0.3];
    let b = dmatrix![0.0; 1.0];
    let delay = 0.5;
    let c = 0.7;
    let plant = SwitchedPlantSpec::new(vec![a.clone()], vec![b.clone()], delay).unwrap();
    let signal = SwitchingSignal::constant(0, 1, 3.0).unwrap();
    let spec = ControllerSpec::new(ControllerKind::OpenLoop, false, 0.1);
    let x0 = dvector![1.0, -0.5];
    let traj = simulate(
        &plant,
        &signal,
        &spec,
        &x0,
        &|_| c,
        &SimOptions::new(2.0, GRID_DT),
    )
    .unwrap();

    // The held initial input acts on [0, D), nothing afterwards.
    let n = a.nrows();
    let forced = |t: f64| {
        let mut aug = Matrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&a);
        aug.view_mut((0, n), (n, 1)).copy_from(&b);
        let e = expm(&(aug * t)).unwrap();
        e.view((0, 0), (n, n)) * &x0 + e.view((0, n), (n, 1)) * c
    };
    let at_delay = forced(delay);
    for (k, x) in traj.states.iter().enumerate().step_by(97) {
        let t = k as f64 * GRID_DT;
        let want = if t <= delay {
            forced(t)
        } else {
            expm(&(&a * (t - delay))).unwrap() * &at_delay
        };
        assert!((x - want).amax() < 1e-10, "t = {t}");
    }
}

#[test]
fn single_mode_laws_coincide() {
    let a = dmatrix![1.0, 1.0; 1.0, 2.0];
    let b = dmatrix![0.0; 1.0];
    let k = dmatrix![-13.0, -8.0];
    let plant = SwitchedPlantSpec::new(vec![a.clone(), a.clone()], vec![b.clone(), b.clone()], 1.0)
        .unwrap();
    let signal = generate(&DwellSpec::new(0.9, 3.0).unwrap(), 2, 5.0, GRID_DT, 4).unwrap();
    let x0 = dvector![1.0, -1.0];
    let opts = SimOptions::new(4.0, GRID_DT);
    let run = |kind: ControllerKind, dwell: bool| {
        let spec = ControllerSpec::new(kind, dwell, 0.9);
        simulate(&plant, &signal, &spec, &x0, &|_| 0.0, &opts).unwrap()
    };
    let reference = run(
        ControllerKind::ExactOracle {
            gains: vec![k.clone(), k.clone()],
        },
        true,
    );
    for dwell in [true, false] {
        let u1 = run(
            ControllerKind::AveragePredictor {
                a_bar: a.clone(),
                b_bar: b.clone(),
                k_bar: k.clone(),
            },
            dwell,
        );
        let u2 = run(
            ControllerKind::AveragingPredictors {
                gains: vec![k.clone(), k.clone()],
            },
            dwell,
        );
        for (r, (p, q)) in reference
            .inputs
            .iter()
            .zip(u1.inputs.iter().zip(&u2.inputs))
        {
            assert!((r - p).abs() < 1e-9 * (1.0 + r.abs()));
            assert!((r - q).abs() < 1e-9 * (1.0 + r.abs()));
        }
    }
    // After D the sampled state follows the delay-free sampled closed loop.
    let (ad, bd) = zoh_discretize(&a, &b, GRID_DT).unwrap();
    let step = ad + bd * &k;
    let mut x = reference.states[1000].clone();
    for k in 1000..reference.len() - 1 {
        x = &step * x;
        assert!((&reference.states[k + 1] - &x).amax() < 1e-9 * (1.0 + x.amax()));
    }
}

#[test]
fn exact_feedback_has_zero_residual() {
    let case = random_case(7);
    let mut opts = SimOptions::new(case.horizon, GRID_DT);
    let gains: Vec<Matrix> = (0..case.plant.mode_count())
        .map(|_| Matrix::from_element(1, case.plant.state_dim(), -0.5))
        .collect();
    opts.residual_gains = Some(gains.clone());
    let spec = ControllerSpec::new(ControllerKind::ExactOracle { gains }, true, 0.5);
    let u0 = case.u0;
    let traj = simulate(&case.plant, &case.signal, &spec, &case.x0, &|_| u0, &opts).unwrap();
    let w = traj.residuals.unwrap();
    let worst = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = traj.inputs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-9 * scale, "{worst:e}");
}
