//! Acceptance suite for the three-mode reference example and the general
//! predictor identities. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{dmatrix, Complex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchpred::design::family_radius;
use switchpred::harness::reference::{self, SeedRuns};
use switchpred::harness::{mismatch_sweep, ControllerChoice};
use switchpred::margins::{eps_star, rate_pipeline};
use switchpred::numerics::{expm, induced_norm, pole_place};
use switchpred::{DesignResult, MarginConstants, Matrix, Mismatch, NormKind};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const X0_NORM: f64 = std::f64::consts::SQRT_2;

// Published figures for the reference example.
const K_BAR: [f64; 2] = [-11.7782, -7.7318];
const EPS: f64 = 1.2509;
const EPS_BAR: f64 = 2.5018;
const EPS_STAR: f64 = 1.9687e-11;
const TAU_D_STAR: f64 = 21.002;
/// u1, u1 without dwell, u2, u2 without dwell, exact.
const COSTS: [f64; 5] = [368.0, 834.0, 383.0, 781.0, 232.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax()
}

fn design() -> DesignResult {
    reference::design().expect("reference design")
}

fn gains() -> Outcome {
    let p = reference::plant();
    let poles = [Complex::new(-2.0, 0.0), Complex::new(-3.0, 0.0)];
    let k1 = pole_place(p.a(0), p.b(0), &poles).unwrap();
    let k2 = pole_place(p.a(1), p.b(1), &poles).unwrap();
    let k3 = pole_place(p.a(2), p.b(2), &poles).unwrap();
    let e1 = max_abs(&k1, &dmatrix![-13.0, -8.0]);
    let e2 = max_abs(&k2, &dmatrix![-10.7742, -7.6762]);
    let e3 = max_abs(&k3, &dmatrix![-10.5564, -7.4636]);
    outcome(
        e1 <= 1e-9 && e2 <= 1e-3 && e3 <= 1e-3,
        format!("K1 err {e1:.1e}, K2 err {e2:.1e}, K3 err {e3:.1e}"),
    )
}

fn certificate() -> Outcome {
    let d = design();
    let p = reference::plant();
    let s1 = &d.s_list[0];
    let err = max_abs(s1, &dmatrix![3.1, 0.3; 0.3, 0.1333]);
    let h = d.closed_loop(&p, 0);
    let residual = (h.transpose() * s1 + s1 * &h + &d.q_list[0]).amax();
    outcome(
        err <= 1e-3 && residual <= 1e-9,
        format!("S1 err {err:.1e}, residual {residual:.1e}"),
    )
}

fn centers() -> Outcome {
    let d = design();
    let p = reference::plant();
    let published_a_bar = dmatrix![1.0280, 1.1077; 1.0837, 2.0562];
    let k_err = max_abs(&d.k_bar, &Matrix::from_row_slice(1, 2, &K_BAR));
    let b_err = max_abs(&d.b_bar, &dmatrix![0.0; 1.05]);
    let r_published = family_radius(&published_a_bar, p.a_list(), NormKind::Spectral);
    let r_ours = family_radius(&d.a_bar, p.a_list(), NormKind::Spectral);
    let a_err = max_abs(&d.a_bar, &published_a_bar);
    let pass = k_err <= 1e-3
        && b_err <= 1e-6
        && (d.eps - EPS).abs() <= 1e-3
        && (d.eps_bar - EPS_BAR).abs() <= 1e-3
        && r_ours <= r_published + 1e-3
        && a_err <= 1e-2;
    outcome(
        pass,
        format!(
            "K_bar err {k_err:.1e}, B_bar err {b_err:.1e}, eps {:.4}, eps_bar {:.4}, A_bar radius {r_ours:.6} vs {r_published:.6}, entries err {a_err:.1e}",
            d.eps, d.eps_bar
        ),
    )
}

fn margins() -> Outcome {
    let d = design();
    let c = MarginConstants::from_design(&reference::plant(), &d).unwrap();
    let es = eps_star(&c);
    let zero = rate_pipeline(&d, &c, Mismatch::zero(), 0.9, 3.0).unwrap();
    let actual = rate_pipeline(&d, &c, Mismatch::actual(&d), 0.9, 3.0).unwrap();
    let within = |v: f64, want: f64| v / want <= 2.0 && want / v <= 2.0;
    let tds = zero.tau_d_star.unwrap_or(f64::NAN);
    outcome(
        within(es, EPS_STAR) && within(tds, TAU_D_STAR) && !actual.feasible,
        format!(
            "eps_star {es:.4e}, tau_d_star {tds:.3} (zero mismatch), actual mismatch feasible = {}",
            actual.feasible
        ),
    )
}

fn exact_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let case = common::random_case(seed);
        let traj = common::run_case(&case);
        let (err, max_x) = common::exact_identity_error(&case.plant, &case.signal, &traj, 1);
        worst = worst.max(err / (1.0 + max_x));
    }
    outcome(
        worst <= 1e-6,
        format!("50 scenarios, worst relative error {worst:.2e}"),
    )
}

fn residual_bound(runs: &[SeedRuns]) -> Outcome {
    let worst = runs
        .iter()
        .flat_map(|s| s.runs[..4].iter())
        .map(|r| r.max_residual_bound_ratio.expect("recorded"))
        .fold(0.0, f64::max);
    outcome(
        worst <= 1.0,
        format!("max |W| / bound over u1 and u2 runs = {worst:.3e}"),
    )
}

fn expm_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let s1 = rng.random_range(0.01..3.0);
        let s2 = rng.random_range(0.001..3.0);
        let y1 = Matrix::from_fn(n, n, |_, _| rng.random_range(-s1..s1));
        let y2 = Matrix::from_fn(n, n, |_, _| rng.random_range(-s2..s2));
        let norm = |m: &Matrix| induced_norm(m, NormKind::Spectral);
        let lhs = norm(&(expm(&(&y1 + &y2)).unwrap() - expm(&y1).unwrap()));
        let rhs = norm(&y2) * norm(&y1).exp() * norm(&y2).exp();
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("1000 pairs, {violations} violations"),
    )
}

fn stabilization(runs: &[SeedRuns]) -> Outcome {
    let mut detail = Vec::new();
    let mut stable_all = true;
    let (mut ordering, mut ablate_u1, mut ablate_u2) = (0, 0, 0);
    let mut worst_factor: f64 = 1.0;
    for s in runs {
        let terminal: Vec<f64> = [0, 2, 4]
            .iter()
            .map(|&i| s.runs[i].terminal_state_norm)
            .collect();
        let ok = terminal.iter().all(|&t| t <= 1e-3 * X0_NORM);
        stable_all &= ok;
        if !ok {
            detail.push(format!(
                "seed {} |X(20)| u1 {:.2e} u2 {:.2e} exact {:.2e}",
                s.seed, terminal[0], terminal[1], terminal[2]
            ));
        }
        let j: Vec<f64> = s.runs.iter().map(|r| r.cost).collect();
        ordering += usize::from(j[4] < j[0].min(j[2]));
        ablate_u1 += usize::from(j[1] > j[0]);
        ablate_u2 += usize::from(j[3] > j[2]);
        for (got, want) in j.iter().zip(COSTS) {
            worst_factor = worst_factor.max(got / want).max(want / got);
        }
    }
    let pass =
        stable_all && ordering >= 4 && ablate_u1 >= 4 && ablate_u2 >= 4 && worst_factor <= 3.0;
    detail.push(format!(
        "ordering {ordering}/5, u1 ablation {ablate_u1}/5, u2 ablation {ablate_u2}/5, worst cost factor {worst_factor:.2}"
    ));
    outcome(pass, detail.join("; "))
}

fn delay_mismatch() -> Outcome {
    let d = design();
    let magnitudes: Vec<f64> = (1..=10).map(|i| i as f64 / 100.0).collect();
    let deltas: Vec<f64> = magnitudes.iter().flat_map(|&m| [-m, m]).collect();
    let mut onset = f64::INFINITY;
    let mut five_ok = true;
    for choice in [ControllerChoice::U1, ControllerChoice::U2] {
        for seed in SEEDS {
            let mut sc = reference::scenario(&d, choice, true, seed);
            sc.record_residuals = false;
            for row in mismatch_sweep(&sc, &deltas).unwrap() {
                let stable = row.summary.stable && row.summary.cost.is_finite();
                if !stable {
                    onset = onset.min(row.delta.abs());
                    if row.delta.abs() <= 0.05 + 1e-12 {
                        five_ok = false;
                    }
                }
            }
        }
    }
    let pass = five_ok && (0.05..=0.10).contains(&onset);
    let onset_text = if onset.is_finite() {
        format!("{onset:.2}")
    } else {
        "none up to 0.10".into()
    };
    outcome(
        pass,
        format!(
            "stable at +-5% on all seeds: {five_ok}; first instability at |delta| = {onset_text}"
        ),
    )
}

fn norm_equivalence(runs: &[SeedRuns]) -> Outcome {
    let worst = runs
        .iter()
        .flat_map(|s| s.runs.iter())
        .map(|r| {
            let [a, b] = r.max_norm_equivalence_ratio.expect("recorded");
            a.max(b)
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 1.0,
        format!("max ratio over 25 runs = {worst:.3e}"),
    )
}

/// `shared` is time already spent on runs this criterion consumes.
fn report(
    id: usize,
    name: &str,
    limit: Duration,
    shared: Duration,
    f: impl FnOnce() -> Outcome,
) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed() + shared;
    let pass = o.pass && elapsed <= limit;
    println!(
        "{} criterion {id} ({name}): {} [{:.1} s, limit {} s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let none = Duration::ZERO;
    let mut results = vec![
        report(1, "gain synthesis", secs(1), none, gains),
        report(2, "Lyapunov certificate", secs(1), none, certificate),
        report(3, "representative matrices", secs(10), none, centers),
        report(4, "margin pipeline", secs(5), none, margins),
        report(
            5,
            "exact predictor identity",
            secs(120),
            none,
            exact_identity,
        ),
    ];

    let start = Instant::now();
    let d = design();
    let runs: Vec<SeedRuns> = SEEDS
        .iter()
        .map(|&s| reference::run_seed(&d, s).unwrap())
        .collect();
    let shared = start.elapsed();
    results.push(report(6, "residual bound", secs(30), shared, || {
        residual_bound(&runs)
    }));
    results.push(report(
        7,
        "matrix exponential inequality",
        secs(10),
        none,
        expm_inequality,
    ));
    results.push(report(
        8,
        "closed-loop stabilization",
        secs(120),
        shared,
        || stabilization(&runs),
    ));
    results.push(report(9, "delay mismatch", secs(300), none, delay_mismatch));
    results.push(report(10, "norm equivalence", secs(120), shared, || {
        norm_equivalence(&runs)
    }));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
