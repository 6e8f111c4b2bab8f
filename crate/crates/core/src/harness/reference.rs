//! Reference three-mode example: synthesis checks against published values,
//! margin checks and the five-controller cost comparison.

use nalgebra::{dmatrix, Complex};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ControllerChoice, InitialInput};
use super::scenario::{run_with_signal, RunSummary, Scenario, SignalSource};
use crate::design::{family_radius, synthesize, CenterMethod, DesignResult};
use crate::error::Result;
use crate::margins::{rate_pipeline, MarginConstants, MarginReport, Mismatch};
use crate::numerics::{Matrix, NormKind, Vector};
use crate::plant::SwitchedPlantSpec;
use crate::switching::DwellSpec;

pub const DELAY: f64 = 1.0;
pub const TAU_D: f64 = 0.9;
pub const TAU_BAR_D: f64 = 3.0;
pub const HORIZON: f64 = 20.0;
pub const GRID_DT: f64 = 1e-3;

pub fn plant() -> SwitchedPlantSpec {
    SwitchedPlantSpec::new(
        vec![
            dmatrix![1.0, 1.0; 1.0, 2.0],
            dmatrix![0.97, 1.15; 1.06, 2.09],
            dmatrix![1.08, 1.2; 1.14, 2.13],
        ],
        vec![dmatrix![0.0; 1.0], dmatrix![0.0; 1.05], dmatrix![0.0; 1.1]],
        DELAY,
    )
    .expect("reference plant is valid")
}

pub fn poles() -> Vec<Complex<f64>> {
    vec![Complex::new(-2.0, 0.0), Complex::new(-3.0, 0.0)]
}

pub fn q_list() -> Vec<Matrix> {
    [1.0, 3.0, 2.0]
        .iter()
        .map(|s| Matrix::identity(2, 2) * *s)
        .collect()
}

pub fn design() -> Result<DesignResult> {
    synthesize(
        &plant(),
        &poles(),
        Some(q_list()),
        NormKind::Spectral,
        CenterMethod::Chebyshev,
    )
}

/// Published values for the reference example.
pub mod published {
    use nalgebra::dmatrix;

    use crate::numerics::Matrix;

    pub fn gains() -> [Matrix; 3] {
        [
            dmatrix![-13.0, -8.0],
            dmatrix![-10.7742, -7.6762],
            dmatrix![-10.5564, -7.4636],
        ]
    }

    pub fn certificates() -> [Matrix; 3] {
        [
            dmatrix![3.1, 0.3; 0.3, 0.1333],
            dmatrix![9.168, 1.0113; 1.0113, 0.4255],
            dmatrix![6.0907, 0.6302; 0.6302, 0.2742],
        ]
    }

    pub fn a_bar() -> Matrix {
        dmatrix![1.0280, 1.1077; 1.0837, 2.0562]
    }

    pub fn b_bar() -> Matrix {
        dmatrix![0.0; 1.05]
    }

    pub fn k_bar() -> Matrix {
        dmatrix![-11.7782, -7.7318]
    }

    pub const EPS: f64 = 1.2509;
    pub const EPS_BAR: f64 = 2.5018;
    pub const EPS_STAR: f64 = 1.9687e-11;
    pub const TAU_D_STAR: f64 = 21.002;

    /// Costs for u1, u1 without dwell knowledge, u2, u2 without dwell
    /// knowledge and the exact oracle.
    pub const COSTS: [f64; 5] = [368.0, 834.0, 383.0, 781.0, 232.0];
}

/// The five controller variants compared on each realization.
pub const VARIANTS: [(ControllerChoice, bool, &str); 5] = [
    (ControllerChoice::U1, true, "u1"),
    (ControllerChoice::U1, false, "u1_no_dwell"),
    (ControllerChoice::U2, true, "u2"),
    (ControllerChoice::U2, false, "u2_no_dwell"),
    (ControllerChoice::Exact, true, "exact"),
];

pub fn scenario(
    design: &DesignResult,
    choice: ControllerChoice,
    dwell_known: bool,
    seed: u64,
) -> Scenario {
    Scenario {
        plant: plant(),
        design: design.clone(),
        dwell: DwellSpec::new(TAU_D, TAU_BAR_D).expect("valid dwell"),
        controller: choice,
        dwell_known,
        x0: Vector::from_vec(vec![1.0, -1.0]),
        u0: InitialInput::Constant(0.0),
        horizon: HORIZON,
        grid_dt: GRID_DT,
        signal: SignalSource::Seed(seed),
        controller_delay: None,
        record_residuals: true,
        output: None,
    }
}

/// One named pass/fail check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            pass,
        }
    }
}

fn close(name: &str, got: &Matrix, want: &Matrix, tol: f64) -> Check {
    let err = (got - want).amax();
    Check::new(
        name,
        err <= tol,
        format!("max abs error {err:.3e} (tolerance {tol:e})"),
    )
}

fn scalar(name: &str, got: f64, want: f64, tol: f64) -> Check {
    let err = (got - want).abs();
    Check::new(
        name,
        err <= tol,
        format!("{got:.6} vs {want} (tolerance {tol:e})"),
    )
}

fn within_factor(name: &str, got: Option<f64>, want: f64, factor: f64) -> Check {
    match got {
        Some(v) if v > 0.0 => {
            let r = v / want;
            Check::new(
                name,
                r <= factor && r >= 1.0 / factor,
                format!("{v:.4e} vs {want:e} (ratio {r:.3})"),
            )
        }
        other => Check::new(name, false, format!("{other:?} vs {want:e}")),
    }
}

/// Synthesis checks against the published gains, certificates, centers and
/// radii.
pub fn design_checks(d: &DesignResult) -> Vec<Check> {
    let p = plant();
    let gains = published::gains();
    let certs = published::certificates();
    let mut out = vec![close("K1", &d.k_list[0], &gains[0], 1e-9)];
    out.push(close("K2", &d.k_list[1], &gains[1], 1e-3));
    out.push(close("K3", &d.k_list[2], &gains[2], 1e-3));
    // The published S2 and S3 do not solve the Lyapunov equation for the
    // stated Q2 and Q3, so only S1 is compared entry by entry.
    out.push(close("S1", &d.s_list[0], &certs[0], 1e-3));
    for i in 0..3 {
        let h = d.closed_loop(&p, i);
        let residual = (h.transpose() * &d.s_list[i] + &d.s_list[i] * &h + &d.q_list[i]).amax();
        out.push(Check::new(
            format!("S{} residual", i + 1),
            residual <= 1e-9,
            format!("{residual:.3e} (tolerance 1e-9)"),
        ));
    }
    out.push(close("K_bar", &d.k_bar, &published::k_bar(), 1e-3));
    out.push(close("B_bar", &d.b_bar, &published::b_bar(), 1e-6));
    let r_pub = family_radius(&published::a_bar(), p.a_list(), d.norm_kind);
    let r_got = d.radii[0];
    out.push(Check::new(
        "A_bar radius",
        r_got <= r_pub + 1e-3,
        format!("{r_got:.6} vs {r_pub:.6} at the published center"),
    ));
    out.push(close("A_bar entries", &d.a_bar, &published::a_bar(), 1e-2));
    out.push(scalar("eps", d.eps, published::EPS, 1e-3));
    out.push(scalar("eps_bar", d.eps_bar, published::EPS_BAR, 1e-3));
    out
}

/// Margin checks: `ε*` and the zero-mismatch `τ_d*` within a factor of two
/// of the published values, and infeasibility at the actual mismatch.
pub fn margin_checks(d: &DesignResult) -> Result<(Vec<Check>, MarginReport, MarginReport)> {
    let consts = MarginConstants::from_design(&plant(), d)?;
    let zero = rate_pipeline(d, &consts, Mismatch::zero(), TAU_D, TAU_BAR_D)?;
    let actual = rate_pipeline(d, &consts, Mismatch::actual(d), TAU_D, TAU_BAR_D)?;
    let checks = vec![
        within_factor("eps_star", Some(zero.eps_star), published::EPS_STAR, 2.0),
        within_factor(
            "eps_bar_star",
            Some(zero.eps_bar_star),
            published::EPS_STAR,
            2.0,
        ),
        within_factor(
            "tau_d_star (zero mismatch)",
            zero.tau_d_star,
            published::TAU_D_STAR,
            2.0,
        ),
        within_factor(
            "tau_bar_d_star (zero mismatch)",
            zero.tau_bar_d_star,
            published::TAU_D_STAR,
            2.0,
        ),
        Check::new(
            "actual mismatch infeasible",
            !actual.feasible && !actual.feasible_bar,
            format!("beta = {:?}, beta_bar = {:?}", actual.beta, actual.beta_bar),
        ),
    ];
    Ok((checks, zero, actual))
}

/// Costs and diagnostics of the five variants on one seed.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRuns {
    pub seed: u64,
    pub switches: usize,
    pub runs: Vec<RunSummary>,
}

impl SeedRuns {
    pub fn cost(&self, idx: usize) -> f64 {
        self.runs[idx].cost
    }
}

pub fn run_seed(d: &DesignResult, seed: u64) -> Result<SeedRuns> {
    let base = scenario(d, ControllerChoice::U1, true, seed);
    let signal = base.switching_signal()?;
    let runs = VARIANTS
        .par_iter()
        .map(|&(choice, dwell, _)| {
            let s = scenario(d, choice, dwell, seed);
            run_with_signal(&s, &signal).map(|(summary, _)| summary)
        })
        .collect::<Result<Vec<_>>>()?;
    let switches = signal
        .switch_times()
        .iter()
        .filter(|&&t| t > 0.0 && t <= HORIZON)
        .count();
    Ok(SeedRuns {
        seed,
        switches,
        runs,
    })
}

/// Closed-loop checks over all seeds.
pub fn closed_loop_checks(seeds: &[SeedRuns]) -> Vec<Check> {
    let n = seeds.len();
    let need = if n >= 5 { n - 1 } else { n };
    let count = |f: &dyn Fn(&SeedRuns) -> bool| seeds.iter().filter(|s| f(s)).count();

    let stable = count(&|s| [0, 2, 4].iter().all(|&i| s.runs[i].stable));
    let ordering = count(&|s| s.cost(4) < s.cost(0).min(s.cost(2)));
    let ablation_u1 = count(&|s| s.cost(1) > s.cost(0));
    let ablation_u2 = count(&|s| s.cost(3) > s.cost(2));
    let mut magnitude = Vec::new();
    for s in seeds {
        for (i, (_, _, label)) in VARIANTS.iter().enumerate() {
            let r = s.cost(i) / published::COSTS[i];
            if !(1.0 / 3.0..=3.0).contains(&r) {
                magnitude.push(format!("seed {} {label}: {:.1}", s.seed, s.cost(i)));
            }
        }
    }
    let residual_worst = seeds
        .iter()
        .flat_map(|s| s.runs.iter().filter_map(|r| r.max_residual_bound_ratio))
        .fold(0.0_f64, f64::max);
    let equivalence_worst = seeds
        .iter()
        .flat_map(|s| s.runs.iter().filter_map(|r| r.max_norm_equivalence_ratio))
        .fold(0.0_f64, |m, [a, b]| m.max(a).max(b));

    vec![
        Check::new(
            "u1, u2, exact stabilize",
            stable == n,
            format!("{stable}/{n} seeds"),
        ),
        Check::new(
            "exact cheapest",
            ordering >= need,
            format!("{ordering}/{n} seeds (need {need})"),
        ),
        Check::new(
            "u1 dwell ablation costlier",
            ablation_u1 >= need,
            format!("{ablation_u1}/{n} seeds (need {need})"),
        ),
        Check::new(
            "u2 dwell ablation costlier",
            ablation_u2 >= need,
            format!("{ablation_u2}/{n} seeds (need {need})"),
        ),
        Check::new(
            "costs within 3x of published",
            magnitude.is_empty(),
            if magnitude.is_empty() {
                "all runs".to_string()
            } else {
                magnitude.join("; ")
            },
        ),
        Check::new(
            "residual bound holds",
            residual_worst <= 1.0 + 1e-6,
            format!("max |W| / bound = {residual_worst:.3e}"),
        ),
        Check::new(
            "norm equivalence holds",
            equivalence_worst <= 1.0 + 1e-9,
            format!("max ratio = {equivalence_worst:.3e}"),
        ),
    ]
}

/// Full reproduction output.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceReport {
    pub design: DesignResult,
    pub margins_zero_mismatch: MarginReport,
    pub margins_actual_mismatch: MarginReport,
    pub seeds: Vec<SeedRuns>,
    pub checks: Vec<Check>,
}

impl ReferenceReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn text(&self) -> String {
        let mut out = String::from("design\n");
        out.push_str(&self.design.report());
        out.push_str("\nmargins at zero mismatch\n");
        out.push_str(&self.margins_zero_mismatch.text());
        out.push_str("\nmargins at the design mismatch\n");
        out.push_str(&self.margins_actual_mismatch.text());
        out.push_str("\ncosts J over [0, 20]\n");
        out.push_str(&format!("{:>6} {:>9}", "seed", "switches"));
        for (_, _, label) in VARIANTS {
            out.push_str(&format!(" {label:>12}"));
        }
        out.push('\n');
        for s in &self.seeds {
            out.push_str(&format!("{:>6} {:>9}", s.seed, s.switches));
            for r in &s.runs {
                out.push_str(&format!(" {:>12.1}", r.cost));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:>6} {:>9}", "ref", ""));
        for c in published::COSTS {
            out.push_str(&format!(" {c:>12.1}"));
        }
        out.push_str("\n\nchecks\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out
    }
}

/// Synthesis, margins and the multi-seed cost comparison. Check failures
/// are reported, not raised.
pub fn reproduce(seeds: usize) -> Result<ReferenceReport> {
    let d = design()?;
    let mut checks = design_checks(&d);
    let (margin, zero, actual) = margin_checks(&d)?;
    checks.extend(margin);
    let runs = (1..=seeds as u64)
        .into_par_iter()
        .map(|seed| run_seed(&d, seed))
        .collect::<Result<Vec<_>>>()?;
    checks.extend(closed_loop_checks(&runs));
    Ok(ReferenceReport {
        design: d,
        margins_zero_mismatch: zero,
        margins_actual_mismatch: actual,
        seeds: runs,
        checks,
    })
}
