//! Closed-form stability margins: mismatch gains, norm-equivalence
//! constants, admissible mismatch, dwell-time threshold and decay rates.
//!
//! The bounds are conservative by many orders of magnitude; they are
//! diagnostics and never gate a simulation.

use serde::{Deserialize, Serialize};

use crate::design::DesignResult;
use crate::error::{Error, Result};
use crate::numerics::{induced_norm, symmetric_eigen_range, NormKind};
use crate::plant::SwitchedPlantSpec;

const INVERSE_UPPER: f64 = 1e3;
const INVERSE_ITERS: usize = 200;
const SIMPSON_NODES: usize = 1001;

/// Per-mode certificate data entering the rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCertificate {
    pub lambda_min_q: f64,
    pub lambda_min_s: f64,
    pub lambda_max_s: f64,
    /// `‖S_i B_i‖`.
    pub sb_norm: f64,
}

impl ModeCertificate {
    /// `b_i = 2 ‖S_i B_i‖² / λmin(Q_i)`.
    pub fn b(&self) -> f64 {
        2.0 * self.sb_norm * self.sb_norm / self.lambda_min_q
    }
}

/// Norm maxima over the mode families, the delay, and certificate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginConstants {
    pub m_a: f64,
    pub m_b: f64,
    pub m_k: f64,
    pub m_h: f64,
    /// `max{‖Ā‖, M_A}`.
    pub mbar_a: f64,
    /// `max{‖B̄‖, M_B}`.
    pub mbar_b: f64,
    pub delay: f64,
    pub norm_kind: NormKind,
    pub certificates: Vec<ModeCertificate>,
}

impl MarginConstants {
    pub fn from_design(plant: &SwitchedPlantSpec, design: &DesignResult) -> Result<Self> {
        let p = plant.mode_count();
        if design.mode_count() != p {
            return Err(Error::Dimension(format!(
                "design has {} modes, plant has {p}",
                design.mode_count()
            )));
        }
        let kind = design.norm_kind;
        let max_norm = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0_f64, f64::max);
        let m_a = max_norm(&mut plant.a_list().iter().map(|m| induced_norm(m, kind)));
        let m_b = max_norm(&mut plant.b_list().iter().map(|m| induced_norm(m, kind)));
        let m_k = max_norm(&mut design.k_list.iter().map(|m| induced_norm(m, kind)));
        let m_h = max_norm(&mut (0..p).map(|i| induced_norm(&design.closed_loop(plant, i), kind)));
        let certificates = (0..p)
            .map(|i| {
                let (q_min, _) = symmetric_eigen_range(&design.q_list[i]);
                let (s_min, s_max) = symmetric_eigen_range(&design.s_list[i]);
                ModeCertificate {
                    lambda_min_q: q_min,
                    lambda_min_s: s_min,
                    lambda_max_s: s_max,
                    sb_norm: induced_norm(&(&design.s_list[i] * plant.b(i)), kind),
                }
            })
            .collect();
        Ok(Self {
            m_a,
            m_b,
            m_k,
            m_h,
            mbar_a: m_a.max(induced_norm(&design.a_bar, kind)),
            mbar_b: m_b.max(induced_norm(&design.b_bar, kind)),
            delay: plant.delay(),
            norm_kind: kind,
            certificates,
        })
    }
}

fn mismatch_gain(eps: f64, tau: f64, d: f64, m_a: f64, m_b: f64, m_k: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::Config(format!(
            "mismatch must be nonnegative, got {eps}"
        )));
    }
    if !(0.0..=d).contains(&tau) {
        return Err(Error::HorizonTooLong { tau, delay: d });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let rest = d - tau;
    let delta1 = m_b.max(1.0) * (m_k * rest + 1.0);
    let delta2 = 2.0 * m_k * m_b * rest + eps + m_k + m_b;
    Ok(eps * ((m_a + eps) * d).exp() * delta1.max(delta2))
}

/// Mismatch gain of the average-predictor law.
pub fn lambda(eps: f64, tau: f64, c: &MarginConstants) -> Result<f64> {
    mismatch_gain(eps, tau, c.delay, c.mbar_a, c.mbar_b, c.m_k)
}

/// Mismatch gain of the averaging-predictors law.
pub fn lambda_hat(eps_bar: f64, tau: f64, c: &MarginConstants) -> Result<f64> {
    mismatch_gain(eps_bar, tau, c.delay, c.m_a, c.m_b, c.m_k)
}

/// Norm-equivalence constants `(ν₁, ν₂)` between `(X, U)` and `(X, W)`.
pub fn nu_constants(c: &MarginConstants) -> (f64, f64) {
    let d = c.delay;
    let k2 = c.m_k * c.m_k;
    let nu = |m: f64| {
        let e = (2.0 * m * d).exp();
        (4.0 * k2 * d * e + 1.0).max(4.0 * k2 * d * d * e * c.m_b * c.m_b + 2.0)
    };
    (nu(c.m_h), nu(c.m_a))
}

/// Inverse of a continuous increasing gain by bisection on `[0, 1e3]`.
fn invert(gain: impl Fn(f64) -> f64, target: f64) -> f64 {
    if !(target > 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, INVERSE_UPPER);
    if gain(hi) < target {
        return hi;
    }
    for _ in 0..INVERSE_ITERS {
        let mid = 0.5 * (lo + hi);
        if gain(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn admissible(c: &MarginConstants, gain: impl Fn(f64) -> f64) -> f64 {
    let (nu1, _) = nu_constants(c);
    let d = c.delay;
    let scale = 2.0 * d.exp() * d;
    let first = invert(&gain, 1.0 / (scale * nu1).sqrt());
    let ratio = c
        .certificates
        .iter()
        .filter(|m| m.sb_norm > 0.0)
        .map(|m| m.lambda_min_q / m.sb_norm)
        .fold(f64::INFINITY, f64::min);
    if ratio.is_finite() {
        first.min(invert(&gain, ratio / (scale * (nu1 + 1.0)).sqrt()))
    } else {
        first
    }
}

/// Largest mismatch `ε*` covered by the stability bound of the
/// average-predictor law.
pub fn eps_star(c: &MarginConstants) -> f64 {
    admissible(c, |e| lambda(e, 0.0, c).unwrap_or(f64::INFINITY))
}

/// Counterpart of [`eps_star`] for the averaging-predictors law.
pub fn eps_bar_star(c: &MarginConstants) -> f64 {
    admissible(c, |e| lambda_hat(e, 0.0, c).unwrap_or(f64::INFINITY))
}

/// Pointwise decay rate of mode `mode`'s functional given the mismatch gain
/// value `lam`.
pub fn rate_from_gain(c: &MarginConstants, mode: usize, lam: f64, nu1: f64) -> f64 {
    let d = c.delay;
    let m = &c.certificates[mode];
    let l2 = lam * lam;
    let first = 1.0 - 2.0 * d.exp() * l2 * d * nu1;
    let second =
        (0.5 * m.lambda_min_q - 2.0 * m.b() * d.exp() * l2 * (d * nu1 + 1.0)) / m.lambda_max_s;
    first.min(second)
}

/// `a_i(τ)` at mismatch `eps`; `averaging` selects the `λ̂` gain.
pub fn rate_function(
    c: &MarginConstants,
    mode: usize,
    eps: f64,
    tau: f64,
    averaging: bool,
) -> Result<f64> {
    if mode >= c.certificates.len() {
        return Err(Error::InvalidMode {
            mode,
            p: c.certificates.len(),
        });
    }
    let lam = if averaging {
        lambda_hat(eps, tau, c)?
    } else {
        lambda(eps, tau, c)?
    };
    Ok(rate_from_gain(c, mode, lam, nu_constants(c).0))
}

/// Mismatch levels at which the rate bounds are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub eps: f64,
    pub eps_bar: f64,
}

impl Mismatch {
    /// The design's own `ε`, `ε̄`.
    pub fn actual(design: &DesignResult) -> Self {
        Self {
            eps: design.eps,
            eps_bar: design.eps_bar,
        }
    }

    /// The zero-mismatch limit.
    pub fn zero() -> Self {
        Self {
            eps: 0.0,
            eps_bar: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub norm: NormKind,
    pub eps_used: f64,
    pub eps_bar_used: f64,
    pub tau_d: f64,
    pub tau_bar_d: f64,
}

/// Every margin quantity for one design. Rate-derived quantities are `None`
/// when the corresponding pipeline is infeasible (non-positive `β`) or
/// overflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub eps: f64,
    pub eps_bar: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub eps_star: f64,
    pub eps_bar_star: f64,
    pub mu: f64,
    pub rho: f64,
    pub beta: Option<f64>,
    pub beta_bar: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub tau_d_star: Option<f64>,
    pub tau_bar_d_star: Option<f64>,
    pub xi: Option<f64>,
    pub xi_bar: Option<f64>,
    pub feasible: bool,
    pub feasible_bar: bool,
    pub assumptions: Assumptions,
}

struct Rates {
    beta: Option<f64>,
    alpha: Option<f64>,
    tau_d_star: Option<f64>,
    xi: Option<f64>,
    feasible: bool,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let intervals = SIMPSON_NODES - 1;
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

fn rates(
    c: &MarginConstants,
    gain: impl Fn(f64) -> f64,
    mu: f64,
    nu1: f64,
    tau_d: f64,
    tau_bar_d: f64,
) -> Rates {
    let p = c.certificates.len();
    let lam0 = gain(0.0);
    let beta = (0..p)
        .map(|i| rate_from_gain(c, i, lam0, nu1))
        .fold(f64::INFINITY, f64::min);
    if !beta.is_finite() {
        return Rates {
            beta: None,
            alpha: None,
            tau_d_star: None,
            xi: None,
            feasible: false,
        };
    }
    if beta <= 0.0 {
        return Rates {
            beta: Some(beta),
            alpha: None,
            tau_d_star: None,
            xi: None,
            feasible: false,
        };
    }
    let d = c.delay;
    let alpha = (0..p)
        .map(|i| {
            simpson(
                |u| rate_from_gain(c, i, gain((tau_d - u).clamp(0.0, d)), nu1) - beta,
                0.0,
                tau_d,
            )
        })
        .fold(f64::INFINITY, f64::min);
    let ln_mu = mu.ln();
    Rates {
        beta: Some(beta),
        alpha: Some(alpha),
        tau_d_star: Some(ln_mu / beta),
        xi: Some(0.5 * (beta - ln_mu / tau_d + alpha / tau_bar_d)),
        feasible: true,
    }
}

/// Evaluates the full margin pipeline at the mismatch levels `used`.
pub fn rate_pipeline(
    design: &DesignResult,
    c: &MarginConstants,
    used: Mismatch,
    tau_d: f64,
    tau_bar_d: f64,
) -> Result<MarginReport> {
    if !(tau_d > 0.0 && tau_bar_d >= tau_d) {
        return Err(Error::InvalidDwell(format!(
            "need 0 < tau_d <= tau_bar_d, got {tau_d}, {tau_bar_d}"
        )));
    }
    if !(used.eps >= 0.0 && used.eps_bar >= 0.0) {
        return Err(Error::Config("mismatch levels must be nonnegative".into()));
    }
    let (nu1, nu2) = nu_constants(c);
    let d = c.delay;
    let kappa1 = c
        .certificates
        .iter()
        .map(|m| m.lambda_min_s.min(m.b()))
        .fold(f64::INFINITY, f64::min);
    let kappa2 = c
        .certificates
        .iter()
        .map(|m| m.lambda_max_s.max(m.b() * d.exp()))
        .fold(0.0, f64::max);
    let mu = kappa2 / kappa1;

    let plain = rates(
        c,
        |t| lambda(used.eps, t, c).unwrap_or(f64::INFINITY),
        mu,
        nu1,
        tau_d,
        tau_bar_d,
    );
    let barred = rates(
        c,
        |t| lambda_hat(used.eps_bar, t, c).unwrap_or(f64::INFINITY),
        mu,
        nu1,
        tau_d,
        tau_bar_d,
    );

    Ok(MarginReport {
        eps: design.eps,
        eps_bar: design.eps_bar,
        nu1,
        nu2,
        eps_star: eps_star(c),
        eps_bar_star: eps_bar_star(c),
        mu,
        rho: (2.0 * mu * nu1 * nu2).sqrt(),
        beta: plain.beta,
        beta_bar: barred.beta,
        alpha: plain.alpha,
        alpha_bar: barred.alpha,
        tau_d_star: plain.tau_d_star,
        tau_bar_d_star: barred.tau_d_star,
        xi: plain.xi,
        xi_bar: barred.xi,
        feasible: plain.feasible,
        feasible_bar: barred.feasible,
        assumptions: Assumptions {
            norm: c.norm_kind,
            eps_used: used.eps,
            eps_bar_used: used.eps_bar,
            tau_d,
            tau_bar_d,
        },
    })
}

impl MarginReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("infeasible".to_string(), |x| format!("{x:.6e}"));
        let a = &self.assumptions;
        let mut out = format!(
            "assumptions: norm = {}, eps_used = {:e}, eps_bar_used = {:e}, tau_d = {}, tau_bar_d = {}\n",
            a.norm, a.eps_used, a.eps_bar_used, a.tau_d, a.tau_bar_d
        );
        let rows: [(&str, String); 18] = [
            ("eps", format!("{:.6}", self.eps)),
            ("eps_bar", format!("{:.6}", self.eps_bar)),
            ("nu1", format!("{:.6e}", self.nu1)),
            ("nu2", format!("{:.6e}", self.nu2)),
            ("eps_star", format!("{:.6e}", self.eps_star)),
            ("eps_bar_star", format!("{:.6e}", self.eps_bar_star)),
            ("mu", format!("{:.6}", self.mu)),
            ("rho", format!("{:.6e}", self.rho)),
            ("beta", opt(self.beta)),
            ("beta_bar", opt(self.beta_bar)),
            ("alpha", opt(self.alpha)),
            ("alpha_bar", opt(self.alpha_bar)),
            ("tau_d_star", opt(self.tau_d_star)),
            ("tau_bar_d_star", opt(self.tau_bar_d_star)),
            ("xi", opt(self.xi)),
            ("xi_bar", opt(self.xi_bar)),
            ("feasible", self.feasible.to_string()),
            ("feasible_bar", self.feasible_bar.to_string()),
        ];
        for (k, v) in rows {
            out.push_str(&format!("{k:>15} = {v}\n"));
        }
        out
    }
}
