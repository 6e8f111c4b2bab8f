//! Gain and certificate synthesis, representative matrices and mismatch
//! radii.
//!
//! The representative matrix of a family `{Y_i}` is its Chebyshev center:
//! the minimizer of `max_i ‖Ȳ - Y_i‖`. The objective is convex but not
//! smooth, and it is flat along directions that do not change the active
//! deviations, so plain subgradient steps stall well short of tight
//! tolerances. The center is found with the central-cut ellipsoid method,
//! which carries its own optimality certificate.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    induced_norm, is_hurwitz, is_positive_definite, pole_place, rows_list_serde, rows_serde,
    solve_lyapunov, top_singular_pair, Matrix, NormKind, Vector,
};
use crate::plant::SwitchedPlantSpec;

/// Optimality gap at which the center search stops.
const CENTER_GAP: f64 = 1e-12;
/// Largest gap accepted when the iteration cap is reached.
const CENTER_TOL: f64 = 1e-6;
const CENTER_MAX_ITER: usize = 100_000;

/// How the representative matrices are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterMethod {
    #[default]
    Chebyshev,
    Mean,
}

fn check_family(ys: &[Matrix]) -> Result<(usize, usize)> {
    let first = ys.first().ok_or(Error::EmptyFamily)?;
    let shape = first.shape();
    if let Some(bad) = ys.iter().find(|y| y.shape() != shape) {
        return Err(Error::Dimension(format!(
            "family mixes {}x{} and {}x{} matrices",
            shape.0,
            shape.1,
            bad.nrows(),
            bad.ncols()
        )));
    }
    Ok(shape)
}

/// Element-wise mean of the family.
pub fn mean_fallback(ys: &[Matrix]) -> Result<Matrix> {
    let (r, c) = check_family(ys)?;
    let sum = ys.iter().fold(Matrix::zeros(r, c), |acc, y| acc + y);
    Ok(sum / ys.len() as f64)
}

/// `max_i ‖center - Y_i‖`.
pub fn family_radius(center: &Matrix, ys: &[Matrix], kind: NormKind) -> f64 {
    ys.iter()
        .map(|y| induced_norm(&(center - y), kind))
        .fold(0.0, f64::max)
}

/// Largest pairwise distance within the family.
pub fn family_diameter(ys: &[Matrix], kind: NormKind) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            d = d.max(induced_norm(&(&ys[i] - &ys[j]), kind));
        }
    }
    d
}

/// Objective value and a subgradient at `y` (flattened column-major).
fn objective(y: &Matrix, ys: &[Matrix], kind: NormKind) -> (f64, Vector) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, yi) in ys.iter().enumerate() {
        let v = induced_norm(&(y - yi), kind);
        if v > best.0 {
            best = (v, i);
        }
    }
    let dev = y - &ys[best.1];
    let grad = if best.0 == 0.0 {
        Matrix::zeros(y.nrows(), y.ncols())
    } else {
        match kind {
            NormKind::Spectral => {
                let (u, v) = top_singular_pair(&dev);
                u * v.transpose()
            }
            NormKind::Frobenius => dev / best.0,
        }
    };
    (best.0, Vector::from_column_slice(grad.as_slice()))
}

/// Central-cut ellipsoid `{x : ‖L⁻¹(x - c)‖ ≤ 1}` kept in factored form
/// `P = L Lᵀ`, so it stays positive semidefinite in floating point.
struct Ellipsoid {
    c: Vector,
    l: Matrix,
    expand: f64,
    shrink: f64,
}

impl Ellipsoid {
    fn ball(c: Vector, radius: f64) -> Self {
        let d = c.len() as f64;
        let expand = d / (d * d - 1.0).sqrt();
        let l = Matrix::identity(c.len(), c.len()) * radius;
        Self {
            c,
            l,
            expand,
            shrink: d / (d + 1.0) - expand,
        }
    }

    /// Half-width `max_{x ∈ E} gᵀ(x - c)`.
    fn width(&self, g: &Vector) -> f64 {
        (self.l.transpose() * g).norm()
    }

    /// Keep the half `gᵀ(x - c) ≤ 0`.
    fn cut(&mut self, g: &Vector) {
        let lg = self.l.transpose() * g;
        let dir = &lg / lg.norm();
        let ld = &self.l * &dir;
        let d = self.c.len() as f64;
        self.c -= &ld / (d + 1.0);
        self.l = &self.l * self.expand + (ld * dir.transpose()) * self.shrink;
    }
}

/// Chebyshev center of a family of equally shaped matrices and its radius.
///
/// One matrix is its own center; for two the midpoint is returned. The
/// minimizer is often not unique (spectral-norm balls have flat faces), so
/// among the optimal centers the one closest to the element-wise mean in
/// the Frobenius norm is returned. The radius never exceeds the radius at
/// the mean.
pub fn chebyshev_center(ys: &[Matrix], kind: NormKind) -> Result<(Matrix, f64)> {
    let (r, c) = check_family(ys)?;
    if ys.iter().any(|y| y.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite);
    }
    match ys.len() {
        1 => return Ok((ys[0].clone(), 0.0)),
        2 => {
            let mid = (&ys[0] + &ys[1]) * 0.5;
            let radius = family_radius(&mid, ys, kind);
            return Ok((mid, radius));
        }
        _ => {}
    }
    let mean = mean_fallback(ys)?;
    let start_radius = family_radius(&mean, ys, kind);
    if start_radius == 0.0 {
        return Ok((mean, 0.0));
    }
    if r * c == 1 {
        let lo = ys.iter().map(|y| y[(0, 0)]).fold(f64::INFINITY, f64::min);
        let hi = ys
            .iter()
            .map(|y| y[(0, 0)])
            .fold(f64::NEG_INFINITY, f64::max);
        let center = Matrix::from_element(1, 1, 0.5 * (lo + hi));
        return Ok((center, 0.5 * (hi - lo)));
    }

    // Any center is within the optimal radius of the mean in the chosen
    // norm; this Frobenius ball contains that set for both norms.
    let ball = 2.0 * (r.min(c) as f64).sqrt() * start_radius + 1e-12;
    let flat_mean = Vector::from_column_slice(mean.as_slice());
    let as_matrix = |x: &Vector| Matrix::from_column_slice(r, c, x.as_slice());

    let mut e = Ellipsoid::ball(flat_mean.clone(), ball);
    let mut best = (start_radius, flat_mean.clone());
    let mut lower = 0.0_f64;
    for _ in 0..CENTER_MAX_ITER {
        let (f, g) = objective(&as_matrix(&e.c), ys, kind);
        if f < best.0 {
            best = (f, e.c.clone());
        }
        let width = e.width(&g);
        if !(width > 0.0) {
            break;
        }
        lower = lower.max(f - width);
        if best.0 - lower <= CENTER_GAP * (1.0 + best.0) {
            break;
        }
        e.cut(&g);
    }
    let gap = best.0 - lower;
    if gap > CENTER_TOL {
        return Err(Error::CenterNoConvergence { gap });
    }

    // Tie-break: closest point to the mean among the near-optimal centers.
    let level = best.0 + CENTER_GAP * (1.0 + best.0);
    if start_radius <= level {
        return Ok((mean, start_radius));
    }
    let mut pick = (&best.1 - &flat_mean).norm();
    let mut chosen = best.1;
    let mut floor = 0.0_f64;
    let mut e = Ellipsoid::ball(flat_mean.clone(), ball);
    for _ in 0..CENTER_MAX_ITER {
        let (f, g) = objective(&as_matrix(&e.c), ys, kind);
        let offset = &e.c - &flat_mean;
        let dist = offset.norm();
        let g = if f > level {
            if f - e.width(&g) > level {
                break;
            }
            g
        } else {
            if dist < pick {
                pick = dist;
                chosen = e.c.clone();
            }
            let g = offset / dist;
            floor = floor.max(dist - e.width(&g));
            g
        };
        if pick - floor <= CENTER_GAP * (1.0 + pick) || !(e.width(&g) > 0.0) {
            break;
        }
        e.cut(&g);
    }
    let center = as_matrix(&chosen);
    let radius = family_radius(&center, ys, kind);
    Ok((center, radius))
}

fn center_of(ys: &[Matrix], kind: NormKind, method: CenterMethod) -> Result<(Matrix, f64)> {
    match method {
        CenterMethod::Chebyshev => chebyshev_center(ys, kind),
        CenterMethod::Mean => {
            let m = mean_fallback(ys)?;
            let radius = family_radius(&m, ys, kind);
            Ok((m, radius))
        }
    }
}

/// Gains, certificates, representative matrices and mismatch radii for a
/// switched plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    #[serde(with = "rows_list_serde")]
    pub k_list: Vec<Matrix>,
    #[serde(with = "rows_list_serde")]
    pub s_list: Vec<Matrix>,
    #[serde(with = "rows_list_serde")]
    pub q_list: Vec<Matrix>,
    #[serde(with = "rows_serde")]
    pub a_bar: Matrix,
    #[serde(with = "rows_serde")]
    pub b_bar: Matrix,
    #[serde(with = "rows_serde")]
    pub k_bar: Matrix,
    /// Center radii of the A, B and K families.
    pub radii: [f64; 3],
    /// `max_i {‖A_i - Ā‖, ‖B_i - B̄‖, ‖K_i - K̄‖}`.
    pub eps: f64,
    /// Largest pairwise distance over the three families.
    pub eps_bar: f64,
    pub norm_kind: NormKind,
    pub center: CenterMethod,
}

impl DesignResult {
    pub fn mode_count(&self) -> usize {
        self.k_list.len()
    }

    /// `H_i = A_i + B_i K_i`.
    pub fn closed_loop(&self, plant: &SwitchedPlantSpec, mode: usize) -> Matrix {
        plant.a(mode) + plant.b(mode) * &self.k_list[mode]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Plain-text report; modes are labelled from 1.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let fmt = |m: &Matrix| {
            let rows: Vec<String> = m
                .row_iter()
                .map(|r| {
                    let cells: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
                    format!("[{}]", cells.join(", "))
                })
                .collect();
            format!("[{}]", rows.join(", "))
        };
        out.push_str(
            &format!("norm: {}\ncenter: {:?}\n", self.norm_kind, self.center).to_lowercase(),
        );
        for i in 0..self.mode_count() {
            out.push_str(&format!("mode {}\n", i + 1));
            out.push_str(&format!("  K = {}\n", fmt(&self.k_list[i])));
            out.push_str(&format!("  S = {}\n", fmt(&self.s_list[i])));
            out.push_str(&format!("  Q = {}\n", fmt(&self.q_list[i])));
        }
        out.push_str(&format!("A_bar = {}\n", fmt(&self.a_bar)));
        out.push_str(&format!("B_bar = {}\n", fmt(&self.b_bar)));
        out.push_str(&format!("K_bar = {}\n", fmt(&self.k_bar)));
        out.push_str(&format!(
            "radii (A, B, K) = ({:.6}, {:.6}, {:.6})\neps = {:.6}\neps_bar = {:.6}\n",
            self.radii[0], self.radii[1], self.radii[2], self.eps, self.eps_bar
        ));
        out
    }
}

/// Pole placement per mode, Lyapunov certificates and representative
/// matrices. `q_list` defaults to identities.
pub fn synthesize(
    plant: &SwitchedPlantSpec,
    poles: &[Complex<f64>],
    q_list: Option<Vec<Matrix>>,
    kind: NormKind,
    method: CenterMethod,
) -> Result<DesignResult> {
    let n = plant.state_dim();
    let p = plant.mode_count();
    let q_list = q_list.unwrap_or_else(|| vec![Matrix::identity(n, n); p]);
    if q_list.len() != p {
        return Err(Error::Dimension(format!(
            "{} Q matrices for {p} modes",
            q_list.len()
        )));
    }
    let mut k_list = Vec::with_capacity(p);
    let mut s_list = Vec::with_capacity(p);
    for i in 0..p {
        let k = pole_place(plant.a(i), plant.b(i), poles)?;
        let h = plant.a(i) + plant.b(i) * &k;
        let (stable, abscissa) = is_hurwitz(&h)?;
        if !stable {
            return Err(Error::NotHurwitz(abscissa));
        }
        if q_list[i].shape() != (n, n) || !is_positive_definite(&q_list[i]) {
            return Err(Error::NotPositiveDefinite);
        }
        s_list.push(solve_lyapunov(&h, &q_list[i])?);
        k_list.push(k);
    }

    let (a_bar, ra) = center_of(plant.a_list(), kind, method)?;
    let (b_bar, rb) = center_of(plant.b_list(), kind, method)?;
    let (k_bar, rk) = center_of(&k_list, kind, method)?;
    let eps = ra.max(rb).max(rk);
    let eps_bar = family_diameter(plant.a_list(), kind)
        .max(family_diameter(plant.b_list(), kind))
        .max(family_diameter(&k_list, kind));

    Ok(DesignResult {
        k_list,
        s_list,
        q_list,
        a_bar,
        b_bar,
        k_bar,
        radii: [ra, rb, rk],
        eps,
        eps_bar,
        norm_kind: kind,
        center: method,
    })
}
