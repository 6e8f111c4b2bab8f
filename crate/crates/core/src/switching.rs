//! Switching signals, dwell-time validation and generation, and the
//! prediction-horizon functions `tau0(t)` and `tau(t)`.
//!
//! Mode indices are zero-based in the API. The plain-text table format
//! labels modes from 1, matching the usual mathematical numbering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative slack used when comparing times that should sit on the grid.
const GRID_TOL: f64 = 1e-9;

/// Dwell-time bounds: every inter-switch gap lies in `[tau_d, tau_bar_d]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DwellSpec {
    pub tau_d: f64,
    pub tau_bar_d: f64,
}

impl DwellSpec {
    pub fn new(tau_d: f64, tau_bar_d: f64) -> Result<Self> {
        let spec = Self { tau_d, tau_bar_d };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tau_d > 0.0 && self.tau_d.is_finite()) {
            return Err(Error::InvalidDwell(format!(
                "tau_d = {} must be positive",
                self.tau_d
            )));
        }
        if !(self.tau_bar_d >= self.tau_d && self.tau_bar_d.is_finite()) {
            return Err(Error::InvalidDwell(format!(
                "tau_bar_d = {} must be >= tau_d = {}",
                self.tau_bar_d, self.tau_d
            )));
        }
        Ok(())
    }
}

/// Right-continuous piecewise-constant mode signal on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    switch_times: Vec<f64>,
    modes: Vec<usize>,
    p: usize,
    horizon: f64,
    causal: bool,
}

impl SwitchingSignal {
    /// `switch_times[0]` must be 0; `modes[k]` is active on
    /// `[switch_times[k], switch_times[k + 1])`.
    pub fn new(switch_times: Vec<f64>, modes: Vec<usize>, p: usize, horizon: f64) -> Result<Self> {
        if switch_times.is_empty() || switch_times.len() != modes.len() {
            return Err(Error::InvalidSignal(format!(
                "{} switch times for {} modes",
                switch_times.len(),
                modes.len()
            )));
        }
        if switch_times[0] != 0.0 {
            return Err(Error::InvalidSignal("first switch time must be 0".into()));
        }
        if p == 0 {
            return Err(Error::InvalidSignal("mode count must be positive".into()));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidSignal(format!("bad horizon {horizon}")));
        }
        for w in switch_times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidSignal(format!(
                    "switch times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = switch_times.last() {
            if last > horizon {
                return Err(Error::InvalidSignal(format!(
                    "switch at {last} beyond horizon {horizon}"
                )));
            }
        }
        if let Some(&bad) = modes.iter().find(|&&m| m >= p) {
            return Err(Error::InvalidMode { mode: bad, p });
        }
        if modes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSignal("consecutive modes must differ".into()));
        }
        Ok(Self {
            switch_times,
            modes,
            p,
            horizon,
            causal: false,
        })
    }

    /// A signal that never switches.
    pub fn constant(mode: usize, p: usize, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![mode], p, horizon)
    }

    /// Marks the signal as causal: oracle queries about its future
    /// (exact predictor, residual diagnostics) are refused afterwards.
    pub fn into_causal(mut self) -> Self {
        self.causal = true;
        self
    }

    pub fn is_causal(&self) -> bool {
        self.causal
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.p
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn interval_index(&self, t: f64) -> usize {
        self.switch_times.partition_point(|&s| s <= t) - 1
    }

    pub fn mode_at(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.modes[self.interval_index(t)])
    }

    /// Most recent switch time at or before `t`.
    pub fn tau0(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.switch_times[self.interval_index(t)])
    }

    /// Horizon over which the current mode is guaranteed constant:
    /// `max{0, min{tau0(t) + tau_d - t, D}}` when the dwell time is known,
    /// otherwise 0.
    pub fn tau(&self, t: f64, tau_d: f64, delay: f64, dwell_known: bool) -> Result<f64> {
        let t0 = self.tau0(t)?;
        if !dwell_known {
            return Ok(0.0);
        }
        Ok((t0 + tau_d - t).min(delay).max(0.0))
    }

    /// Number of switches strictly after time 0.
    pub fn switch_count(&self) -> usize {
        self.switch_times.len() - 1
    }

    /// Converts to integer grid steps; every switch time and the horizon must
    /// be multiples of `dt`.
    pub fn on_grid(&self, dt: f64) -> Result<GridSignal> {
        if !(dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        let mut switch_steps = Vec::with_capacity(self.switch_times.len());
        for &t in &self.switch_times {
            switch_steps.push(grid_steps(t, dt, "switch time")?);
        }
        let horizon_steps = (self.horizon / dt + GRID_TOL).floor() as usize;
        Ok(GridSignal {
            switch_steps,
            modes: self.modes.clone(),
            p: self.p,
            horizon_steps,
            causal: self.causal,
        })
    }

    /// Serializes as a plain-text table with one `t_k,mode` row per interval.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# horizon = {}\n# modes = {}\nt_k,mode\n",
            self.horizon, self.p
        );
        for (t, m) in self.switch_times.iter().zip(&self.modes) {
            out.push_str(&format!("{t},{}\n", m + 1));
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut p = None;
        let mut times = Vec::new();
        let mut modes = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once('=') {
                    let value = value.trim();
                    match key.trim() {
                        "horizon" => horizon = Some(parse_num::<f64>(value)?),
                        "modes" => p = Some(parse_num::<usize>(value)?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with("t_k") {
                continue;
            }
            let (t, m) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidSignal(format!("bad row '{line}'")))?;
            let m: usize = parse_num(m.trim())?;
            if m == 0 {
                return Err(Error::InvalidSignal("mode labels start at 1".into()));
            }
            times.push(parse_num::<f64>(t.trim())?);
            modes.push(m - 1);
        }
        let p = p.unwrap_or_else(|| modes.iter().max().map_or(1, |m| m + 1));
        let horizon = horizon
            .or_else(|| times.last().copied())
            .ok_or_else(|| Error::InvalidSignal("empty table".into()))?;
        Self::new(times, modes, p, horizon)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidSignal(format!("cannot parse '{s}'")))
}

/// Converts a time to an exact grid step count.
pub(crate) fn grid_steps(value: f64, dt: f64, what: &'static str) -> Result<usize> {
    let ratio = value / dt;
    let rounded = ratio.round();
    if value < 0.0 || (ratio - rounded).abs() > GRID_TOL * ratio.abs().max(1.0) {
        return Err(Error::OffGrid { what, value, dt });
    }
    Ok(rounded as usize)
}

/// A switching signal expressed in integer grid steps; this is what the
/// simulator and the predictors consume.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    switch_steps: Vec<usize>,
    modes: Vec<usize>,
    p: usize,
    horizon_steps: usize,
    causal: bool,
}

impl GridSignal {
    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn is_causal(&self) -> bool {
        self.causal
    }

    pub fn mode_count(&self) -> usize {
        self.p
    }

    fn interval_index(&self, step: usize) -> usize {
        self.switch_steps.partition_point(|&s| s <= step) - 1
    }

    pub fn mode_at_step(&self, step: usize) -> usize {
        self.modes[self.interval_index(step)]
    }

    pub fn last_switch_step(&self, step: usize) -> usize {
        self.switch_steps[self.interval_index(step)]
    }

    /// `tau(t)` in grid steps. `dwell_steps` is the minimum dwell time rounded
    /// down to the grid.
    pub fn tau_steps(
        &self,
        step: usize,
        dwell_steps: usize,
        delay_steps: usize,
        dwell_known: bool,
    ) -> usize {
        if !dwell_known {
            return 0;
        }
        let t0 = self.last_switch_step(step);
        (t0 + dwell_steps).saturating_sub(step).min(delay_steps)
    }

    /// Constant-mode segments covering steps `[from, to)`, as
    /// `(mode, start, end)` triples.
    pub fn segments(&self, from: usize, to: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        if from >= to {
            return out;
        }
        let mut idx = self.interval_index(from);
        let mut start = from;
        loop {
            let end = self
                .switch_steps
                .get(idx + 1)
                .copied()
                .unwrap_or(usize::MAX)
                .min(to);
            out.push((self.modes[idx], start, end));
            if end >= to {
                break;
            }
            start = end;
            idx += 1;
        }
        out
    }
}

/// A dwell-time violation: `index` is the interval `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellViolation {
    pub index: usize,
    pub gap: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    BelowMinimum,
    AboveMaximum,
}

/// Checks every completed inter-switch gap against the dwell bounds. The
/// final interval, truncated by the horizon, is not checked.
pub fn validate(signal: &SwitchingSignal, spec: &DwellSpec) -> Vec<DwellViolation> {
    let slack = GRID_TOL * spec.tau_bar_d.max(1.0);
    signal
        .switch_times
        .windows(2)
        .enumerate()
        .filter_map(|(index, w)| {
            let gap = w[1] - w[0];
            let kind = if gap < spec.tau_d - slack {
                ViolationKind::BelowMinimum
            } else if gap > spec.tau_bar_d + slack {
                ViolationKind::AboveMaximum
            } else {
                return None;
            };
            Some(DwellViolation { index, gap, kind })
        })
        .collect()
}

/// Draws a dwell-time-respecting signal on `[0, horizon]`.
///
/// Dwell lengths are uniform on `[tau_d, tau_bar_d]`, snapped down to the
/// grid (but never below `tau_d`); the initial mode is uniform over all
/// modes and every next mode uniform over the other `p - 1`.
pub fn generate(
    spec: &DwellSpec,
    p: usize,
    horizon: f64,
    grid_dt: f64,
    seed: u64,
) -> Result<SwitchingSignal> {
    spec.check()?;
    if !(grid_dt > 0.0) {
        return Err(Error::NonPositiveStep(grid_dt));
    }
    if p == 0 {
        return Err(Error::InvalidSignal("mode count must be positive".into()));
    }
    if spec.tau_d < 2.0 * grid_dt * (1.0 - GRID_TOL) {
        return Err(Error::InvalidDwell(format!(
            "tau_d = {} is shorter than two grid steps ({grid_dt})",
            spec.tau_d
        )));
    }
    let lo = (spec.tau_d / grid_dt - GRID_TOL).ceil() as u64;
    let hi = (spec.tau_bar_d / grid_dt + GRID_TOL).floor() as u64;
    if lo > hi {
        return Err(Error::InvalidDwell(format!(
            "no grid multiple of {grid_dt} lies in [{}, {}]",
            spec.tau_d, spec.tau_bar_d
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mode = rng.random_range(0..p);
    let mut times = vec![0.0];
    let mut modes = vec![mode];
    if p == 1 {
        return SwitchingSignal::new(times, modes, p, horizon);
    }
    let mut steps: u64 = 0;
    loop {
        let dwell = if spec.tau_bar_d > spec.tau_d {
            rng.random_range(spec.tau_d..=spec.tau_bar_d)
        } else {
            spec.tau_d
        };
        let cells = ((dwell / grid_dt + GRID_TOL).floor() as u64).clamp(lo, hi);
        steps += cells;
        let t = steps as f64 * grid_dt;
        if t > horizon {
            break;
        }
        let offset = rng.random_range(1..p);
        mode = (mode + offset) % p;
        times.push(t);
        modes.push(mode);
    }
    SwitchingSignal::new(times, modes, p, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SwitchingSignal {
        SwitchingSignal::new(vec![0.0, 1.0, 2.5], vec![0, 1, 2], 3, 5.0).unwrap()
    }

    #[test]
    fn mode_lookup_is_right_continuous() {
        let s = sample();
        assert_eq!(s.mode_at(1.7).unwrap(), 1);
        assert_eq!(s.mode_at(2.5).unwrap(), 2);
        assert_eq!(s.mode_at(0.0).unwrap(), 0);
        assert!(matches!(s.mode_at(5.1), Err(Error::TimeOutOfRange { .. })));
        assert!(s.mode_at(-0.1).is_err());
    }

    #[test]
    fn last_switch_instant() {
        let s = sample();
        assert_eq!(s.tau0(1.7).unwrap(), 1.0);
        assert_eq!(s.tau0(1.0).unwrap(), 1.0);
        assert_eq!(s.tau0(0.3).unwrap(), 0.0);
    }

    #[test]
    fn tau_sawtooth_values() {
        let s = SwitchingSignal::new(vec![0.0, 2.0], vec![0, 1], 2, 6.0).unwrap();
        assert!((s.tau(2.0, 0.9, 1.0, true).unwrap() - 0.9).abs() < 1e-15);
        assert!((s.tau(2.4, 0.9, 1.0, true).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.tau(2.9, 0.9, 1.0, true).unwrap(), 0.0);
        assert_eq!(s.tau(3.5, 0.9, 1.0, true).unwrap(), 0.0);
        assert_eq!(s.tau(2.0, 0.9, 1.0, false).unwrap(), 0.0);
        // short delay clamps the horizon
        assert!((s.tau(2.0, 0.9, 0.4, true).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_signals() {
        assert!(SwitchingSignal::new(vec![0.0, 1.0, 1.0], vec![0, 1, 0], 2, 3.0).is_err());
        assert!(SwitchingSignal::new(vec![0.5], vec![0], 1, 3.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 1.0], vec![0, 0], 2, 3.0).is_err());
        assert!(matches!(
            SwitchingSignal::new(vec![0.0, 1.0], vec![0, 4], 2, 3.0),
            Err(Error::InvalidMode { .. })
        ));
        assert!(SwitchingSignal::new(vec![0.0, 4.0], vec![0, 1], 2, 3.0).is_err());
    }

    #[test]
    fn validation() {
        let spec = DwellSpec::new(0.9, 3.0).unwrap();
        let ok = SwitchingSignal::new(vec![0.0, 1.0, 2.0], vec![0, 1, 0], 2, 2.5).unwrap();
        assert!(validate(&ok, &spec).is_empty());

        let short = SwitchingSignal::new(vec![0.0, 0.5], vec![0, 1], 2, 2.0).unwrap();
        let v = validate(&short, &spec);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 0);
        assert_eq!(v[0].kind, ViolationKind::BelowMinimum);

        let long = SwitchingSignal::new(vec![0.0, 4.0], vec![0, 1], 2, 5.0).unwrap();
        let v = validate(&long, &spec);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::AboveMaximum);
        assert!((v[0].gap - 4.0).abs() < 1e-15);
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let spec = DwellSpec::new(0.9, 3.0).unwrap();
        let a = generate(&spec, 3, 20.0, 1e-3, 42).unwrap();
        let b = generate(&spec, 3, 20.0, 1e-3, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.switch_count() >= 6);
        assert!(validate(&a, &spec).is_empty());
        a.on_grid(1e-3).unwrap();

        let c = generate(&spec, 3, 20.0, 1e-3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_mode_never_switches() {
        let spec = DwellSpec::new(0.9, 3.0).unwrap();
        let s = generate(&spec, 1, 20.0, 1e-3, 7).unwrap();
        assert_eq!(s.switch_count(), 0);
        assert_eq!(s.mode_at(19.0).unwrap(), 0);
    }

    #[test]
    fn generation_rejects_coarse_grid() {
        let spec = DwellSpec::new(0.9, 3.0).unwrap();
        assert!(matches!(
            generate(&spec, 2, 10.0, 0.5, 1),
            Err(Error::InvalidDwell(_))
        ));
        assert!(DwellSpec::new(1.0, 0.5).is_err());
        assert!(DwellSpec::new(0.0, 0.5).is_err());
    }

    #[test]
    fn table_round_trip() {
        let spec = DwellSpec::new(0.9, 3.0).unwrap();
        let s = generate(&spec, 3, 12.0, 1e-3, 5).unwrap();
        let text = s.to_table();
        assert!(text.contains("t_k,mode"));
        let back = SwitchingSignal::from_table(&text).unwrap();
        assert_eq!(s, back);
        assert!(SwitchingSignal::from_table("t_k,mode\n0,0\n").is_err());
    }

    #[test]
    fn grid_form_and_segments() {
        let g = sample().on_grid(0.5).unwrap();
        assert_eq!(g.horizon_steps(), 10);
        assert_eq!(g.mode_at_step(2), 1);
        assert_eq!(g.mode_at_step(5), 2);
        assert_eq!(g.last_switch_step(4), 2);
        assert_eq!(g.segments(1, 7), vec![(0, 1, 2), (1, 2, 5), (2, 5, 7)]);
        assert_eq!(g.segments(3, 4), vec![(1, 3, 4)]);
        assert!(g.segments(4, 4).is_empty());
        // tau in steps with dwell 2 steps and delay 3 steps
        assert_eq!(g.tau_steps(2, 2, 3, true), 2);
        assert_eq!(g.tau_steps(3, 2, 3, true), 1);
        assert_eq!(g.tau_steps(4, 2, 3, true), 0);
        assert_eq!(g.tau_steps(2, 2, 3, false), 0);
        assert!(matches!(sample().on_grid(0.3), Err(Error::OffGrid { .. })));
    }
}
