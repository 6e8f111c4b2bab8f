//! TOML scenario files.
//!
//! ```toml
//! [plant]
//! delay = 1.0
//! a = [[[1.0, 1.0], [1.0, 2.0]], [[0.97, 1.15], [1.06, 2.09]]]
//! b = [[0.0, 1.0], [0.0, 1.05]]          # one column vector per mode
//!
//! [design]
//! poles = [-2.0, -3.0]                     # a complex pole is [re, im]
//! q = [[[1.0, 0.0], [0.0, 1.0]], [[3.0, 0.0], [0.0, 3.0]]]   # optional
//! center = "chebyshev"                     # or "mean"
//! norm = "spectral"                        # or "frobenius"
//!
//! [switching]
//! tau_d = 0.9
//! tau_bar_d = 3.0
//! seed = 1                                 # or replay = "signal.txt"
//!
//! [controller]
//! kind = "u1"                              # u1 | u2 | exact | open_loop
//! dwell_known = true
//! delay = 1.0                              # optional, defaults to the plant delay
//!
//! [run]
//! x0 = [1.0, -1.0]
//! u0 = 0.0                                 # constant, or one sample per cell of [-D, 0)
//! horizon = 20.0
//! grid_dt = 0.001
//! record_residuals = false
//! output = "trajectory.csv"                # optional
//! ```

use std::path::{Path, PathBuf};

use nalgebra::Complex;
use serde::Deserialize;

use crate::design::CenterMethod;
use crate::error::{Error, Result};
use crate::numerics::{from_rows, Matrix, NormKind};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub plant: PlantSection,
    pub design: DesignSection,
    pub switching: SwitchingSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub delay: f64,
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum PoleEntry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub poles: Vec<PoleEntry>,
    pub q: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub center: CenterMethod,
    #[serde(default)]
    pub norm: NormKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSection {
    pub tau_d: f64,
    pub tau_bar_d: f64,
    #[serde(default)]
    pub seed: u64,
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    #[default]
    U1,
    U2,
    Exact,
    OpenLoop,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub kind: ControllerChoice,
    #[serde(default = "yes")]
    pub dwell_known: bool,
    pub delay: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerChoice::U1,
            dwell_known: true,
            delay: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialInput {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Default for InitialInput {
    fn default() -> Self {
        Self::Constant(0.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub u0: InitialInput,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub grid_dt: f64,
    #[serde(default)]
    pub record_residuals: bool,
    pub output: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            x0: None,
            u0: InitialInput::default(),
            horizon: default_horizon(),
            grid_dt: default_dt(),
            record_residuals: false,
            output: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_horizon() -> f64 {
    20.0
}

fn default_dt() -> f64 {
    1e-3
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(r) = cfg.switching.replay.as_mut() {
            if r.is_relative() {
                *r = base.join(&*r);
            }
        }
        Ok(cfg)
    }

    pub fn a_matrices(&self) -> Result<Vec<Matrix>> {
        self.plant.a.iter().map(|m| from_rows(m)).collect()
    }

    pub fn b_matrices(&self) -> Result<Vec<Matrix>> {
        self.plant
            .b
            .iter()
            .map(|col| {
                if col.is_empty() {
                    return Err(Error::Dimension("empty B column".into()));
                }
                Ok(Matrix::from_column_slice(col.len(), 1, col))
            })
            .collect()
    }

    pub fn q_matrices(&self) -> Result<Option<Vec<Matrix>>> {
        self.design
            .q
            .as_ref()
            .map(|qs| qs.iter().map(|m| from_rows(m)).collect())
            .transpose()
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        self.design
            .poles
            .iter()
            .map(|p| match *p {
                PoleEntry::Real(re) => Complex::new(re, 0.0),
                PoleEntry::Complex([re, im]) => Complex::new(re, im),
            })
            .collect()
    }
}
