//! Predictor-based feedback for linear switched systems with a long,
//! constant input delay and dwell-time constrained switching.
//!
//! The crate covers the full pipeline: numerical kernels, switching
//! signals, the delayed plant and its simulator, the predictor feedback
//! laws, gain and certificate synthesis, closed-form stability margins and
//! a scenario harness behind the `switchpred` command-line tool.
//!
//! Modes are indexed from 0 in the API; text and CSV outputs label them
//! from 1.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod design;
pub mod error;
pub mod harness;
pub mod margins;
pub mod numerics;
pub mod plant;
pub mod switching;

pub use control::{ControllerKind, ControllerSpec, Predictors};
pub use design::{chebyshev_center, mean_fallback, synthesize, CenterMethod, DesignResult};
pub use error::{Error, Result};
pub use margins::{MarginConstants, MarginReport, Mismatch};
pub use numerics::{Matrix, NormKind, Vector};
pub use plant::{simulate, InputHistory, SimOptions, SwitchedPlantSpec, Trajectory};
pub use switching::{DwellSpec, GridSignal, SwitchingSignal};
