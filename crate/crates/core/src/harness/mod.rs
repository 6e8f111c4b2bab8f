//! Scenario files, closed-loop runs with diagnostics, ablations, sweeps and
//! the reference-example reproduction behind the command-line tool.

pub mod config;
pub mod reference;
pub mod scenario;

pub use config::{ConfigFile, ControllerChoice, InitialInput};
pub use scenario::{
    ablate_dwell, mismatch_sweep, run, run_with_signal, RunSummary, Scenario, SignalSource,
    SweepRow,
};
