//! Euler-Maruyama simulation of the controlled occupied SDE
//!
//! ```text
//! dO_t = lambda(O_t, X_t, a_t) delta_{X_t} dt
//! dX_t = b(O_t, X_t, a_t) dt + sigma(O_t, X_t, a_t) dW_t
//! ```
//!
//! stopped when the clock `Lambda_t = |O_t|` reaches the mass budget `T`.
//! One particle is deposited per step at the left endpoint, with weight
//! `lambda dt`. The step that would overshoot the budget is shortened so
//! that `Lambda_tau = T`.

mod batch;
mod model;
mod path;

pub use batch::{batch, batch_map, write_summary_csv, PathSummary};
pub use model::{
    Clock, Coefficients, Control, ControlPolicy, ControlSet, DiffusionFn, DriftFn, FeedbackFn, OsdeModel,
    RateFn, RunningCostFn, SpatialFn, StateView, TerminalCostFn,
};
pub use path::{simulate, simulate_coupled, simulate_with, SimOptions, SimPath, StopRule};

use thiserror::Error;

use crate::measure::MeasureError;

#[derive(Debug, Error)]
pub enum OsdeError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time step {0} must be positive and finite")]
    InvalidStep(f64),
    #[error("initial mass {mass} exceeds the budget {horizon}")]
    InitialMassExceedsBudget { mass: f64, horizon: f64 },
    #[error("clock rate {rate} below the ellipticity floor {floor} at step {step} (t = {t})")]
    Ellipticity { step: usize, t: f64, rate: f64, floor: f64 },
    #[error("non-finite state at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },
    #[error("control {control} outside the control set at step {step}")]
    ControlOutsideSet { step: usize, control: f64 },
    #[error("budget not reached after {steps} steps (t = {t})")]
    NoExit { steps: usize, t: f64 },
    #[error("path {index}: {source}")]
    Path {
        index: u64,
        #[source]
        source: Box<OsdeError>,
    },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}
