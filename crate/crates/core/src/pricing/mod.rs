//! Worked scenarios with independent oracles: the occupied heat problem,
//! timer options, uncertain volatility and quadratic hedging with
//! transaction costs. Interest rates are zero throughout.

mod black_scholes;
mod hedging;
mod heat;
mod payoff;
mod timer;
mod uvm;

use thiserror::Error;

use crate::measure::MeasureError;
use crate::osde::OsdeError;
use crate::pde::PdeError;

pub use black_scholes::{black_scholes_call, black_scholes_delta, black_scholes_price, black_scholes_put, OptionKind};
pub use hedging::{hedging_cost_mc, hedging_model, HedgingParams, HedgingReport, TradingPolicy};
pub use heat::{ball_probability, heat_initial_point, heat_model, heat_value_closed_form, heat_value_mc, HEAT_QUAD_TOL};
pub use payoff::{CylindricalFn, PayoffSpec, ScalarFn, Underlying};
pub use timer::{price_timer_mc, timer_model, timer_vanilla_oracle, VolFn, VolModel, VolSpec};
pub use uvm::{price_uvm, uvm_model, UvmMethod, UvmParams, UvmReport};

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Osde(#[from] OsdeError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}
