use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{value_over_policies, Sense};
use crate::measure::ParabolicPoint;
use crate::osde::{ControlPolicy, ControlSet, OsdeModel, StateView};
use crate::pde::{check_margin, solve_bsb, Axis, BsbSense, Grid2D, TimeAxis};

use super::payoff::PayoffSpec;
use super::PricingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UvmMethod {
    /// Black-Scholes-Barenblatt finite differences.
    Pde,
    /// Best constant volatility on a grid, by Monte Carlo.
    McBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvmParams {
    pub spot: f64,
    pub horizon: f64,
    pub sense: BsbSense,
    /// Upper end of the price grid; at least four standard deviations above
    /// the spot.
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Constant volatilities tried by the Monte Carlo bound, endpoints
    /// included.
    pub n_controls: usize,
}

impl Default for UvmParams {
    fn default() -> Self {
        Self {
            spot: 100.0,
            horizon: 0.25,
            sense: BsbSense::Seller,
            x_max: 250.0,
            nx: 400,
            nt: 4000,
            dt: 1.0 / 256.0,
            n_paths: 20_000,
            seed: 0,
            n_controls: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvmReport {
    pub method: UvmMethod,
    pub sense: BsbSense,
    pub band: (f64, f64),
    pub price: f64,
    /// Monte Carlo standard error; `None` for the PDE.
    pub stderr: Option<f64>,
    pub cfl_ratio: Option<f64>,
    /// Volatility attaining the Monte Carlo bound.
    pub best_control: Option<f64>,
    /// What the number is relative to the true band price.
    pub label: String,
}

/// `dX = a X dW` with `a` in the band, calendar clock, paying `payoff`.
pub fn uvm_model(payoff: &PayoffSpec, band: (f64, f64), horizon: f64, n_controls: usize) -> Result<OsdeModel, PricingError> {
    let (lo, hi) = band;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(PricingError::Invalid(format!("invalid volatility band [{lo}, {hi}]")));
    }
    let grid = control_grid(band, n_controls);
    Ok(OsdeModel::new(1, horizon, hi.max(1.0))?
        .with_control_set(ControlSet::Interval { low: lo, high: hi, grid })
        .with_diffusion(Arc::new(|_: &StateView, x: &[f64], a, s: &mut [f64]| s[0] = a * x[0]))
        .with_terminal_cost(payoff.terminal_fn()))
}

fn control_grid((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![hi];
    }
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

/// Uncertain-volatility price of `payoff` at `params.spot` with the full
/// horizon remaining.
///
/// The PDE method needs a payoff of the state alone. The Monte Carlo
/// method takes the best of the constant volatilities, which for the
/// seller is a lower bound on the band price and for the buyer an upper
/// bound.
pub fn price_uvm(payoff: &PayoffSpec, band: (f64, f64), method: UvmMethod, params: &UvmParams) -> Result<UvmReport, PricingError> {
    let (lo, hi) = band;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(PricingError::Invalid(format!("invalid volatility band [{lo}, {hi}]")));
    }
    match method {
        UvmMethod::Pde => {
            let g = payoff
                .state_only()
                .ok_or_else(|| PricingError::Invalid("the PDE method needs a payoff of the state alone".into()))?;
            check_margin(params.spot, hi, params.horizon, params.x_max)?;
            let grid = Grid2D { time: TimeAxis::new(params.horizon, params.nt)?, x: Axis::new(0.0, params.x_max, params.nx)? };
            let sol = solve_bsb(|x| g(x), lo, hi, &grid, params.sense)?;
            Ok(UvmReport {
                method,
                sense: params.sense,
                band,
                price: sol.interpolate(0, params.spot, 0.0),
                stderr: None,
                cfl_ratio: Some(sol.cfl_ratio),
                best_control: None,
                label: "finite-difference band price".into(),
            })
        }
        UvmMethod::McBound => {
            let model = uvm_model(payoff, band, params.horizon, params.n_controls)?;
            let grid = model.control_set().grid();
            let policies: Vec<ControlPolicy> = grid.iter().map(|&a| ControlPolicy::Constant(a)).collect();
            let init = ParabolicPoint::at(vec![params.spot])?;
            let sense = match params.sense {
                BsbSense::Seller => Sense::Max,
                BsbSense::Buyer => Sense::Min,
            };
            let table = value_over_policies(&model, &policies, &init, params.dt, params.n_paths, params.seed, sense)?;
            let best = table.best_estimate();
            let label = match params.sense {
                BsbSense::Seller => "lower bound on the seller price",
                BsbSense::Buyer => "upper bound on the buyer price",
            };
            Ok(UvmReport {
                method,
                sense: params.sense,
                band,
                price: best.mean,
                stderr: Some(best.stderr),
                cfl_ratio: None,
                best_control: Some(grid[table.best]),
                label: label.into(),
            })
        }
    }
}
