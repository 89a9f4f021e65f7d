use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::estimate_cost;
use crate::measure::ParabolicPoint;
use crate::osde::{Clock, ControlPolicy, OsdeModel, StateView};
use crate::stats::McEstimate;

use super::black_scholes::{black_scholes_price, OptionKind};
use super::payoff::PayoffSpec;
use super::PricingError;

pub type VolFn = Arc<dyn Fn(&StateView, f64) -> f64 + Send + Sync>;

/// Local volatility `sigma(o, x)` of a log-price, with known bounds.
#[derive(Clone)]
pub enum VolModel {
    Constant(f64),
    /// `base + amplitude sin(x)`.
    Sine { base: f64, amplitude: f64 },
    /// `base + jump 1{x > 0}`.
    Step { base: f64, jump: f64 },
    /// Any volatility within `[min, max]`.
    Custom { sigma: VolFn, min: f64, max: f64 },
}

impl fmt::Debug for VolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolModel::Constant(s) => write!(f, "Constant({s})"),
            VolModel::Sine { base, amplitude } => write!(f, "Sine {{ base: {base}, amplitude: {amplitude} }}"),
            VolModel::Step { base, jump } => write!(f, "Step {{ base: {base}, jump: {jump} }}"),
            VolModel::Custom { min, max, .. } => write!(f, "Custom {{ min: {min}, max: {max} }}"),
        }
    }
}

/// Serializable description of the builtin volatility models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VolSpec {
    Constant { sigma: f64 },
    Sine { base: f64, amplitude: f64 },
    Step { base: f64, jump: f64 },
}

impl From<VolSpec> for VolModel {
    fn from(spec: VolSpec) -> Self {
        match spec {
            VolSpec::Constant { sigma } => VolModel::Constant(sigma),
            VolSpec::Sine { base, amplitude } => VolModel::Sine { base, amplitude },
            VolSpec::Step { base, jump } => VolModel::Step { base, jump },
        }
    }
}

impl VolModel {
    pub fn sigma(&self, view: &StateView, x: f64) -> f64 {
        match self {
            VolModel::Constant(s) => *s,
            VolModel::Sine { base, amplitude } => base + amplitude * x.sin(),
            VolModel::Step { base, jump } => {
                if x > 0.0 {
                    base + jump
                } else {
                    *base
                }
            }
            VolModel::Custom { sigma, .. } => sigma(view, x),
        }
    }

    /// `(inf sigma, sup sigma)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            VolModel::Constant(s) => (*s, *s),
            VolModel::Sine { base, amplitude } => (base - amplitude.abs(), base + amplitude.abs()),
            VolModel::Step { base, jump } => (base.min(base + jump), base.max(base + jump)),
            VolModel::Custom { min, max, .. } => (*min, *max),
        }
    }
}

/// The variance-clock model: `lambda = sigma^2`, `dX = -sigma^2/2 dt +
/// sigma dW`, with `c* = max(1, 1/sigma_min^2, sigma_max^2)` so that the
/// exit time is at most `c* T`.
pub fn timer_model(vol: &VolModel, budget: f64, payoff: &PayoffSpec) -> Result<OsdeModel, PricingError> {
    let (lo, hi) = vol.bounds();
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(PricingError::Invalid(format!("volatility bounds [{lo}, {hi}] must be positive and finite")));
    }
    let c_star = (1.0 / (lo * lo)).max(hi * hi).max(1.0);
    let sig = vol.clone();
    let sig_drift = vol.clone();
    Ok(OsdeModel::new(1, budget, c_star)?
        .with_clock(Clock::QuadraticVariation)
        .with_diffusion(Arc::new(move |v: &StateView, x: &[f64], _, s: &mut [f64]| s[0] = sig.sigma(v, x[0])))
        .with_drift(Arc::new(move |v: &StateView, x: &[f64], _, b: &mut [f64]| {
            let s = sig_drift.sigma(v, x[0]);
            b[0] = -0.5 * s * s;
        }))
        .with_terminal_cost(payoff.terminal_fn()))
}

/// Monte Carlo price of `payoff` paid when the realized variance of the
/// log-price reaches `budget`, from log-price `x0` and an empty occupation
/// measure. Zero interest rate. A path still short of the budget after
/// `10 c* T` is reported as an error.
#[allow(clippy::too_many_arguments)]
pub fn price_timer_mc(
    vol: &VolModel,
    payoff: &PayoffSpec,
    budget: f64,
    x0: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, PricingError> {
    let model = timer_model(vol, budget, payoff)?;
    let init = ParabolicPoint::at(vec![x0])?;
    Ok(estimate_cost(&model, &ControlPolicy::Constant(0.0), &init, dt, n_paths, seed)?)
}

/// The log-price at exit is `Normal(x0 - T/2, T)` whatever the volatility,
/// so a vanilla on `exp(X)` is worth Black-Scholes with total variance `T`.
pub fn timer_vanilla_oracle(kind: OptionKind, strike: f64, x0: f64, budget: f64) -> f64 {
    black_scholes_price(kind, x0.exp(), strike, budget)
}
