use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::measure::{OccupationMeasure, ParabolicPoint};
use crate::osde::{batch_map, ControlPolicy, ControlSet, OsdeModel, SimOptions, StateView};
use crate::stats::McEstimate;

use super::black_scholes::black_scholes_delta;
use super::payoff::PayoffSpec;
use super::PricingError;

/// Offsets the pilot seed so that its paths share no stream with the cost
/// run.
const PILOT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// How fast the hedge position moves.
#[derive(Clone, Debug)]
pub enum TradingPolicy {
    /// `alpha = 0`: the initial (empty) position is never traded.
    Static,
    /// `alpha = kappa (Delta_BS(t, S) - Delta)` towards the Black-Scholes
    /// delta of a vanilla option.
    DeltaTracking { kappa: f64 },
    /// Any feedback on `x = (S, Delta, Y)`.
    Custom(ControlPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgingParams {
    pub sigma_bs: f64,
    pub spot: f64,
    pub horizon: f64,
    /// Proportional transaction cost rate.
    pub eta: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub pilot_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgingReport {
    /// `E[(xi - Y_T)^2 + int eta |alpha| S dt]`.
    pub cost: McEstimate,
    /// Pilot estimate of `E[xi]`, the initial hedge capital.
    pub pilot: McEstimate,
    /// Sample variance of `xi` on the cost paths (n - 1 denominator).
    pub payoff_variance: f64,
}

/// The state `x = (S, Delta, Y)` under trading speed `a`:
/// `dS = sigma S dW`, `dDelta = a dt`, `dY = Delta dS`.
///
/// The Y row of the diffusion is `Delta S sigma`, so that `Y` is the
/// self-financing hedge portfolio.
pub fn hedging_model(sigma_bs: f64, horizon: f64, eta: f64, option: &PayoffSpec) -> Result<OsdeModel, PricingError> {
    if !(sigma_bs > 0.0 && sigma_bs.is_finite()) {
        return Err(PricingError::Invalid(format!("volatility {sigma_bs} must be positive")));
    }
    if !(eta >= 0.0) {
        return Err(PricingError::Invalid(format!("transaction cost rate {eta} must be nonnegative")));
    }
    let payoff = option.terminal_fn();
    Ok(OsdeModel::new(3, horizon, 1.0)?
        .with_control_set(ControlSet::Interval { low: f64::NEG_INFINITY, high: f64::INFINITY, grid: vec![0.0] })
        .with_drift(Arc::new(|_: &StateView, _: &[f64], a, b: &mut [f64]| {
            b[0] = 0.0;
            b[1] = a;
            b[2] = 0.0;
        }))
        .with_diffusion(Arc::new(move |_: &StateView, x: &[f64], _, s: &mut [f64]| {
            s.iter_mut().for_each(|v| *v = 0.0);
            s[0] = sigma_bs * x[0];
            s[6] = sigma_bs * x[0] * x[1];
        }))
        .with_running_cost(Arc::new(move |_: &StateView, x: &[f64], a| eta * a.abs() * x[0]))
        .with_terminal_cost(Arc::new(move |o: &OccupationMeasure, x: &[f64]| {
            (payoff(o, x) - x[2]).powi(2)
        })))
}

fn policy_for(policy: &TradingPolicy, option: &PayoffSpec, params: &HedgingParams) -> Result<ControlPolicy, PricingError> {
    Ok(match policy {
        TradingPolicy::Static => ControlPolicy::Constant(0.0),
        TradingPolicy::Custom(p) => p.clone(),
        TradingPolicy::DeltaTracking { kappa } => {
            let PayoffSpec::Vanilla { kind, strike, .. } = *option else {
                return Err(PricingError::Invalid("delta tracking needs a vanilla option".into()));
            };
            let (kappa, s2, horizon) = (*kappa, params.sigma_bs * params.sigma_bs, params.horizon);
            ControlPolicy::Feedback(Arc::new(move |_, x: &[f64], view: &StateView| {
                let remaining = (horizon - view.mass).max(0.0);
                kappa * (black_scholes_delta(kind, x[0], strike, s2 * remaining) - x[1])
            }))
        }
    })
}

/// Quadratic hedging error plus proportional transaction costs of a
/// trading policy, starting from `S = spot`, `Delta = 0` and `Y = E[xi]`,
/// with `E[xi]` taken from an independent pilot batch.
///
/// Payoffs read the first state coordinate and the occupation measure of
/// the full state; vanilla, Asian and custom payoffs of `S` behave as
/// written on the stock.
pub fn hedging_cost_mc(option: &PayoffSpec, policy: &TradingPolicy, params: &HedgingParams) -> Result<HedgingReport, PricingError> {
    let model = hedging_model(params.sigma_bs, params.horizon, params.eta, option)?;
    let control = policy_for(policy, option, params)?;
    let options = SimOptions { record: false, ..SimOptions::default() };
    let xi = option.terminal_fn();

    let start = ParabolicPoint::at(vec![params.spot, 0.0, 0.0])?;
    let pilot_seed = params.seed ^ PILOT_SEED_SALT;
    let pilot_samples = batch_map(&model, &ControlPolicy::Constant(0.0), &start, params.dt, params.pilot_paths, pilot_seed, options, |p| {
        xi(&p.occupation, &p.x_final)
    })?;
    let pilot = McEstimate::from_samples(&pilot_samples, pilot_seed);

    let init = ParabolicPoint::at(vec![params.spot, 0.0, pilot.mean])?;
    let pairs = batch_map(&model, &control, &init, params.dt, params.n_paths, params.seed, options, |p| {
        let payoff = xi(&p.occupation, &p.x_final);
        (p.running_cost + (payoff - p.x_final[2]).powi(2), payoff)
    })?;
    let costs: Vec<f64> = pairs.iter().map(|c| c.0).collect();
    let payoffs: Vec<f64> = pairs.iter().map(|c| c.1).collect();
    let payoff_variance = McEstimate::from_samples(&payoffs, params.seed).stderr.powi(2) * payoffs.len() as f64;
    Ok(HedgingReport { cost: McEstimate::from_samples(&costs, params.seed), pilot, payoff_variance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> HedgingParams {
        HedgingParams { sigma_bs: 0.2, spot: 100.0, horizon: 0.25, eta: 0.0, dt: 1.0 / 128.0, n_paths: 4000, pilot_paths: 4000, seed: 3 }
    }

    #[test]
    fn constant_claim_costs_nothing() {
        let rep = hedging_cost_mc(&PayoffSpec::constant(5.0), &TradingPolicy::Static, &params()).unwrap();
        assert_eq!(rep.pilot.mean, 5.0);
        assert_eq!(rep.cost.mean, 0.0);
        assert_eq!(rep.cost.stderr, 0.0);
    }

    #[test]
    fn static_hedge_costs_the_payoff_variance() {
        let rep = hedging_cost_mc(&PayoffSpec::call(100.0), &TradingPolicy::Static, &params()).unwrap();
        assert!(rep.cost.within(rep.payoff_variance, 3.0), "{rep:?}");
    }

    #[test]
    fn tracking_reduces_the_cost() {
        let call = PayoffSpec::call(100.0);
        let p = params();
        let slow = hedging_cost_mc(&call, &TradingPolicy::DeltaTracking { kappa: 1.0 }, &p).unwrap();
        let fast = hedging_cost_mc(&call, &TradingPolicy::DeltaTracking { kappa: 50.0 }, &p).unwrap();
        assert!(fast.cost.mean < slow.cost.mean, "{fast:?} {slow:?}");
        assert!(hedging_cost_mc(&PayoffSpec::AsianPut { strike: 100.0 }, &TradingPolicy::DeltaTracking { kappa: 1.0 }, &p).is_err());
    }
}
