use anyhow::{bail, Result};
use occupied::pricing::{hedging_cost_mc, HedgingParams, OptionKind, PayoffSpec, TradingPolicy, Underlying};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{dyadic, Context, Family, Scenario};
use crate::config::{nonnegative, positive, positive_count, JobKind};
use crate::report::{num, Outcome, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedgingScenarioParams {
    pub kind: OptionKind,
    pub strike: f64,
    pub sigma: f64,
    pub spot: f64,
    pub horizon: f64,
    /// Proportional transaction cost rate.
    pub eta: f64,
    pub pilot_paths: usize,
    /// Delta-tracking speeds; `0` is the static (never traded) hedge.
    pub kappas: Vec<f64>,
}

impl Default for HedgingScenarioParams {
    fn default() -> Self {
        Self {
            kind: OptionKind::Call,
            strike: 100.0,
            sigma: 0.2,
            spot: 100.0,
            horizon: 0.25,
            eta: 0.001,
            pilot_paths: 10_000,
            kappas: vec![0.0, 1.0, 5.0, 25.0, 100.0],
        }
    }
}

pub struct Hedging;

impl Scenario for Hedging {
    type Params = HedgingScenarioParams;
    const NAME: &'static str = "hedging";
    const FAMILY: Family = Family::Hedging;
    const JOB: JobKind = JobKind::Price;
    const SUMMARY: &'static str = "quadratic hedging error plus transaction costs across delta-tracking speeds";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(7)), Some(10_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        positive("strike", p.strike)?;
        positive("sigma", p.sigma)?;
        positive("spot", p.spot)?;
        positive("horizon", p.horizon)?;
        nonnegative("eta", p.eta)?;
        positive_count("pilot_paths", p.pilot_paths)?;
        if p.kappas.is_empty() {
            bail!("kappas must be nonempty");
        }
        for &k in &p.kappas {
            nonnegative("kappas", k)?;
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let option = PayoffSpec::Vanilla { kind: p.kind, strike: p.strike, underlying: Underlying::Level };
        let params = HedgingParams {
            sigma_bs: p.sigma,
            spot: p.spot,
            horizon: p.horizon,
            eta: p.eta,
            dt: ctx.numerics.dt(),
            n_paths: ctx.numerics.n_paths(),
            pilot_paths: p.pilot_paths,
            seed: ctx.seed,
        };
        let mut t = Table::new("policies", &["kappa", "cost", "stderr", "pilot_mean", "payoff_variance"]);
        let mut policies = Vec::new();
        let mut best = (f64::INFINITY, f64::NAN);
        for &kappa in &p.kappas {
            let policy = if kappa == 0.0 { TradingPolicy::Static } else { TradingPolicy::DeltaTracking { kappa } };
            let rep = hedging_cost_mc(&option, &policy, &params)?;
            if rep.cost.mean < best.0 {
                best = (rep.cost.mean, kappa);
            }
            t.push([num(kappa), num(rep.cost.mean), num(rep.cost.stderr), num(rep.pilot.mean), num(rep.payoff_variance)]);
            policies.push(json!({ "kappa": kappa, "report": rep }));
        }
        Ok(Outcome::new(&json!({ "policies": policies, "best_kappa": best.1, "best_cost": best.0 }))?.table(t))
    }
}
