use std::sync::Arc;

use anyhow::{bail, Result};
use occupied::pricing::{
    black_scholes_put, price_timer_mc, timer_model, timer_vanilla_oracle, OptionKind, PayoffSpec, Underlying, VolModel, VolSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{dyadic, Context, Family, Scenario};
use crate::config::{positive, JobKind};
use crate::report::{num, Outcome, Table};

const SINE: VolSpec = VolSpec::Sine { base: 0.2, amplitude: 0.1 };

fn check_vol(spec: VolSpec) -> Result<()> {
    let (lo, hi) = VolModel::from(spec).bounds();
    if !(lo > 0.0 && hi.is_finite()) {
        bail!("volatility {spec:?} must stay positive and bounded, got range [{lo}, {hi}]");
    }
    Ok(())
}

fn c_star(spec: VolSpec) -> Result<f64> {
    Ok(timer_model(&spec.into(), 1.0, &PayoffSpec::constant(0.0))?.c_star())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimerVanillaParams {
    pub vol: VolSpec,
    pub kind: OptionKind,
    pub strike: f64,
    /// Initial log-price.
    pub x0: f64,
    /// Variance budget.
    pub budget: f64,
}

impl Default for TimerVanillaParams {
    fn default() -> Self {
        Self { vol: SINE, kind: OptionKind::Call, strike: 1.0, x0: 0.0, budget: 0.04 }
    }
}

pub struct TimerVanilla;

impl Scenario for TimerVanilla {
    type Params = TimerVanillaParams;
    const NAME: &'static str = "timer-vanilla";
    const FAMILY: Family = Family::Timer;
    const JOB: JobKind = JobKind::Price;
    const SUMMARY: &'static str = "vanilla timer option under local volatility against the total-variance oracle";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(100_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        check_vol(p.vol)?;
        positive("strike", p.strike)?;
        positive("budget", p.budget)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let payoff = PayoffSpec::Vanilla { kind: p.kind, strike: p.strike, underlying: Underlying::Exp };
        let est = price_timer_mc(&p.vol.into(), &payoff, p.budget, p.x0, ctx.numerics.dt(), ctx.numerics.n_paths(), ctx.seed)?;
        let oracle = timer_vanilla_oracle(p.kind, p.strike, p.x0, p.budget);
        let z = est.z_score(oracle);
        let mut t = Table::new("price", &["price", "stderr", "oracle", "z_score"]);
        t.push([num(est.mean), num(est.stderr), num(oracle), num(z)]);
        Ok(Outcome::new(&json!({
            "price": est.mean,
            "stderr": est.stderr,
            "n_paths": est.n_paths,
            "oracle": oracle,
            "z_score": z,
            "c_star": c_star(p.vol)?,
        }))?
        .check("oracle-within-3-stderr", z.abs() <= 3.0, format!("z = {z:.3}"))
        .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimerAsianParams {
    pub vol: VolSpec,
    pub strike: f64,
    pub x0: f64,
    pub budget: f64,
}

impl Default for TimerAsianParams {
    fn default() -> Self {
        Self { vol: SINE, strike: 1.0, x0: 0.0, budget: 0.04 }
    }
}

pub struct TimerAsian;

impl Scenario for TimerAsian {
    type Params = TimerAsianParams;
    const NAME: &'static str = "timer-asian";
    const FAMILY: Family = Family::Timer;
    const JOB: JobKind = JobKind::Price;
    const SUMMARY: &'static str = "Asian put on the occupation-averaged price, paid when the variance budget is spent";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(100_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        check_vol(p.vol)?;
        positive("strike", p.strike)?;
        positive("budget", p.budget)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let k = p.strike;
        // The average is taken against the occupation measure, i.e. weighted
        // by realized variance rather than calendar time.
        let payoff = PayoffSpec::Custom {
            coords: vec![Arc::new(|y: &[f64]| y[0].exp()), Arc::new(|_: &[f64]| 1.0)],
            f: Arc::new(move |c: &[f64], _: &[f64]| (k - c[0] / c[1]).max(0.0)),
        };
        let est = price_timer_mc(&p.vol.into(), &payoff, p.budget, p.x0, ctx.numerics.dt(), ctx.numerics.n_paths(), ctx.seed)?;
        let european = black_scholes_put(p.x0.exp(), k, p.budget);
        let mut t = Table::new("price", &["price", "stderr", "european_put"]);
        t.push([num(est.mean), num(est.stderr), num(european)]);
        Ok(Outcome::new(&json!({
            "price": est.mean,
            "stderr": est.stderr,
            "n_paths": est.n_paths,
            "european_put": european,
            "c_star": c_star(p.vol)?,
        }))?
        .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimerIndependenceParams {
    pub vols: Vec<VolSpec>,
    pub kind: OptionKind,
    pub strike: f64,
    pub x0: f64,
    pub budget: f64,
    pub k_stderr: f64,
}

impl Default for TimerIndependenceParams {
    fn default() -> Self {
        Self {
            vols: vec![VolSpec::Constant { sigma: 0.2 }, SINE, VolSpec::Step { base: 0.15, jump: 0.1 }],
            kind: OptionKind::Call,
            strike: 1.0,
            x0: 0.0,
            budget: 0.04,
            k_stderr: 3.0,
        }
    }
}

pub struct TimerIndependence;

impl Scenario for TimerIndependence {
    type Params = TimerIndependenceParams;
    const NAME: &'static str = "timer-independence";
    const FAMILY: Family = Family::Timer;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "timer prices agree across volatility models and with the total-variance oracle";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(100_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        if p.vols.len() < 2 {
            bail!("vols needs at least two models");
        }
        for &v in &p.vols {
            check_vol(v)?;
        }
        positive("strike", p.strike)?;
        positive("budget", p.budget)?;
        positive("k_stderr", p.k_stderr)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let payoff = PayoffSpec::Vanilla { kind: p.kind, strike: p.strike, underlying: Underlying::Exp };
        let oracle = timer_vanilla_oracle(p.kind, p.strike, p.x0, p.budget);
        // Model i runs on seed + i so that the estimates are independent
        // and their standard errors combine in quadrature.
        let mut ests = Vec::with_capacity(p.vols.len());
        for (i, &v) in p.vols.iter().enumerate() {
            let seed = ctx.seed.wrapping_add(i as u64);
            ests.push(price_timer_mc(&v.into(), &payoff, p.budget, p.x0, ctx.numerics.dt(), ctx.numerics.n_paths(), seed)?);
        }
        let mut t = Table::new("models", &["model", "seed", "price", "stderr", "oracle", "z_score"]);
        let mut out_models = Vec::new();
        let mut checks = Vec::new();
        for (i, (v, e)) in p.vols.iter().zip(&ests).enumerate() {
            let z = e.z_score(oracle);
            t.push([i.to_string(), e.seed.to_string(), num(e.mean), num(e.stderr), num(oracle), num(z)]);
            out_models.push(json!({ "vol": v, "seed": e.seed, "price": e.mean, "stderr": e.stderr, "z_score": z }));
            checks.push((format!("model-{i}-vs-oracle"), z.abs() <= p.k_stderr, format!("z = {z:.3}")));
        }
        let mut pairs = Vec::new();
        for i in 0..ests.len() {
            for j in i + 1..ests.len() {
                let diff = ests[i].mean - ests[j].mean;
                let se = ests[i].stderr.hypot(ests[j].stderr);
                let z = diff / se;
                pairs.push(json!({ "i": i, "j": j, "diff": diff, "combined_stderr": se, "z_score": z }));
                checks.push((format!("model-{i}-vs-model-{j}"), diff.abs() <= p.k_stderr * se, format!("z = {z:.3}")));
            }
        }
        let mut out = Outcome::new(&json!({ "oracle": oracle, "models": out_models, "pairs": pairs, "k_stderr": p.k_stderr }))?;
        for (name, pass, detail) in checks {
            out = out.check(name, pass, detail);
        }
        Ok(out.table(t))
    }
}
