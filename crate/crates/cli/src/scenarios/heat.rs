use anyhow::{bail, Result};
use occupied::pricing::{heat_value_closed_form, heat_value_mc, HEAT_QUAD_TOL};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{dyadic, Context, Family, Scenario};
use crate::config::{nonnegative, positive, JobKind};
use crate::report::{num, Outcome, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatPriceParams {
    pub radius: f64,
    pub horizon: f64,
    /// Occupation time already spent in the ball.
    pub o_ball: f64,
    /// Starting position; its length sets the dimension.
    pub x: Vec<f64>,
}

impl Default for HeatPriceParams {
    fn default() -> Self {
        Self { radius: 1.0, horizon: 1.0, o_ball: 0.0, x: vec![0.0] }
    }
}

fn check_point(radius: f64, horizon: f64, o_ball: f64) -> Result<()> {
    positive("radius", radius)?;
    positive("horizon", horizon)?;
    nonnegative("o_ball", o_ball)?;
    if o_ball > horizon {
        bail!("o_ball = {o_ball} exceeds the horizon {horizon}");
    }
    Ok(())
}

pub struct HeatPrice;

impl Scenario for HeatPrice {
    type Params = HeatPriceParams;
    const NAME: &'static str = "heat-occupation";
    const FAMILY: Family = Family::HeatOccupation;
    const JOB: JobKind = JobKind::Price;
    const SUMMARY: &'static str = "expected occupation time of a Brownian motion in a ball, Monte Carlo against quadrature";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(10)), Some(100_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        check_point(p.radius, p.horizon, p.o_ball)?;
        if p.x.is_empty() {
            bail!("x must have at least one coordinate");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let n = ctx.numerics;
        let mc = heat_value_mc(p.o_ball, &p.x, p.horizon, p.radius, n.dt(), n.n_paths(), ctx.seed)?;
        let oracle = heat_value_closed_form(p.o_ball, &p.x, p.horizon - p.o_ball, p.radius);
        let z = mc.z_score(oracle);
        let mut t = Table::new("value", &["o_ball", "x_norm", "price", "stderr", "oracle", "z_score"]);
        let norm = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        t.push([num(p.o_ball), num(norm), num(mc.mean), num(mc.stderr), num(oracle), num(z)]);
        Ok(Outcome::new(&json!({
            "price": mc.mean,
            "stderr": mc.stderr,
            "n_paths": mc.n_paths,
            "oracle": oracle,
            "oracle_quadrature_tol": HEAT_QUAD_TOL,
            "z_score": z,
        }))?
        .check("oracle-within-3-stderr", z.abs() <= 3.0, format!("z = {z:.3}"))
        .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatOracleParams {
    pub radius: f64,
    pub horizon: f64,
    pub o_ball: Vec<f64>,
    /// One-dimensional starting positions.
    pub x: Vec<f64>,
    pub k_stderr: f64,
}

impl Default for HeatOracleParams {
    fn default() -> Self {
        Self { radius: 1.0, horizon: 1.0, o_ball: vec![0.0, 0.3], x: vec![0.0, 0.5, 2.0], k_stderr: 3.0 }
    }
}

pub struct HeatOracle;

impl Scenario for HeatOracle {
    type Params = HeatOracleParams;
    const NAME: &'static str = "heat-oracle";
    const FAMILY: Family = Family::HeatOccupation;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "Monte Carlo occupation values match the quadrature oracle on a grid of initial states";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(10)), Some(100_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        for &o in &p.o_ball {
            check_point(p.radius, p.horizon, o)?;
        }
        if p.o_ball.is_empty() || p.x.is_empty() {
            bail!("o_ball and x must be nonempty");
        }
        positive("k_stderr", p.k_stderr)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let n = ctx.numerics;
        let mut t = Table::new("points", &["o_ball", "x", "price", "stderr", "oracle", "z_score", "pass"]);
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        for &o in &p.o_ball {
            for &x in &p.x {
                let mc = heat_value_mc(o, &[x], p.horizon, p.radius, n.dt(), n.n_paths(), ctx.seed)?;
                let oracle = heat_value_closed_form(o, &[x], p.horizon - o, p.radius);
                let z = mc.z_score(oracle);
                let pass = z.abs() <= p.k_stderr;
                t.push([num(o), num(x), num(mc.mean), num(mc.stderr), num(oracle), num(z), pass.to_string()]);
                rows.push(json!({ "o_ball": o, "x": x, "price": mc.mean, "stderr": mc.stderr, "oracle": oracle, "z_score": z }));
                checks.push((format!("o_ball={o} x={x}"), pass, format!("z = {z:.3}")));
            }
        }
        let mut out = Outcome::new(&json!({ "points": rows, "oracle_quadrature_tol": HEAT_QUAD_TOL, "k_stderr": p.k_stderr }))?;
        for (name, pass, detail) in checks {
            out = out.check(name, pass, detail);
        }
        Ok(out.table(t))
    }
}
