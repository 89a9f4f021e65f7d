use anyhow::{bail, Result};
use occupied::pde::{solve_bsb, Axis, BsbSense, Grid2D, TimeAxis};
use occupied::pricing::{black_scholes_call, black_scholes_put, price_uvm, OptionKind, PayoffSpec, Underlying, UvmMethod, UvmParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{dyadic, Context, Family, Scenario};
use crate::config::{positive, positive_count, JobKind};
use crate::report::{num, Outcome, Table};

/// Payoffs of the price alone, so that the band price reduces to a
/// one-dimensional PDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum UvmPayoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Calls at `low` and `high`, two short at the midpoint.
    Butterfly { low: f64, high: f64 },
}

impl UvmPayoff {
    fn spec(self) -> PayoffSpec {
        match self {
            UvmPayoff::Call { strike } => PayoffSpec::call(strike),
            UvmPayoff::Put { strike } => PayoffSpec::Vanilla { kind: OptionKind::Put, strike, underlying: Underlying::Level },
            UvmPayoff::Butterfly { low, high } => PayoffSpec::butterfly(low, high),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            UvmPayoff::Call { strike } | UvmPayoff::Put { strike } => positive("payoff.strike", strike),
            UvmPayoff::Butterfly { low, high } => {
                positive("payoff.low", low)?;
                if high <= low {
                    bail!("payoff: butterfly needs low < high");
                }
                Ok(())
            }
        }
    }

    /// Black-Scholes price at constant volatility `sigma`.
    fn black_scholes(self, spot: f64, sigma: f64, horizon: f64) -> f64 {
        let v = sigma * sigma * horizon;
        match self {
            UvmPayoff::Call { strike } => black_scholes_call(spot, strike, v),
            UvmPayoff::Put { strike } => black_scholes_put(spot, strike, v),
            UvmPayoff::Butterfly { low, high } => {
                let mid = 0.5 * (low + high);
                black_scholes_call(spot, low, v) - 2.0 * black_scholes_call(spot, mid, v) + black_scholes_call(spot, high, v)
            }
        }
    }
}

fn check_band(band: (f64, f64)) -> Result<()> {
    if !(band.0 > 0.0 && band.0 <= band.1 && band.1.is_finite()) {
        bail!("band must satisfy 0 < low <= high, got [{}, {}]", band.0, band.1);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UvmPriceParams {
    pub payoff: UvmPayoff,
    pub band: (f64, f64),
    pub method: UvmMethod,
    pub sense: BsbSense,
    pub spot: f64,
    pub horizon: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    /// Constant volatilities tried by the Monte Carlo bound.
    pub n_controls: usize,
}

impl Default for UvmPriceParams {
    fn default() -> Self {
        let d = UvmParams::default();
        Self {
            payoff: UvmPayoff::Call { strike: 100.0 },
            band: (0.1, 0.3),
            method: UvmMethod::Pde,
            sense: BsbSense::Seller,
            spot: d.spot,
            horizon: d.horizon,
            x_max: d.x_max,
            nx: d.nx,
            nt: d.nt,
            n_controls: d.n_controls,
        }
    }
}

pub struct UvmPrice;

impl Scenario for UvmPrice {
    type Params = UvmPriceParams;
    const NAME: &'static str = "uvm-bsb";
    const FAMILY: Family = Family::UvmBsb;
    const JOB: JobKind = JobKind::Price;
    const SUMMARY: &'static str = "uncertain-volatility price by finite differences or a Monte Carlo bound";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(20_000))
    }

    fn validate(p: &Self::Params) -> Result<()> {
        p.payoff.validate()?;
        check_band(p.band)?;
        positive("spot", p.spot)?;
        positive("horizon", p.horizon)?;
        positive("x_max", p.x_max)?;
        positive_count("nx", p.nx)?;
        positive_count("nt", p.nt)?;
        positive_count("n_controls", p.n_controls)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let params = UvmParams {
            spot: p.spot,
            horizon: p.horizon,
            sense: p.sense,
            x_max: p.x_max,
            nx: p.nx,
            nt: p.nt,
            dt: ctx.numerics.dt(),
            n_paths: ctx.numerics.n_paths(),
            seed: ctx.seed,
            n_controls: p.n_controls,
        };
        let rep = price_uvm(&p.payoff.spec(), p.band, p.method, &params)?;
        let bs_low = p.payoff.black_scholes(p.spot, p.band.0, p.horizon);
        let bs_high = p.payoff.black_scholes(p.spot, p.band.1, p.horizon);
        let mut t = Table::new("price", &["method", "sense", "price", "stderr", "bs_low", "bs_high"]);
        t.push([
            format!("{:?}", rep.method).to_lowercase(),
            format!("{:?}", rep.sense).to_lowercase(),
            num(rep.price),
            rep.stderr.map(num).unwrap_or_default(),
            num(bs_low),
            num(bs_high),
        ]);
        Ok(Outcome::new(&json!({ "report": rep, "black_scholes_low": bs_low, "black_scholes_high": bs_high }))?.table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BsbUvmParams {
    pub strike: f64,
    pub spot: f64,
    pub band: (f64, f64),
    pub horizon: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    /// Volatility of the collapsed-band run.
    pub collapse_sigma: f64,
    /// Allowed price error as a fraction of the spot.
    pub tolerance: f64,
}

impl Default for BsbUvmParams {
    fn default() -> Self {
        Self { strike: 100.0, spot: 100.0, band: (0.1, 0.3), horizon: 0.25, x_max: 250.0, nx: 400, nt: 4000, collapse_sigma: 0.2, tolerance: 0.005 }
    }
}

pub struct BsbUvm;

impl Scenario for BsbUvm {
    type Params = BsbUvmParams;
    const NAME: &'static str = "bsb-uvm";
    const FAMILY: Family = Family::UvmBsb;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "band price of a call against Black-Scholes at the band ends, band collapse, seller above buyer";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, None)
    }

    fn validate(p: &Self::Params) -> Result<()> {
        check_band(p.band)?;
        positive("strike", p.strike)?;
        positive("spot", p.spot)?;
        positive("horizon", p.horizon)?;
        positive("x_max", p.x_max)?;
        positive_count("nx", p.nx)?;
        positive_count("nt", p.nt)?;
        positive("collapse_sigma", p.collapse_sigma)?;
        positive("tolerance", p.tolerance)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let k = p.strike;
        let payoff = move |x: f64| (x - k).max(0.0);
        let grid = Grid2D { time: TimeAxis::new(p.horizon, p.nt)?, x: Axis::new(0.0, p.x_max, p.nx)? };
        let (lo, hi) = p.band;
        let seller = solve_bsb(payoff, lo, hi, &grid, BsbSense::Seller)?;
        let buyer = solve_bsb(payoff, lo, hi, &grid, BsbSense::Buyer)?;
        let collapsed = solve_bsb(payoff, p.collapse_sigma, p.collapse_sigma, &grid, BsbSense::Seller)?;
        let call = |s: f64, sigma: f64| black_scholes_call(s, k, sigma * sigma * p.horizon);
        let tol = p.tolerance * p.spot;

        let seller_atm = seller.interpolate(0, p.spot, 0.0);
        let buyer_atm = buyer.interpolate(0, p.spot, 0.0);
        let collapsed_atm = collapsed.interpolate(0, p.spot, 0.0);
        let (bs_hi, bs_lo, bs_mid) = (call(p.spot, hi), call(p.spot, lo), call(p.spot, p.collapse_sigma));

        let mut min_gap = f64::INFINITY;
        let mut order_violations = 0usize;
        for (a, b) in seller.levels.iter().zip(&buyer.levels) {
            for (s, u) in a.iter().zip(b) {
                let gap = s - u;
                min_gap = min_gap.min(gap);
                // Rounding in nodes where both senses pick the same
                // volatility is far below this.
                if gap < -1e-12 * (1.0 + s.abs()) {
                    order_violations += 1;
                }
            }
        }

        let mut t = Table::new("slice", &["x", "seller", "buyer", "collapsed", "bs_high", "bs_low", "bs_collapse"]);
        for i in 0..=grid.x.n {
            let x = grid.x.node(i);
            t.push([
                num(x),
                num(seller.node(0, i, 0)),
                num(buyer.node(0, i, 0)),
                num(collapsed.node(0, i, 0)),
                num(call(x, hi)),
                num(call(x, lo)),
                num(call(x, p.collapse_sigma)),
            ]);
        }
        Ok(Outcome::new(&json!({
            "cfl_ratio": seller.cfl_ratio,
            "scheme": seller.scheme,
            "seller_atm": seller_atm,
            "buyer_atm": buyer_atm,
            "collapsed_atm": collapsed_atm,
            "black_scholes_high": bs_hi,
            "black_scholes_low": bs_lo,
            "black_scholes_collapse": bs_mid,
            "tolerance_abs": tol,
            "min_seller_minus_buyer": min_gap,
            "order_violations": order_violations,
            "levels_compared": seller.levels.len(),
        }))?
        .check("seller-vs-bs-high", (seller_atm - bs_hi).abs() <= tol, format!("error {:.3e}", seller_atm - bs_hi))
        .check("buyer-vs-bs-low", (buyer_atm - bs_lo).abs() <= tol, format!("error {:.3e}", buyer_atm - bs_lo))
        .check("collapse-vs-bs", (collapsed_atm - bs_mid).abs() <= tol, format!("error {:.3e}", collapsed_atm - bs_mid))
        .check("seller-above-buyer", order_violations == 0, format!("min gap {min_gap:.3e}"))
        .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BsbRefinementParams {
    pub strike: f64,
    pub spot: f64,
    pub band: (f64, f64),
    pub horizon: f64,
    pub x_max: f64,
    pub sense: BsbSense,
    /// Successively halved space steps; time steps follow the CFL target.
    pub nx: Vec<usize>,
    pub cfl_target: f64,
    /// Window for the ratio of successive increments.
    pub ratio_window: (f64, f64),
}

impl Default for BsbRefinementParams {
    fn default() -> Self {
        Self {
            strike: 100.0,
            spot: 100.0,
            band: (0.1, 0.3),
            horizon: 0.25,
            x_max: 250.0,
            sense: BsbSense::Seller,
            nx: vec![50, 100, 200, 400],
            cfl_target: 0.9,
            ratio_window: (0.3, 0.7),
        }
    }
}

pub struct BsbRefinement;

impl Scenario for BsbRefinement {
    type Params = BsbRefinementParams;
    const NAME: &'static str = "bsb-refinement";
    const FAMILY: Family = Family::UvmBsb;
    const JOB: JobKind = JobKind::Diagnose;
    const SUMMARY: &'static str = "at-the-money band price under grid halving and the ratio of successive increments";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, None)
    }

    fn validate(p: &Self::Params) -> Result<()> {
        check_band(p.band)?;
        positive("strike", p.strike)?;
        positive("spot", p.spot)?;
        positive("horizon", p.horizon)?;
        positive("x_max", p.x_max)?;
        if p.nx.len() < 3 || p.nx.contains(&0) {
            bail!("nx needs at least three positive grid sizes");
        }
        if !(p.cfl_target > 0.0 && p.cfl_target <= 1.0) {
            bail!("cfl_target must lie in (0, 1]");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let k = p.strike;
        let mut rows = Vec::new();
        for &nx in &p.nx {
            let dx = p.x_max / nx as f64;
            let nt = (p.horizon * p.band.1.powi(2) * p.x_max.powi(2) / (dx * dx * p.cfl_target)).ceil() as usize;
            let grid = Grid2D { time: TimeAxis::new(p.horizon, nt)?, x: Axis::new(0.0, p.x_max, nx)? };
            let sol = solve_bsb(|x| (x - k).max(0.0), p.band.0, p.band.1, &grid, p.sense)?;
            rows.push((nx, nt, sol.cfl_ratio, sol.interpolate(0, p.spot, 0.0)));
        }
        let increments: Vec<f64> = rows.windows(2).map(|w| w[1].3 - w[0].3).collect();
        let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
        let mut t = Table::new("levels", &["nx", "nt", "cfl_ratio", "price", "increment", "ratio"]);
        for (i, r) in rows.iter().enumerate() {
            let inc = if i >= 1 { num(increments[i - 1]) } else { String::new() };
            let ratio = if i >= 2 { num(ratios[i - 2]) } else { String::new() };
            t.push([r.0.to_string(), r.1.to_string(), num(r.2), num(r.3), inc, ratio]);
        }
        let (lo, hi) = p.ratio_window;
        let in_window = ratios.iter().all(|r| (lo..=hi).contains(r));
        let contracting = ratios.iter().all(|r| *r > 0.0 && *r <= hi);
        Ok(Outcome::new(&json!({
            "prices": rows.iter().map(|r| r.3).collect::<Vec<_>>(),
            "increments": increments,
            "ratios": ratios,
            "ratio_window": p.ratio_window,
        }))?
        .check("ratios-in-window", in_window, format!("{ratios:?}"))
        .check("increments-contract", contracting, format!("{ratios:?}"))
        .table(t))
    }
}
