use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::control::estimate_cost;
use crate::measure::{OccupationMeasure, ParabolicPoint};
use crate::osde::{ControlPolicy, OsdeModel};
use crate::stats::McEstimate;

use super::black_scholes::std_normal_cdf;
use super::payoff::PayoffSpec;
use super::PricingError;

/// Absolute tolerance of the time quadrature.
pub const HEAT_QUAD_TOL: f64 = 1e-8;

/// `v(o, x) = o(B) + int_0^remaining P(|x + W_s| <= r) ds` for a standard
/// Brownian motion `W` in `R^d`, with `remaining = T - |o|`.
pub fn heat_value_closed_form(o_ball: f64, x: &[f64], remaining: f64, radius: f64) -> f64 {
    if remaining <= 0.0 {
        return o_ball;
    }
    let integrand = |s: f64| ball_probability(x, s, radius);
    o_ball + adaptive_simpson(&integrand, 0.0, remaining, HEAT_QUAD_TOL)
}

/// `P(|x + W_s| <= r)`. At `s = 0` the indicator, with 1/2 on the sphere.
pub fn ball_probability(x: &[f64], s: f64, radius: f64) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s <= 0.0 {
        return if norm < radius {
            1.0
        } else if norm == radius {
            0.5
        } else {
            0.0
        };
    }
    let sd = s.sqrt();
    if x.len() == 1 {
        return std_normal_cdf((radius - x[0]) / sd) - std_normal_cdf((-radius - x[0]) / sd);
    }
    let d = x.len() as f64;
    // Beyond ~9 standard deviations from the sphere the answer is 0 or 1 to
    // double precision.
    let gap = (norm - radius) / sd;
    if gap.abs() > 9.0 * d.sqrt() + 9.0 {
        return if gap > 0.0 { 0.0 } else { 1.0 };
    }
    let half_mu = 0.5 * norm * norm / s;
    if half_mu > 1e7 {
        // Sphere locally flat on the scale sqrt(s).
        return std_normal_cdf(-gap);
    }
    noncentral_chi2_cdf(d, 2.0 * half_mu, radius * radius / s)
}

/// Poisson mixture of central chi-square laws, summed over a window of
/// the Poisson weights around their mode. Along the window the chi-square
/// cdfs follow `P(a + 1, x) = P(a, x) - x^a e^-x / Gamma(a + 1)`. The
/// recurrence starts where `P` is 1 to double precision or `a` is small,
/// since library values of `P` lose digits for large `a`.
fn noncentral_chi2_cdf(k: f64, lambda: f64, z: f64) -> f64 {
    let m = 0.5 * lambda;
    if m == 0.0 {
        return ChiSquared::new(k).map(|c| c.cdf(z)).unwrap_or(f64::NAN);
    }
    let spread = 12.0 * m.sqrt() + 12.0;
    let lo = (m - spread).max(0.0).floor();
    let hi = (m + spread).ceil();
    let x = 0.5 * z;
    let (ln_x, ln_m) = (x.ln(), m.ln());
    let mut j = (x - 0.5 * k - 40.0 * x.sqrt() - 40.0).max(0.0).floor().min(lo);
    let mut a = 0.5 * k + j;
    let mut p = gamma_lr(a, x);
    let mut ln_term = ln_poisson(a, x);
    let mut ln_w = ln_poisson(lo, m);
    let mut total = 0.0;
    while j <= hi {
        if j >= lo {
            total += ln_w.exp() * p;
            ln_w += ln_m - (j + 1.0).ln();
        }
        p = (p - ln_term.exp()).max(0.0);
        ln_term += ln_x - (a + 1.0).ln();
        a += 1.0;
        j += 1.0;
    }
    total.clamp(0.0, 1.0)
}

/// `ln(mean^a e^-mean / Gamma(a + 1))`. For large `a` the terms of the
/// direct formula cancel, so it is evaluated through the deviance
/// `a ln(a / mean) - a + mean` and the Stirling remainder.
fn ln_poisson(a: f64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if a == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if a < 15.0 {
        return a * mean.ln() - mean - ln_gamma(a + 1.0);
    }
    let e = (a - mean) / mean;
    let deviance = mean * ((1.0 + e) * e.ln_1p() - e);
    let a2 = a * a;
    let remainder = (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * a2)) / a2) / a;
    -deviance - 0.5 * (2.0 * std::f64::consts::PI * a).ln() - remainder
}

/// Adaptive Simpson quadrature with Richardson correction.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Brownian motion in calendar time paying the occupation time of the
/// ball of `radius` at exit.
pub fn heat_model(dim: usize, horizon: f64, radius: f64) -> Result<OsdeModel, PricingError> {
    Ok(OsdeModel::brownian(dim, horizon)?.with_terminal_cost(PayoffSpec::OccupationTime { radius }.terminal_fn()))
}

/// Initial state whose occupation measure is an atom of mass `o_ball` at
/// the origin, so that `o(B) = |o| = o_ball`.
pub fn heat_initial_point(o_ball: f64, x: &[f64]) -> Result<ParabolicPoint, PricingError> {
    let mut measure = OccupationMeasure::new(x.len())?;
    if o_ball > 0.0 {
        measure.push(&vec![0.0; x.len()], o_ball)?;
    }
    Ok(ParabolicPoint::new(measure, x.to_vec())?)
}

/// Monte Carlo value of the occupied heat problem at
/// [`heat_initial_point`]`(o_ball, x)`.
pub fn heat_value_mc(
    o_ball: f64,
    x: &[f64],
    horizon: f64,
    radius: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, PricingError> {
    let model = heat_model(x.len(), horizon, radius)?;
    let init = heat_initial_point(o_ball, x)?;
    Ok(estimate_cost(&model, &ControlPolicy::Constant(0.0), &init, dt, n_paths, seed)?)
}
