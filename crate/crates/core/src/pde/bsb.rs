use serde::{Deserialize, Serialize};

use super::{Grid2D, PdeError, PdeSolution};

/// Which side of the uncertain-volatility problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsbSense {
    /// Supremum over the band: `a_high` where the price is convex.
    Seller,
    /// Infimum over the band: `a_low` where the price is convex.
    Buyer,
}

/// Requires `x_max >= spot exp(4 a_high sqrt(T))`, so that the Dirichlet
/// boundary sits at least four standard deviations above the spot.
pub fn check_margin(spot: f64, a_high: f64, horizon: f64, x_max: f64) -> Result<(), PdeError> {
    let required = spot * (4.0 * a_high * horizon.sqrt()).exp();
    if x_max < required {
        return Err(PdeError::Margin { x_max, required });
    }
    Ok(())
}

/// Backward explicit scheme for `u_t + x^2 v(u_xx) u_xx / 2 = 0` on
/// `[x_min, x_max]` with Dirichlet data equal to the payoff at both ends.
/// `variance` maps the discrete second difference to the squared volatility.
fn explicit_backward<F, V>(payoff: F, grid: &Grid2D, max_variance: f64, variance: V, scheme: &str) -> Result<PdeSolution, PdeError>
where
    F: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    let dt = grid.time.dt();
    let dx = grid.x.step();
    let xs = grid.x.nodes();
    let x_far = grid.x.min.abs().max(grid.x.max.abs());
    let cfl_ratio = dt * max_variance * x_far * x_far / (dx * dx);
    if cfl_ratio > 1.0 {
        return Err(PdeError::Cfl { ratio: cfl_ratio });
    }
    let coef: Vec<f64> = xs.iter().map(|x| 0.5 * dt * x * x / (dx * dx)).collect();
    let n = grid.x.n;
    let steps = grid.time.steps;
    let mut levels = vec![Vec::new(); steps + 1];
    let mut u: Vec<f64> = xs.iter().map(|&x| payoff(x)).collect();
    let (left, right) = (u[0], u[n]);
    let mut next = u.clone();
    levels[steps] = u.clone();
    for k in (0..steps).rev() {
        for i in 1..n {
            let second = u[i + 1] - 2.0 * u[i] + u[i - 1];
            next[i] = u[i] + coef[i] * variance(second) * second;
        }
        next[0] = left;
        next[n] = right;
        std::mem::swap(&mut u, &mut next);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite { step: k });
        }
        levels[k] = u.clone();
    }
    let times = (0..=steps).map(|k| if k == steps { grid.time.horizon } else { k as f64 * dt }).collect();
    Ok(PdeSolution { scheme: scheme.into(), cfl_ratio, times, x: grid.x, y: None, levels })
}

/// Black-Scholes-Barenblatt price of `payoff` at every node; level 0 is the
/// price with the full horizon remaining.
pub fn solve_bsb<F: Fn(f64) -> f64>(
    payoff: F,
    a_low: f64,
    a_high: f64,
    grid: &Grid2D,
    sense: BsbSense,
) -> Result<PdeSolution, PdeError> {
    if !(a_low > 0.0 && a_low <= a_high && a_high.is_finite()) {
        return Err(PdeError::Band { low: a_low, high: a_high });
    }
    let (lo2, hi2) = (a_low * a_low, a_high * a_high);
    let (convex, concave) = match sense {
        BsbSense::Seller => (hi2, lo2),
        BsbSense::Buyer => (lo2, hi2),
    };
    explicit_backward(payoff, grid, hi2, |g| if g >= 0.0 { convex } else { concave }, "explicit-bsb")
}

/// The linear Black-Scholes equation with volatility `sigma`, on the same
/// scheme.
pub fn solve_black_scholes<F: Fn(f64) -> f64>(payoff: F, sigma: f64, grid: &Grid2D) -> Result<PdeSolution, PdeError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PdeError::Band { low: sigma, high: sigma });
    }
    let s2 = sigma * sigma;
    explicit_backward(payoff, grid, s2, |_| s2, "explicit-bsb")
}
