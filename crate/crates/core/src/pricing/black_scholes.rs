use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(self, underlying: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (underlying - strike).max(0.0),
            OptionKind::Put => (strike - underlying).max(0.0),
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

fn d_plus(spot: f64, strike: f64, total_variance: f64) -> f64 {
    ((spot / strike).ln() + 0.5 * total_variance) / total_variance.sqrt()
}

/// Zero-rate Black-Scholes call with total variance `sigma^2 tau`.
pub fn black_scholes_call(spot: f64, strike: f64, total_variance: f64) -> f64 {
    if total_variance <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let d1 = d_plus(spot, strike, total_variance);
    let d2 = d1 - total_variance.sqrt();
    spot * std_normal_cdf(d1) - strike * std_normal_cdf(d2)
}

/// Zero-rate Black-Scholes put, by put-call parity.
pub fn black_scholes_put(spot: f64, strike: f64, total_variance: f64) -> f64 {
    black_scholes_call(spot, strike, total_variance) - spot + strike
}

pub fn black_scholes_price(kind: OptionKind, spot: f64, strike: f64, total_variance: f64) -> f64 {
    match kind {
        OptionKind::Call => black_scholes_call(spot, strike, total_variance),
        OptionKind::Put => black_scholes_put(spot, strike, total_variance),
    }
}

/// Spot delta; at zero variance the payoff's one-sided slope.
pub fn black_scholes_delta(kind: OptionKind, spot: f64, strike: f64, total_variance: f64) -> f64 {
    let call = if total_variance <= 0.0 {
        if spot > strike {
            1.0
        } else {
            0.0
        }
    } else {
        std_normal_cdf(d_plus(spot, strike, total_variance))
    };
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // sigma = 0.2, tau = 1, S = K = 100: 7.965567455405804.
        assert!((black_scholes_call(100.0, 100.0, 0.04) - 7.965567455405804).abs() < 1e-10);
        assert!((black_scholes_put(100.0, 110.0, 0.04) - (black_scholes_call(100.0, 110.0, 0.04) + 10.0)).abs() < 1e-12);
        assert_eq!(black_scholes_call(120.0, 100.0, 0.0), 20.0);
        assert!((black_scholes_delta(OptionKind::Call, 100.0, 100.0, 0.04) - 0.539827837277029).abs() < 1e-12);
    }
}
