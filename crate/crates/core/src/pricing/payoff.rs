use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::measure::OccupationMeasure;
use crate::osde::{SpatialFn, TerminalCostFn};

use super::black_scholes::OptionKind;
use super::PricingError;

/// What a vanilla payoff is written on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Underlying {
    /// The first state coordinate itself.
    Level,
    /// `exp` of the first state coordinate (a log-price state).
    Exp,
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `(pairings, x) -> payoff`, the pairings being those of `coords`.
pub type CylindricalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A terminal payoff `g(o, x)` on the exit state.
#[derive(Clone)]
pub enum PayoffSpec {
    /// `o(B)` for the closed ball `B = {|y| <= radius}`.
    OccupationTime { radius: f64 },
    /// `psi(o(phi))`.
    CylTerminal { phi: SpatialFn, psi: ScalarFn },
    /// `(K - o(y_1) / |o|)^+`, the fixed-strike Asian put on the first
    /// coordinate. Undefined for `|o| = 0`.
    AsianPut { strike: f64 },
    Vanilla { kind: OptionKind, strike: f64, underlying: Underlying },
    /// `f(o(c_1), .., o(c_m), x)`. With no coordinates it is a function of
    /// the state alone.
    Custom { coords: Vec<SpatialFn>, f: CylindricalFn },
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::OccupationTime { radius } => write!(f, "OccupationTime {{ radius: {radius} }}"),
            PayoffSpec::CylTerminal { .. } => f.write_str("CylTerminal"),
            PayoffSpec::AsianPut { strike } => write!(f, "AsianPut {{ strike: {strike} }}"),
            PayoffSpec::Vanilla { kind, strike, underlying } => {
                write!(f, "Vanilla {{ kind: {kind:?}, strike: {strike}, underlying: {underlying:?} }}")
            }
            PayoffSpec::Custom { coords, .. } => write!(f, "Custom {{ coords: {} }}", coords.len()),
        }
    }
}

impl PayoffSpec {
    pub fn call(strike: f64) -> Self {
        PayoffSpec::Vanilla { kind: OptionKind::Call, strike, underlying: Underlying::Level }
    }

    pub fn constant(value: f64) -> Self {
        PayoffSpec::Custom { coords: Vec::new(), f: Arc::new(move |_, _| value) }
    }

    /// A payoff of the first state coordinate only.
    pub fn of_state(g: ScalarFn) -> Self {
        PayoffSpec::Custom { coords: Vec::new(), f: Arc::new(move |_, x| g(x[0])) }
    }

    /// Long one call at `low` and one at `high`, short two at the midpoint.
    pub fn butterfly(low: f64, high: f64) -> Self {
        let mid = 0.5 * (low + high);
        Self::of_state(Arc::new(move |x| (x - low).max(0.0) - 2.0 * (x - mid).max(0.0) + (x - high).max(0.0)))
    }

    pub fn evaluate(&self, o: &OccupationMeasure, x: &[f64]) -> Result<f64, PricingError> {
        if let PayoffSpec::AsianPut { .. } = self {
            if o.total_mass() <= 0.0 {
                return Err(PricingError::Invalid("Asian payoff needs a measure of positive mass".into()));
            }
        }
        if x.is_empty() || o.dim() != x.len() {
            return Err(PricingError::Invalid(format!("state of length {} against a measure on R^{}", x.len(), o.dim())));
        }
        Ok(self.eval_unchecked(o, x))
    }

    fn eval_unchecked(&self, o: &OccupationMeasure, x: &[f64]) -> f64 {
        match self {
            PayoffSpec::OccupationTime { radius } => {
                let r2 = radius * radius;
                o.pair(|y| if y.iter().map(|v| v * v).sum::<f64>() <= r2 { 1.0 } else { 0.0 })
            }
            PayoffSpec::CylTerminal { phi, psi } => psi(o.pair(|y| phi(y))),
            PayoffSpec::AsianPut { strike } => (strike - o.pair(|y| y[0]) / o.total_mass()).max(0.0),
            PayoffSpec::Vanilla { kind, strike, underlying } => {
                let s = match underlying {
                    Underlying::Level => x[0],
                    Underlying::Exp => x[0].exp(),
                };
                kind.payoff(s, *strike)
            }
            PayoffSpec::Custom { coords, f } => {
                let c: Vec<f64> = coords.iter().map(|g| o.pair(|y| g(y))).collect();
                f(&c, x)
            }
        }
    }

    /// The payoff as a terminal cost. An Asian payoff on a massless measure
    /// evaluates to NaN; exit measures always carry the full budget.
    pub fn terminal_fn(&self) -> TerminalCostFn {
        let spec = self.clone();
        Arc::new(move |o: &OccupationMeasure, x: &[f64]| match spec {
            PayoffSpec::AsianPut { .. } if o.total_mass() <= 0.0 => f64::NAN,
            _ => spec.eval_unchecked(o, x),
        })
    }

    /// The payoff as a function of a scalar state, when it ignores the
    /// occupation measure.
    pub fn state_only(&self) -> Option<ScalarFn> {
        match self {
            PayoffSpec::Vanilla { kind, strike, underlying } => {
                let (kind, strike, underlying) = (*kind, *strike, *underlying);
                Some(Arc::new(move |x| match underlying {
                    Underlying::Level => kind.payoff(x, strike),
                    Underlying::Exp => kind.payoff(x.exp(), strike),
                }))
            }
            PayoffSpec::Custom { coords, f } if coords.is_empty() => {
                let f = f.clone();
                Some(Arc::new(move |x| f(&[], &[x])))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoffs_on_a_small_measure() {
        let o = OccupationMeasure::from_particles(1, [(&[0.5][..], 0.2), (&[2.0][..], 0.3), (&[-1.0][..], 0.5)]).unwrap();
        let x = [1.5];
        let ot = PayoffSpec::OccupationTime { radius: 1.0 };
        assert!((ot.evaluate(&o, &x).unwrap() - 0.7).abs() < 1e-15);
        let asian = PayoffSpec::AsianPut { strike: 1.0 };
        // mean = (0.1 + 0.6 - 0.5) / 1.0 = 0.2
        assert!((asian.evaluate(&o, &x).unwrap() - 0.8).abs() < 1e-15);
        assert!(asian.evaluate(&OccupationMeasure::new(1).unwrap(), &x).is_err());
        let cyl = PayoffSpec::CylTerminal { phi: Arc::new(|_| 1.0), psi: Arc::new(|y| y * y) };
        assert!((cyl.evaluate(&o, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(PayoffSpec::call(1.0).evaluate(&o, &x).unwrap(), 0.5);
        let exp_put = PayoffSpec::Vanilla { kind: OptionKind::Put, strike: 1.0, underlying: Underlying::Exp };
        assert_eq!(exp_put.evaluate(&o, &[0.0]).unwrap(), 0.0);
        assert_eq!(PayoffSpec::constant(3.0).terminal_fn()(&o, &x), 3.0);
    }

    #[test]
    fn butterfly_is_a_tent() {
        let f = PayoffSpec::butterfly(90.0, 110.0).state_only().unwrap();
        assert_eq!(f(80.0), 0.0);
        assert_eq!(f(100.0), 10.0);
        assert_eq!(f(105.0), 5.0);
        assert_eq!(f(120.0), 0.0);
        assert!(PayoffSpec::OccupationTime { radius: 1.0 }.state_only().is_none());
    }
}
