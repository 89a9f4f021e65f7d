use serde::{Deserialize, Serialize};

use crate::measure::ParabolicPoint;
use crate::osde::{Control, OsdeError, OsdeModel};

use super::Sense;

/// The jet `(theta, Delta, Gamma)` at which the Hamiltonian is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub theta: f64,
    pub delta: Vec<f64>,
    /// Row-major `d x d`, symmetric.
    pub gamma: Vec<f64>,
}

impl JetPoint {
    pub fn new(theta: f64, delta: Vec<f64>, gamma: Vec<f64>) -> Result<Self, OsdeError> {
        let d = delta.len();
        if gamma.len() != d * d {
            return Err(OsdeError::DimensionMismatch { expected: d * d, found: gamma.len() });
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (gamma[i * d + j], gamma[j * d + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(OsdeError::InvalidModel("Gamma must be symmetric".into()));
                }
            }
        }
        Ok(Self { theta, delta, gamma })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { theta: c * self.theta, delta: self.delta.iter().map(|v| c * v).collect(), gamma: self.gamma.iter().map(|v| c * v).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianValue {
    pub value: f64,
    /// A control attaining the optimum (the first one on the grid).
    pub argmin: Control,
}

/// `lambda theta + b . Delta + tr(sigma sigma^T Gamma) / 2 + l` at one control.
pub fn generator_term(model: &OsdeModel, p: &ParabolicPoint, jet: &JetPoint, a: Control) -> Result<f64, OsdeError> {
    let d = model.dim();
    if jet.delta.len() != d {
        return Err(OsdeError::DimensionMismatch { expected: d, found: jet.delta.len() });
    }
    let c = model.coefficients_at(p, a)?;
    let mut total = c.rate * jet.theta + c.running;
    for i in 0..d {
        total += c.drift[i] * jet.delta[i];
        for j in 0..d {
            let a_ij: f64 = (0..d).map(|k| c.sigma[i * d + k] * c.sigma[j * d + k]).sum();
            total += 0.5 * a_ij * jet.gamma[j * d + i];
        }
    }
    Ok(total)
}

/// `H(o, x, theta, Delta, Gamma) = -inf_a (lambda theta + b . Delta + tr(sigma sigma^T Gamma) / 2 + l)`,
/// minimized exactly over the control grid.
pub fn hamiltonian(model: &OsdeModel, p: &ParabolicPoint, jet: &JetPoint) -> Result<HamiltonianValue, OsdeError> {
    hamiltonian_with_sense(model, p, jet, Sense::Min)
}

/// `-inf_a (..)` for `Sense::Min`, `-sup_a (..)` for `Sense::Max`. The
/// latter is the form taken by the equation of a maximized objective, such
/// as the seller's price under uncertain volatility.
pub fn hamiltonian_with_sense(
    model: &OsdeModel,
    p: &ParabolicPoint,
    jet: &JetPoint,
    sense: Sense,
) -> Result<HamiltonianValue, OsdeError> {
    let grid = model.control_set().grid();
    if grid.is_empty() {
        return Err(OsdeError::InvalidModel("empty control grid".into()));
    }
    let mut best: Option<(f64, Control)> = None;
    for a in grid {
        let v = generator_term(model, p, jet, a)?;
        let better = match (best, sense) {
            (None, _) => true,
            (Some((b, _)), Sense::Min) => v < b,
            (Some((b, _)), Sense::Max) => v > b,
        };
        if better {
            best = Some((v, a));
        }
    }
    let (opt, argmin) = best.expect("nonempty grid");
    Ok(HamiltonianValue { value: -opt, argmin })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::osde::ControlSet;

    fn uvm(lo: f64, hi: f64) -> OsdeModel {
        OsdeModel::new(1, 1.0, 1.0)
            .unwrap()
            .with_control_set(ControlSet::interval(lo, hi))
            .with_diffusion(Arc::new(|_, x: &[f64], a, s: &mut [f64]| s[0] = a * x[0]))
    }

    #[test]
    fn single_control_constant_coefficients() {
        let model = OsdeModel::new(1, 1.0, 1.0)
            .unwrap()
            .with_drift(Arc::new(|_, _, _, b: &mut [f64]| b[0] = 2.0))
            .with_diffusion(Arc::new(|_, _, _, s: &mut [f64]| s[0] = 3.0))
            .with_running_cost(Arc::new(|_, _, _| 0.5));
        let p = ParabolicPoint::at(vec![1.0]).unwrap();
        let jet = JetPoint::new(1.5, vec![-1.0], vec![0.2]).unwrap();
        let h = hamiltonian(&model, &p, &jet).unwrap();
        assert_eq!(h.value, -(1.5 - 2.0 + 0.5 * 9.0 * 0.2 + 0.5));
    }

    #[test]
    fn uncertain_volatility_selects_by_sign_of_gamma() {
        let (lo, hi) = (0.1, 0.3);
        let model = uvm(lo, hi);
        let x = 2.0;
        let p = ParabolicPoint::at(vec![x]).unwrap();
        let pos = JetPoint::new(0.7, vec![0.0], vec![1.3]).unwrap();
        let neg = JetPoint::new(0.7, vec![0.0], vec![-1.3]).unwrap();
        // seller form: -(theta + x^2 V(Gamma) / 2)
        let h = hamiltonian_with_sense(&model, &p, &pos, Sense::Max).unwrap();
        assert!((h.value - -(0.7 + 0.5 * hi * hi * x * x * 1.3)).abs() < 1e-15);
        assert_eq!(h.argmin, hi);
        let h = hamiltonian_with_sense(&model, &p, &neg, Sense::Max).unwrap();
        assert!((h.value - -(0.7 - 0.5 * lo * lo * x * x * 1.3)).abs() < 1e-15);
        assert_eq!(h.argmin, lo);
        // minimizing form picks the opposite endpoint
        let h = hamiltonian(&model, &p, &pos).unwrap();
        assert!((h.value - -(0.7 + 0.5 * lo * lo * x * x * 1.3)).abs() < 1e-15);
        let h = hamiltonian(&model, &p, &neg).unwrap();
        assert!((h.value - -(0.7 - 0.5 * hi * hi * x * x * 1.3)).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_gamma_is_rejected() {
        assert!(JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 2.0, 3.0, 1.0]).is_err());
        assert!(JetPoint::new(0.0, vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let model = OsdeModel::new(1, 1.0, 1.0).unwrap().with_control_set(ControlSet::interval(f64::NEG_INFINITY, f64::INFINITY));
        let p = ParabolicPoint::at(vec![0.0]).unwrap();
        assert!(hamiltonian(&model, &p, &JetPoint::new(0.0, vec![0.0], vec![0.0]).unwrap()).is_err());
    }

    fn controlled_model() -> OsdeModel {
        OsdeModel::new(2, 1.0, 2.0)
            .unwrap()
            .with_control_set(ControlSet::Finite(vec![-1.0, -0.5, 0.0, 0.5, 1.0]))
            .with_drift(Arc::new(|_, x: &[f64], a, b: &mut [f64]| {
                b[0] = a;
                b[1] = -x[1] * a * a;
            }))
            .with_diffusion(Arc::new(|_, x: &[f64], a, s: &mut [f64]| {
                s.copy_from_slice(&[1.0 + 0.5 * a, 0.3 * x[0].sin(), 0.0, 0.5 + a * a]);
            }))
            .with_clock(crate::osde::Clock::Custom(Arc::new(|_, x: &[f64], a| 1.0 + 0.25 * (x[0].cos() + a * a))))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneous_when_argmin_is_unchanged(
            theta in -2.0f64..2.0, d0 in -2.0f64..2.0, d1 in -2.0f64..2.0,
            g00 in -2.0f64..2.0, g01 in -2.0f64..2.0, g11 in -2.0f64..2.0,
            x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, c in 0.1f64..5.0,
        ) {
            let model = controlled_model();
            let p = ParabolicPoint::at(vec![x0, x1]).unwrap();
            let jet = JetPoint::new(theta, vec![d0, d1], vec![g00, g01, g01, g11]).unwrap();
            let h = hamiltonian(&model, &p, &jet).unwrap();
            let hc = hamiltonian(&model, &p, &jet.scaled(c)).unwrap();
            prop_assert_eq!(h.argmin, hc.argmin);
            prop_assert!((hc.value - c * h.value).abs() <= 1e-12 * (1.0 + (c * h.value).abs()));
        }

        #[test]
        fn monotone_in_gamma(
            theta in -2.0f64..2.0, g00 in -2.0f64..2.0, g01 in -2.0f64..2.0, g11 in -2.0f64..2.0,
            q0 in -1.0f64..1.0, q1 in -1.0f64..1.0, x0 in -2.0f64..2.0,
        ) {
            let model = controlled_model();
            let p = ParabolicPoint::at(vec![x0, 0.5]).unwrap();
            let small = JetPoint::new(theta, vec![0.3, -0.2], vec![g00, g01, g01, g11]).unwrap();
            // Gamma + q q^T dominates Gamma
            let big = JetPoint::new(theta, vec![0.3, -0.2], vec![g00 + q0 * q0, g01 + q0 * q1, g01 + q0 * q1, g11 + q1 * q1]).unwrap();
            let hs = hamiltonian(&model, &p, &small).unwrap().value;
            let hb = hamiltonian(&model, &p, &big).unwrap().value;
            // the generator term grows with Gamma, so H = -inf(..) shrinks
            prop_assert!(hb <= hs + 1e-12);
            let hs = hamiltonian_with_sense(&model, &p, &small, Sense::Max).unwrap().value;
            let hb = hamiltonian_with_sense(&model, &p, &big, Sense::Max).unwrap().value;
            prop_assert!(hb <= hs + 1e-12);
        }
    }
}
