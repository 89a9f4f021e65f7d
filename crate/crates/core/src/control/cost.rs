use serde::{Deserialize, Serialize};

use crate::measure::ParabolicPoint;
use crate::osde::{batch_map, ControlPolicy, OsdeError, OsdeModel, SimOptions};
use crate::stats::McEstimate;

/// Per-path realized costs `int_0^tau l dt + g(O_tau, X_tau)` for paths
/// `0..n_paths`. At the boundary `|o| = T` every sample equals `g(o, x)`.
pub fn cost_samples(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>, OsdeError> {
    let options = SimOptions { record: false, ..SimOptions::default() };
    batch_map(model, policy, init, dt, n_paths, seed, options, |p| {
        p.running_cost + model.terminal_cost(&p.occupation, &p.x_final)
    })
}

/// Monte Carlo estimate of `J(o, x, alpha) = E[int_0^tau l dt + g(O_tau, X_tau)]`.
pub fn estimate_cost(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, OsdeError> {
    if init.measure.total_mass() >= model.horizon() && n_paths > 0 {
        return Ok(McEstimate::exact(model.terminal_cost(&init.measure, &init.x), n_paths, seed));
    }
    Ok(McEstimate::from_samples(&cost_samples(model, policy, init, dt, n_paths, seed)?, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Costs of a finite policy set under common random numbers.
///
/// The selected value bounds the true value over all admissible controls
/// from above (for `Min`) or below (for `Max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub sense: Sense,
    pub best: usize,
    pub estimates: Vec<McEstimate>,
}

impl PolicyTable {
    pub fn best_estimate(&self) -> McEstimate {
        self.estimates[self.best]
    }

    pub fn bound_label(&self) -> &'static str {
        match self.sense {
            Sense::Min => "upper bound",
            Sense::Max => "lower bound",
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn value_over_policies(
    model: &OsdeModel,
    policies: &[ControlPolicy],
    init: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
    sense: Sense,
) -> Result<PolicyTable, OsdeError> {
    if policies.is_empty() {
        return Err(OsdeError::InvalidModel("empty policy list".into()));
    }
    let estimates = policies
        .iter()
        .map(|p| estimate_cost(model, p, init, dt, n_paths, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, e) in estimates.iter().enumerate() {
        let better = match sense {
            Sense::Min => e.mean < estimates[best].mean,
            Sense::Max => e.mean > estimates[best].mean,
        };
        if better {
            best = i;
        }
    }
    Ok(PolicyTable { sense, best, estimates })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::measure::OccupationMeasure;

    #[test]
    fn boundary_returns_terminal_cost() {
        let model = OsdeModel::brownian(1, 1.0)
            .unwrap()
            .with_terminal_cost(Arc::new(|o, x: &[f64]| o.pair(|y| y[0]) + x[0].cos()));
        let init = ParabolicPoint::new(OccupationMeasure::dirac(&[0.3], 1.0).unwrap(), vec![0.2]).unwrap();
        let e = estimate_cost(&model, &ControlPolicy::Constant(0.0), &init, 0.01, 100, 4).unwrap();
        assert_eq!(e.mean, 0.3 + 0.2f64.cos());
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn unit_terminal_cost() {
        let model = OsdeModel::brownian(1, 1.0).unwrap().with_terminal_cost(Arc::new(|_, _| 1.0));
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let e = estimate_cost(&model, &ControlPolicy::Constant(0.0), &init, 0.05, 50, 0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn unit_running_cost_accrues_the_horizon() {
        let model = OsdeModel::brownian(1, 0.7).unwrap().with_running_cost(Arc::new(|_, _, _| 1.0));
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let e = estimate_cost(&model, &ControlPolicy::Constant(0.0), &init, 0.01, 20, 0).unwrap();
        assert!((e.mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn policy_tables_use_common_random_numbers() {
        let model = OsdeModel::brownian(1, 1.0)
            .unwrap()
            .with_control_set(crate::osde::ControlSet::Finite(vec![-1.0, 0.0, 1.0]))
            .with_drift(Arc::new(|_, _, a, b: &mut [f64]| b[0] = a))
            .with_terminal_cost(Arc::new(|_, x: &[f64]| x[0]));
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let policies: Vec<ControlPolicy> = [-1.0, 0.0, 1.0, 0.0].map(ControlPolicy::Constant).to_vec();
        let min = value_over_policies(&model, &policies, &init, 0.05, 200, 9, Sense::Min).unwrap();
        assert_eq!(min.best, 0);
        assert_eq!(min.estimates[1], min.estimates[3]);
        // CRN: drift shifts every path by exactly a * T
        assert!((min.estimates[2].mean - min.estimates[1].mean - 1.0).abs() < 1e-12);
        let max = value_over_policies(&model, &policies, &init, 0.05, 200, 9, Sense::Max).unwrap();
        assert_eq!(max.best, 2);
        assert_eq!(max.bound_label(), "lower bound");
        let single = value_over_policies(&model, &policies[1..2], &init, 0.05, 200, 9, Sense::Min).unwrap();
        assert_eq!(single.best, 0);
        assert_eq!(single.estimates[0], min.estimates[1]);
    }
}
