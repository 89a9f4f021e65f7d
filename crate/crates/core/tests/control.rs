use std::sync::Arc;

use occupied::control::{
    cil_trace_check, estimate_cost, exit_time_diagnostic, gronwall_diagnostic, hamiltonian, hamiltonian_with_sense,
    is_admissible, sample_admissible_pairs, value_over_policies, GammaPair, JetPoint, Sense, StabilityConstants,
};
use occupied::measure::parabolic_norm;
use occupied::osde::{Clock, ControlPolicy, ControlSet, OsdeModel};
use occupied::pricing::{uvm_model, PayoffSpec};
use occupied::{OccupationMeasure, ParabolicPoint, SeparatingFamily};
use proptest::prelude::*;

/// Controlled drift and volatility on a custom clock, no running cost.
fn controlled() -> OsdeModel {
    OsdeModel::new(1, 1.0, 2.0)
        .unwrap()
        .with_control_set(ControlSet::interval(-1.0, 1.0))
        .with_drift(Arc::new(|_, x: &[f64], a, b: &mut [f64]| b[0] = a - 0.5 * x[0]))
        .with_diffusion(Arc::new(|_, x: &[f64], a, s: &mut [f64]| s[0] = 0.6 + 0.3 * a * a + 0.1 * x[0].sin()))
        .with_clock(Clock::Custom(Arc::new(|v, _, a| 1.0 + 0.5 * a * a + 0.1 * v.mass)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positively_homogeneous_without_running_cost(
        theta in -3.0..3.0f64, delta in -3.0..3.0f64, gamma in -3.0..3.0f64,
        x in -2.0..2.0f64, mass in 0.0..0.9f64, c in 0.01..10.0f64,
    ) {
        let model = controlled();
        let o = if mass > 0.0 { OccupationMeasure::dirac(&[0.0], mass).unwrap() } else { OccupationMeasure::new(1).unwrap() };
        let p = ParabolicPoint::new(o, vec![x]).unwrap();
        let jet = JetPoint::new(theta, vec![delta], vec![gamma]).unwrap();
        for sense in [Sense::Min, Sense::Max] {
            let h = hamiltonian_with_sense(&model, &p, &jet, sense).unwrap();
            let hc = hamiltonian_with_sense(&model, &p, &jet.scaled(c), sense).unwrap();
            prop_assert_eq!(h.argmin, hc.argmin);
            prop_assert!((hc.value - c * h.value).abs() <= 1e-12 * (1.0 + hc.value.abs()));
        }
    }

    #[test]
    fn nonincreasing_in_gamma(
        theta in -3.0..3.0f64, delta in -3.0..3.0f64, gamma in -3.0..3.0f64, bump in 0.0..3.0f64, x in -2.0..2.0f64,
    ) {
        // H = -inf_a (.. + sigma^2 Gamma / 2): raising Gamma can only lower H.
        let model = controlled();
        let p = ParabolicPoint::at(vec![x]).unwrap();
        let low = JetPoint::new(theta, vec![delta], vec![gamma]).unwrap();
        let high = JetPoint::new(theta, vec![delta], vec![gamma + bump]).unwrap();
        for sense in [Sense::Min, Sense::Max] {
            let a = hamiltonian_with_sense(&model, &p, &low, sense).unwrap().value;
            let b = hamiltonian_with_sense(&model, &p, &high, sense).unwrap().value;
            prop_assert!(b <= a + 1e-12);
        }
    }

    #[test]
    fn stability_constants_follow_their_closed_form(c_star in 1.0..4.0f64, horizon in 0.1..3.0f64, c0 in 0.05..0.9f64) {
        let k = StabilityConstants::new(c_star, horizon, c0);
        let t_star = c_star * horizon;
        let c = c_star.powi(2) * (3.0 * (t_star + 4.0) + 2.0 * (horizon + t_star).powi(2));
        prop_assert!((k.c - c).abs() <= 1e-12 * c);
        prop_assert!((k.log_c1 - (3f64.ln() + c * t_star)).abs() <= 1e-12 * k.log_c1);
        // C2 = c* sqrt(2 (c0^-2 + (c* T*)^2 C1)), evaluated in log space.
        let inner = (-2.0 * c0.ln()).exp() + (2.0 * (c_star * t_star).ln() + k.log_c1).exp();
        if inner.is_finite() {
            prop_assert!((k.log_c2 - (c_star.ln() + 0.5 * (2.0 * inner).ln())).abs() <= 1e-10 * k.log_c2.abs().max(1.0));
        }
    }
}

#[test]
fn cost_at_the_boundary_is_the_terminal_value() {
    let model = controlled()
        .with_terminal_cost(Arc::new(|o: &OccupationMeasure, x: &[f64]| o.pair(|y| y[0].cos()) + x[0] * x[0]))
        .with_running_cost(Arc::new(|_, _, a| 1.0 + a));
    let o = OccupationMeasure::from_particles(1, [([0.3].as_slice(), 0.4), ([-1.0].as_slice(), 0.6)]).unwrap();
    let p = ParabolicPoint::new(o.clone(), vec![0.7]).unwrap();
    let est = estimate_cost(&model, &ControlPolicy::Constant(0.5), &p, 0.01, 1000, 3).unwrap();
    assert_eq!(est.mean, 0.4 * 0.3f64.cos() + 0.6 * 1f64.cos() + 0.49);
    assert_eq!(est.stderr, 0.0);
}

#[test]
fn policy_search_picks_the_cheapest_under_common_noise() {
    // Running cost (a - 0.3)^2 + x^2 on a standard clock: a = 0.3 is best.
    let model = OsdeModel::new(1, 0.5, 1.0)
        .unwrap()
        .with_control_set(ControlSet::interval(-1.0, 1.0))
        .with_diffusion(Arc::new(|_, _, _, s: &mut [f64]| s[0] = 1.0))
        .with_running_cost(Arc::new(|_, x: &[f64], a| (a - 0.3).powi(2) + x[0] * x[0]));
    let policies: Vec<ControlPolicy> = [-1.0, 0.0, 0.3, 0.8].into_iter().map(ControlPolicy::Constant).collect();
    let p = ParabolicPoint::at(vec![0.0]).unwrap();
    let min = value_over_policies(&model, &policies, &p, 0.01, 400, 8, Sense::Min).unwrap();
    assert_eq!(min.best, 2);
    assert_eq!(min.bound_label(), "upper bound");
    let max = value_over_policies(&model, &policies, &p, 0.01, 400, 8, Sense::Max).unwrap();
    assert_eq!(max.best, 0);
    // The noise is shared, so cost differences are exactly the control
    // penalty: (1.69 - 0.09) over a budget of 0.5.
    let d = min.estimates[0].mean - min.estimates[1].mean;
    assert!((d - 0.8).abs() < 1e-9, "{d}");
    assert!(value_over_policies(&model, &[], &p, 0.01, 10, 0, Sense::Min).is_err());
}

#[test]
fn trace_inequality_on_the_band_model() {
    let model = uvm_model(&PayoffSpec::call(100.0), (0.1, 0.3), 0.25, 5).unwrap();
    let fam = SeparatingFamily::with_defaults(1).unwrap();
    for eps in [0.1, 0.5, 2.0] {
        let (pairs, draws) = sample_admissible_pairs(1, eps, 50, 9, 100_000);
        assert_eq!(pairs.len(), 50, "eps = {eps} after {draws} draws");
        assert!(pairs.iter().all(|p| is_admissible(p, eps)));
        for (s, s2) in [(100.0, 101.0), (50.0, 50.5), (80.0, 80.0)] {
            let p = ParabolicPoint::at(vec![s]).unwrap();
            let p2 = ParabolicPoint::at(vec![s2]).unwrap();
            let rho = parabolic_norm(&p, &p2, &fam, fam.k_max()).unwrap();
            assert!(rho <= 1.0);
            let rep = cil_trace_check(&model, &p, &p2, eps, &pairs, rho).unwrap();
            assert_eq!((rep.violations, rep.inadmissible), (0, 0), "{rep:?}");
            assert_eq!(rep.checks, 50 * 5);
            assert!(rep.pass && rep.max_excess <= 0.0);
        }
    }
}

#[test]
fn inadmissible_pairs_are_skipped_and_counted() {
    let model = uvm_model(&PayoffSpec::call(1.0), (0.1, 0.3), 1.0, 3).unwrap();
    let big = |v: f64| nalgebra::DMatrix::from_element(1, 1, v);
    let pairs = vec![GammaPair { gamma: big(100.0), gamma_other: big(-100.0) }, GammaPair { gamma: big(0.0), gamma_other: big(0.0) }];
    let p = ParabolicPoint::at(vec![1.0]).unwrap();
    let rep = cil_trace_check(&model, &p, &p, 1.0, &pairs, 0.0).unwrap();
    assert_eq!(rep.inadmissible, 1);
    assert_eq!(rep.checks, 3);
}

#[test]
fn coupled_diagnostics_hold_on_a_small_ensemble() {
    let model = OsdeModel::new(1, 1.0, 4.0)
        .unwrap()
        .with_clock(Clock::QuadraticVariation)
        .with_diffusion(Arc::new(|_, x: &[f64], _, s: &mut [f64]| s[0] = 0.75 + 0.25 * x[0].sin()));
    let fam = SeparatingFamily::with_defaults(1).unwrap();
    let idle = ControlPolicy::Constant(0.0);
    let a = ParabolicPoint::at(vec![0.0]).unwrap();
    let b = ParabolicPoint::at(vec![0.1]).unwrap();
    let (rep, pairs) = exit_time_diagnostic(&model, &fam, &idle, &a, &b, 2f64.powi(-7), 500, 2).unwrap();
    assert!(rep.pathwise_pass, "{rep:?}");
    assert_eq!(pairs.len(), 500);
    assert!(rep.max_tau <= 4.0 + 2f64.powi(-7));
    let g = gronwall_diagnostic(&model, &fam, &idle, &a, &b, 2f64.powi(-7), 200, 2).unwrap();
    assert!(g.pass, "{g:?}");
    assert!((g.rho0 - 0.1).abs() < 1e-15);
    assert!(g.lhs.mean >= 0.01 - 1e-12, "the sup includes the initial gap");
}

#[test]
fn hamiltonian_rejects_mismatched_jets() {
    let p = ParabolicPoint::at(vec![0.0]).unwrap();
    let jet = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.0; 4]).unwrap();
    assert!(hamiltonian(&controlled(), &p, &jet).is_err());
}
