use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{parabolic_norm, ParabolicPoint, SeparatingFamily};
use crate::osde::{simulate_with, ControlPolicy, OsdeError, OsdeModel, SimOptions, SimPath, StopRule};
use crate::stats::{loglog_slope, McEstimate};

use super::cost::cost_samples;

/// Truncation used for the running cylindrical gap along coupled paths;
/// the omitted members are covered by their closed-form tail bound.
pub const COUPLED_TRUNCATION: usize = 64;

/// Constants of the stability estimates for coupled paths.
///
/// `C1 = 3 exp(C T*)` overflows for moderate `c* T`; it is carried in log
/// form and the plain value is `None` when it is not representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub c_star: f64,
    pub horizon: f64,
    pub c0: f64,
    /// `T* = c* T`.
    pub t_star: f64,
    /// `C = c*^2 [3 (T* + 4) + 2 (T + T*)^2]`.
    pub c: f64,
    pub log_c1: f64,
    pub c1: Option<f64>,
    /// `C2 = c* sqrt(2 (c0^-2 + c*^2 T*^2 C1))`.
    pub log_c2: f64,
    pub c2: Option<f64>,
}

impl StabilityConstants {
    pub fn new(c_star: f64, horizon: f64, c0: f64) -> Self {
        let t_star = c_star * horizon;
        let c = c_star * c_star * (3.0 * (t_star + 4.0) + 2.0 * (horizon + t_star).powi(2));
        let log_c1 = 3f64.ln() + c * t_star;
        // ln(c0^-2 + c*^2 T*^2 C1) without forming C1
        let a = -2.0 * c0.ln();
        let b = 2.0 * (c_star * t_star).ln() + log_c1;
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        let log_inner = hi + (lo - hi).exp().ln_1p();
        let log_c2 = c_star.ln() + 0.5 * (2f64.ln() + log_inner);
        let finite = |l: f64| Some(l.exp()).filter(|v| v.is_finite());
        Self { c_star, horizon, c0, t_star, c, log_c1, c1: finite(log_c1), log_c2, c2: finite(log_c2) }
    }

    pub fn for_model(model: &OsdeModel, family: &SeparatingFamily) -> Self {
        Self::new(model.c_star(), model.horizon(), family.c0())
    }
}

/// Checks `lhs <= exp(log_factor) * scale` without overflow.
fn bounded_by(lhs: f64, log_factor: f64, scale: f64) -> bool {
    if lhs <= 0.0 {
        return true;
    }
    if scale <= 0.0 {
        return false;
    }
    lhs.ln() <= log_factor + scale.ln()
}

/// Running `(O - O')(f_k)` for `k <= K` plus the state gap, on a shared grid.
struct CoupledGap<'a> {
    family: &'a SeparatingFamily,
    k: usize,
    tail: f64,
    coords: Vec<f64>,
    /// Bound on the total variation of `O - O'`.
    variation: f64,
    buf: Vec<f64>,
}

impl<'a> CoupledGap<'a> {
    fn new(family: &'a SeparatingFamily, a: &SimPath, b: &SimPath) -> Result<Self, OsdeError> {
        let k = COUPLED_TRUNCATION.min(family.k_max());
        let (ia, ib) = (a.occupation.prefix(a.n_initial), b.occupation.prefix(b.n_initial));
        let pa = family.pairings(&ia, k)?;
        let pb = family.pairings(&ib, k)?;
        let coords = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        let variation = if ia == ib { 0.0 } else { ia.total_mass() + ib.total_mass() };
        Ok(Self { family, k, tail: family.tail_sup_sq(k).sqrt(), coords, variation, buf: vec![0.0; k + 1] })
    }

    /// Upper bound on `rho^2` at the current node: the truncated cylindrical
    /// gap plus the tail bound, and the state gap.
    fn rho_sq_bound(&self, xa: &[f64], xb: &[f64]) -> f64 {
        let cyl = self.coords.iter().map(|v| v * v).sum::<f64>().sqrt() + self.tail * self.variation;
        let dx2: f64 = xa.iter().zip(xb).map(|(p, q)| (p - q) * (p - q)).sum();
        cyl * cyl + dx2
    }

    fn deposit_pair(&mut self, xa: &[f64], wa: f64, xb: &[f64], wb: f64) {
        for (x, w) in [(xa, wa), (xb, -wb)] {
            self.family.eval_upto(self.k, x, &mut self.buf);
            for (c, f) in self.coords.iter_mut().zip(&self.buf) {
                *c += w * f;
            }
        }
        self.variation += if xa == xb { (wa - wb).abs() } else { wa + wb };
    }
}

/// Grönwall check: `E[sup_{t <= tau'} rho^2]` against `C1 rho_0^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub lhs: McEstimate,
    pub rho0: f64,
    pub log_rhs: f64,
    pub rhs: Option<f64>,
    pub constants: StabilityConstants,
    pub pass: bool,
}

/// `sup` over the nodes `t_n <= tau'` of the coupled `rho^2` bound, where
/// the unprimed path is continued past its own exit until `tau'`.
#[allow(clippy::too_many_arguments)]
fn coupled_sup_rho_sq(
    model: &OsdeModel,
    family: &SeparatingFamily,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    init_other: &ParabolicPoint,
    dt: f64,
    seed: u64,
    index: u64,
) -> Result<f64, OsdeError> {
    let other = simulate_with(model, policy, init_other, dt, seed, index, SimOptions::default(), None)?;
    let opts = SimOptions { stop: StopRule::Until(other.t_final), ..SimOptions::default() };
    let path = simulate_with(model, policy, init, dt, seed, index, opts, Some(&other.controls))?;
    let mut gap = CoupledGap::new(family, &path, &other)?;
    let wa = &path.occupation.weights()[path.n_initial..];
    let wb = &other.occupation.weights()[other.n_initial..];
    let n = path.n_steps.min(other.n_steps);
    let mut sup = 0.0_f64;
    for i in 0..=n {
        let xa = if i == path.n_steps { &path.x_final[..] } else { path.x_at(i) };
        let xb = if i == other.n_steps { &other.x_final[..] } else { other.x_at(i) };
        sup = sup.max(gap.rho_sq_bound(xa, xb));
        if i < n {
            gap.deposit_pair(xa, wa[i], xb, wb[i]);
        }
    }
    Ok(sup)
}

#[allow(clippy::too_many_arguments)]
pub fn gronwall_diagnostic(
    model: &OsdeModel,
    family: &SeparatingFamily,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    init_other: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<GronwallReport, OsdeError> {
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            coupled_sup_rho_sq(model, family, policy, init, init_other, dt, seed, i)
                .map_err(|e| OsdeError::Path { index: i, source: Box::new(e) })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;
    let lhs = McEstimate::from_samples(&samples, seed);
    let rho0 = parabolic_norm(init, init_other, family, family.k_max())?;
    let constants = StabilityConstants::for_model(model, family);
    let log_rhs = constants.log_c1 + 2.0 * rho0.ln();
    let rhs = constants.c1.map(|c1| c1 * rho0 * rho0).filter(|v| v.is_finite());
    let pass = bounded_by(lhs.mean + 3.0 * lhs.stderr, constants.log_c1, rho0 * rho0);
    Ok(GronwallReport { lhs, rho0, log_rhs, rhs, constants, pass })
}

/// Exit-time comparison for one coupled pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPair {
    pub path_index: u64,
    pub tau: f64,
    pub tau_other: f64,
    /// `sup |Lambda - Lambda'|` over the common grid up to `min(tau, tau')`.
    pub clock_gap: f64,
    pub bound: f64,
}

impl ExitPair {
    pub fn holds(&self) -> bool {
        (self.tau - self.tau_other).abs() <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeReport {
    /// Estimate of `E|tau - tau'|^2`; its square root is the L2 distance.
    pub sq_diff: McEstimate,
    pub l2_diff: f64,
    pub rho0: f64,
    pub log_rhs: f64,
    pub rhs: Option<f64>,
    pub violations: usize,
    pub max_tau: f64,
    pub exit_bound_violations: usize,
    pub pathwise_pass: bool,
    pub constants: StabilityConstants,
}

/// Clock value at time `t` on a recorded path: linear inside each step,
/// since the rate is frozen over the step.
fn clock_at(path: &SimPath, t: f64) -> f64 {
    let n = path.times.partition_point(|s| *s <= t).saturating_sub(1);
    if n >= path.n_steps {
        return path.clock_final;
    }
    path.clock[n] + path.rates[n] * (t - path.times[n])
}

pub fn coupled_exit_pair(a: &SimPath, b: &SimPath, c_star: f64, dt: f64) -> ExitPair {
    let tau = a.tau.unwrap_or(f64::NAN);
    let tau_other = b.tau.unwrap_or(f64::NAN);
    let n = a.n_steps.min(b.n_steps);
    let mut gap = 0.0_f64;
    for i in 0..=n {
        gap = gap.max((a.clock[i] - b.clock[i]).abs());
    }
    let t_min = tau.min(tau_other);
    gap = gap.max((clock_at(a, t_min) - clock_at(b, t_min)).abs());
    ExitPair { path_index: a.path_index, tau, tau_other, clock_gap: gap, bound: c_star * gap + 2.0 * dt }
}

#[allow(clippy::too_many_arguments)]
pub fn exit_time_diagnostic(
    model: &OsdeModel,
    family: &SeparatingFamily,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    init_other: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(ExitTimeReport, Vec<ExitPair>), OsdeError> {
    let pairs = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            crate::osde::simulate_coupled(model, model, policy, init, init_other, dt, seed, i)
                .map(|(a, b)| coupled_exit_pair(&a, &b, model.c_star(), dt))
                .map_err(|e| OsdeError::Path { index: i, source: Box::new(e) })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<ExitPair>, _>>()?;
    let sq: Vec<f64> = pairs.iter().map(|p| (p.tau - p.tau_other).powi(2)).collect();
    let sq_diff = McEstimate::from_samples(&sq, seed);
    let violations = pairs.iter().filter(|p| !p.holds()).count();
    let max_tau = pairs.iter().map(|p| p.tau.max(p.tau_other)).fold(0.0, f64::max);
    let cap = model.exit_bound() + dt;
    let exit_bound_violations = pairs.iter().filter(|p| p.tau > cap || p.tau_other > cap).count();
    let rho0 = parabolic_norm(init, init_other, family, family.k_max())?;
    let constants = StabilityConstants::for_model(model, family);
    let log_rhs = constants.log_c2 + rho0.ln();
    let rhs = constants.c2.map(|c2| c2 * rho0).filter(|v| v.is_finite());
    let report = ExitTimeReport {
        l2_diff: sq_diff.mean.sqrt(),
        sq_diff,
        rho0,
        log_rhs,
        rhs,
        violations,
        max_tau,
        exit_bound_violations,
        pathwise_pass: violations == 0 && exit_bound_violations == 0,
        constants,
    };
    Ok((report, pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub rho: f64,
    /// `|J(base) - J(perturbed)|`, estimated from per-path differences.
    pub abs_diff: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub rows: Vec<HolderRow>,
    /// Fitted slope of `log |Delta J|` against `log rho`.
    pub slope: Option<f64>,
}

impl HolderReport {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.slope.is_some_and(|s| (lo..=hi).contains(&s))
    }
}

/// Cost differences between a base state and perturbed states under common
/// random numbers. Diagnostic only: the Hölder constant is not computed.
#[allow(clippy::too_many_arguments)]
pub fn holder_probe(
    model: &OsdeModel,
    family: &SeparatingFamily,
    policy: &ControlPolicy,
    base: &ParabolicPoint,
    perturbations: &[ParabolicPoint],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<HolderReport, OsdeError> {
    let base_costs = cost_samples(model, policy, base, dt, n_paths, seed)?;
    let mut rows = Vec::with_capacity(perturbations.len());
    for p in perturbations {
        let costs = cost_samples(model, policy, p, dt, n_paths, seed)?;
        let diffs: Vec<f64> = costs.iter().zip(&base_costs).map(|(a, b)| a - b).collect();
        let est = McEstimate::from_samples(&diffs, seed);
        rows.push(HolderRow { rho: parabolic_norm(base, p, family, family.k_max())?, abs_diff: est.mean.abs(), stderr: est.stderr });
    }
    let slope = loglog_slope(&rows.iter().map(|r| r.rho).collect::<Vec<_>>(), &rows.iter().map(|r| r.abs_diff).collect::<Vec<_>>());
    Ok(HolderReport { rows, slope })
}
