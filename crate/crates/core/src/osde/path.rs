use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::measure::{OccupationMeasure, ParabolicPoint};

use super::model::{Control, ControlPolicy, OsdeModel, StateView};
use super::OsdeError;

/// When a simulation stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// At the exit time: the first time the clock reaches the budget.
    Budget,
    /// At calendar time `t_end`, ignoring the budget. The exit time is still
    /// recorded if the clock crosses the budget on the way.
    Until(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub stop: StopRule,
    /// Keep the per-step coefficient trace. Summaries need only the exit
    /// state, occupation measure and costs.
    pub record: bool,
    /// Steps allowed per unit of `c* T / dt` before the path is abandoned.
    pub step_cap_factor: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { stop: StopRule::Budget, record: true, step_cap_factor: 10.0 }
    }
}

/// One discretized trajectory.
///
/// Node `n` carries `times[n]`, `x[n*d..(n+1)*d]` and `clock[n]`; step `n`
/// (between nodes `n` and `n+1`) carries its length, control, Brownian
/// increment and the coefficients evaluated at node `n`. The per-node and
/// per-step vectors are empty when the path was simulated without
/// recording, except for the exit data.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub dim: usize,
    pub seed: u64,
    pub path_index: u64,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub clock: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub controls: Vec<Control>,
    pub dw: Vec<f64>,
    pub rates: Vec<f64>,
    pub drifts: Vec<f64>,
    /// Row-major `d x d` per step.
    pub diffusions: Vec<f64>,
    /// Initial atoms followed by one particle per step.
    pub occupation: OccupationMeasure,
    pub n_initial: usize,
    /// Exit time, `None` if the budget was not reached (only possible with
    /// [`StopRule::Until`]).
    pub tau: Option<f64>,
    pub n_steps: usize,
    pub t_final: f64,
    pub x_final: Vec<f64>,
    pub clock_final: f64,
    /// Rectangle-rule `int_0^t l dt` up to the final node.
    pub running_cost: f64,
    /// Tracked pairings at the final node.
    pub coords_final: Vec<f64>,
}

impl SimPath {
    /// State at node `n`, with the occupation measure built from the initial
    /// atoms and the first `n` deposits.
    pub fn state_at(&self, n: usize) -> ParabolicPoint {
        let d = self.dim;
        let x = if n == self.n_steps { self.x_final.clone() } else { self.x[n * d..(n + 1) * d].to_vec() };
        ParabolicPoint { measure: self.occupation.prefix(self.n_initial + n), x }
    }

    pub fn final_state(&self) -> ParabolicPoint {
        ParabolicPoint { measure: self.occupation.clone(), x: self.x_final.clone() }
    }

    pub fn x_at(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    pub fn is_recorded(&self) -> bool {
        self.times.len() == self.n_steps + 1
    }

    /// CSV trace with one row per node: `t, x_1..x_d, Lambda, a` where `a`
    /// is the control applied on the following step (empty at the last node).
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<(), OsdeError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        header.push("lambda_clock".into());
        header.push("a".into());
        w.write_record(&header)?;
        for n in 0..self.times.len() {
            let mut row = vec![format!("{:e}", self.times[n])];
            row.extend(self.x_at(n).iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.clock[n]));
            row.push(self.controls.get(n).map(|a| format!("{a:e}")).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Brownian increments for a path: ChaCha8 keyed by `seed`, stream
/// `path_index`, `d` standard normals per step in order.
pub(crate) fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// The kernel behind every simulation entry point. `replay` overrides the
/// policy with a recorded control stream; past its end the last control is
/// held.
#[allow(clippy::too_many_arguments)]
pub fn simulate_with(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    seed: u64,
    path_index: u64,
    options: SimOptions,
    replay: Option<&[Control]>,
) -> Result<SimPath, OsdeError> {
    let d = model.dim();
    if init.dim() != d {
        return Err(OsdeError::DimensionMismatch { expected: d, found: init.dim() });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OsdeError::InvalidStep(dt));
    }
    let horizon = model.horizon();
    let mass0 = init.measure.total_mass();
    if mass0 > horizon {
        return Err(OsdeError::InitialMassExceedsBudget { mass: mass0, horizon });
    }
    if let StopRule::Until(t_end) = options.stop {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(OsdeError::InvalidStep(t_end));
        }
    }

    let floor = model.ellipticity_floor();
    let cap = match options.stop {
        StopRule::Budget => (options.step_cap_factor * model.exit_bound() / dt).ceil() as usize + 2,
        StopRule::Until(t_end) => (t_end / dt).ceil() as usize + 2,
    };
    let expected = match options.stop {
        StopRule::Budget => ((horizon - mass0) * model.c_star() / dt).ceil() as usize + 2,
        StopRule::Until(t_end) => (t_end / dt).ceil() as usize + 2,
    }
    .min(cap);

    let mut rng = path_rng(seed, path_index);
    let mut occupation = OccupationMeasure::with_capacity(d, init.measure.len() + expected)?;
    for (y, w) in init.measure.particles() {
        occupation.push(y, w)?;
    }
    let mut coords = model.tracked_coords(&init.measure);

    let mut path = SimPath {
        dim: d,
        seed,
        path_index,
        times: Vec::new(),
        x: Vec::new(),
        clock: Vec::new(),
        step_sizes: Vec::new(),
        controls: Vec::new(),
        dw: Vec::new(),
        rates: Vec::new(),
        drifts: Vec::new(),
        diffusions: Vec::new(),
        occupation: OccupationMeasure::new(d)?,
        n_initial: init.measure.len(),
        tau: None,
        n_steps: 0,
        t_final: 0.0,
        x_final: Vec::new(),
        clock_final: 0.0,
        running_cost: 0.0,
        coords_final: Vec::new(),
    };
    if options.record {
        path.times.reserve(expected + 1);
        path.x.reserve((expected + 1) * d);
        path.clock.reserve(expected + 1);
        path.dw.reserve(expected * d);
        path.diffusions.reserve(expected * d * d);
    }

    let mut x = init.x.clone();
    let mut t = 0.0_f64;
    let mut lam_clock = mass0;
    let mut running = 0.0_f64;
    let mut drift = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    let mut n = 0usize;

    if mass0 >= horizon {
        path.tau = Some(0.0);
    }

    loop {
        if options.record {
            path.times.push(t);
            path.x.extend_from_slice(&x);
            path.clock.push(lam_clock);
        }
        let done = match options.stop {
            StopRule::Budget => path.tau.is_some(),
            StopRule::Until(t_end) => t >= t_end,
        };
        if done {
            break;
        }
        if n >= cap {
            return Err(OsdeError::NoExit { steps: n, t });
        }

        let view = StateView { measure: &occupation, mass: lam_clock, coords: &coords };
        let a = match replay {
            Some(stream) if !stream.is_empty() => stream[n.min(stream.len() - 1)],
            _ => policy.control(t, &x, &view),
        };
        if !model.control_set().contains(a) {
            return Err(OsdeError::ControlOutsideSet { step: n, control: a });
        }
        model.drift_into(&view, &x, a, &mut drift);
        model.diffusion_into(&view, &x, a, &mut sigma);
        let rate = model.rate_with(&view, &x, a, &sigma);
        if !(rate >= floor) || !rate.is_finite() {
            return Err(OsdeError::Ellipticity { step: n, t, rate, floor });
        }
        let ell = model.running_cost(&view, &x, a);

        // Step length and deposited weight.
        let full = rate * dt;
        let (h, weight, exits) = match options.stop {
            StopRule::Budget if lam_clock + full >= horizon => {
                let remaining = horizon - lam_clock;
                ((remaining / rate).min(dt), remaining, true)
            }
            StopRule::Budget => (dt, full, false),
            StopRule::Until(t_end) => {
                let h = dt.min(t_end - t);
                (h, rate * h, false)
            }
        };

        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let sqrt_h = h.sqrt();

        occupation.push(&x, weight)?;
        for (c, f) in coords.iter_mut().zip(model.tracked()) {
            *c += weight * f(&x);
        }
        running += ell * h;

        if options.record {
            path.step_sizes.push(h);
            path.controls.push(a);
            path.rates.push(rate);
            path.drifts.extend_from_slice(&drift);
            path.diffusions.extend_from_slice(&sigma);
            path.dw.extend(z.iter().map(|zi| sqrt_h * zi));
        }

        let x_prev = x.clone();
        for i in 0..d {
            let mut dx = drift[i] * h;
            for j in 0..d {
                dx += sigma[i * d + j] * sqrt_h * z[j];
            }
            x[i] = x_prev[i] + dx;
        }
        if x.iter().any(|v| !v.is_finite()) || !running.is_finite() {
            return Err(OsdeError::BlowUp { step: n, t });
        }

        if path.tau.is_none() && lam_clock + full >= horizon {
            path.tau = Some(t + (horizon - lam_clock) / rate);
        }
        t += h;
        lam_clock = if exits { horizon } else { lam_clock + weight };
        n += 1;
    }

    path.n_steps = n;
    path.t_final = t;
    path.x_final = x;
    path.clock_final = lam_clock;
    path.running_cost = running;
    path.coords_final = coords;
    path.occupation = occupation;
    Ok(path)
}

/// Simulates one path until its exit time, recording the full trace.
pub fn simulate(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    seed: u64,
    path_index: u64,
) -> Result<SimPath, OsdeError> {
    simulate_with(model, policy, init, dt, seed, path_index, SimOptions::default(), None)
}

/// Two paths driven by the same Brownian increments and the same control
/// stream: the second replays the controls chosen on the first.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled(
    model: &OsdeModel,
    model_other: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    init_other: &ParabolicPoint,
    dt: f64,
    seed: u64,
    path_index: u64,
) -> Result<(SimPath, SimPath), OsdeError> {
    if model.dim() != model_other.dim() {
        return Err(OsdeError::DimensionMismatch { expected: model.dim(), found: model_other.dim() });
    }
    let first = simulate(model, policy, init, dt, seed, path_index)?;
    let second = simulate_with(
        model_other,
        policy,
        init_other,
        dt,
        seed,
        path_index,
        SimOptions::default(),
        Some(&first.controls),
    )?;
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::osde::Clock;

    fn scalar_diffusion(s: f64) -> crate::osde::DiffusionFn {
        Arc::new(move |_, _, _, out: &mut [f64]| out[0] = s)
    }

    #[test]
    fn standard_clock_exits_at_horizon() {
        let model = OsdeModel::brownian(1, 1.0).unwrap();
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let path = simulate(&model, &ControlPolicy::Constant(0.0), &init, 1.0 / 64.0, 3, 0).unwrap();
        assert_eq!(path.tau, Some(1.0));
        assert_eq!(path.t_final, 1.0);
        assert_eq!(path.clock_final, 1.0);
        assert_eq!(path.n_steps, 64);
        assert_eq!(path.occupation.len(), 64);
        for n in 0..=path.n_steps {
            assert_eq!(path.clock[n], path.times[n]);
        }
    }

    #[test]
    fn frozen_path_occupies_a_single_point() {
        let model = OsdeModel::new(2, 0.75, 1.0).unwrap();
        let init = ParabolicPoint::at(vec![0.5, -1.0]).unwrap();
        let path = simulate(&model, &ControlPolicy::Constant(0.0), &init, 0.1, 1, 0).unwrap();
        assert_eq!(path.x_final, vec![0.5, -1.0]);
        let compact = path.occupation.compact();
        assert_eq!(compact.len(), 1);
        assert_eq!(compact.position(0), &[0.5, -1.0]);
        assert!((compact.total_mass() - 0.75).abs() < 1e-15);
        assert!((path.tau.unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn variance_clock_with_constant_volatility() {
        let model = OsdeModel::new(1, 0.04, 25.0)
            .unwrap()
            .with_clock(Clock::QuadraticVariation)
            .with_diffusion(scalar_diffusion(0.2));
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let path = simulate(&model, &ControlPolicy::Constant(0.0), &init, 1.0 / 256.0, 9, 4).unwrap();
        assert!((path.tau.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(path.clock_final, 0.04);
    }

    #[test]
    fn mass_bookkeeping_and_clock_monotonicity() {
        let model = OsdeModel::new(1, 0.5, 4.0)
            .unwrap()
            .with_clock(Clock::QuadraticVariation)
            .with_diffusion(Arc::new(|_, x: &[f64], _, s: &mut [f64]| s[0] = 0.75 + 0.25 * x[0].sin()));
        let init = ParabolicPoint::new(OccupationMeasure::dirac(&[0.3], 0.1).unwrap(), vec![0.3]).unwrap();
        let path = simulate(&model, &ControlPolicy::Constant(0.0), &init, 0.01, 5, 2).unwrap();
        for n in 0..=path.n_steps {
            let mass = path.occupation.prefix(path.n_initial + n).total_mass();
            assert!((mass - path.clock[n]).abs() <= 1e-15 * path.clock[n].max(1.0), "node {n}");
        }
        for w in path.clock.windows(2) {
            assert!(w[1] > w[0]);
        }
        for n in 0..path.n_steps - 1 {
            assert_eq!(path.clock[n + 1], path.clock[n] + path.rates[n] * path.step_sizes[n]);
        }
        assert_eq!(path.clock_final, 0.5);
        assert!(path.tau.unwrap() <= model.exit_bound() + 0.01);
    }

    #[test]
    fn paths_are_reproducible_and_streams_differ() {
        let model = OsdeModel::brownian(2, 1.0).unwrap();
        let init = ParabolicPoint::at(vec![0.0, 0.0]).unwrap();
        let p = ControlPolicy::Constant(0.0);
        let a = simulate(&model, &p, &init, 0.01, 42, 7).unwrap();
        let b = simulate(&model, &p, &init, 0.01, 42, 7).unwrap();
        let c = simulate(&model, &p, &init, 0.01, 42, 8).unwrap();
        assert_eq!(a.dw, b.dw);
        assert_eq!(a.x, b.x);
        assert_ne!(a.dw, c.dw);
    }

    #[test]
    fn coupled_paths_with_equal_inits_coincide() {
        let model = OsdeModel::brownian(1, 1.0).unwrap().with_clock(Clock::QuadraticVariation);
        let init = ParabolicPoint::at(vec![0.2]).unwrap();
        let (a, b) = simulate_coupled(&model, &model, &ControlPolicy::Constant(0.0), &init, &init, 0.01, 1, 3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.tau, b.tau);
    }

    #[test]
    fn coupled_paths_without_noise_follow_the_drift() {
        let model = OsdeModel::new(1, 1.0, 1.0).unwrap().with_drift(Arc::new(|_, _, _, b: &mut [f64]| b[0] = 2.0));
        let p0 = ParabolicPoint::at(vec![0.0]).unwrap();
        let p1 = ParabolicPoint::at(vec![1.0]).unwrap();
        let (a, b) = simulate_coupled(&model, &model, &ControlPolicy::Constant(0.0), &p0, &p1, 0.125, 1, 0).unwrap();
        for n in 0..=a.n_steps {
            assert!((b.x_at(n)[0] - a.x_at(n)[0] - 1.0).abs() < 1e-15);
            assert!((a.x_at(n)[0] - 2.0 * a.times[n]).abs() < 1e-14);
        }
    }

    #[test]
    fn errors_are_reported() {
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let p = ControlPolicy::Constant(0.0);
        let bm = OsdeModel::brownian(1, 1.0).unwrap();
        assert!(matches!(simulate(&bm, &p, &init, 0.0, 0, 0), Err(OsdeError::InvalidStep(_))));
        let weak = OsdeModel::new(1, 1.0, 2.0)
            .unwrap()
            .with_clock(Clock::QuadraticVariation)
            .with_diffusion(scalar_diffusion(0.5));
        assert!(matches!(simulate(&weak, &p, &init, 0.1, 0, 0), Err(OsdeError::Ellipticity { .. })));
        let explode = OsdeModel::new(1, 1.0, 1.0)
            .unwrap()
            .with_drift(Arc::new(|_, x: &[f64], _, b: &mut [f64]| b[0] = 1e200 * (1.0 + x[0] * x[0])));
        assert!(matches!(simulate(&explode, &p, &init, 0.1, 0, 0), Err(OsdeError::BlowUp { .. })));
        assert!(matches!(
            simulate(&bm, &ControlPolicy::Constant(1.0), &init, 0.1, 0, 0),
            Err(OsdeError::ControlOutsideSet { .. })
        ));
        let heavy = ParabolicPoint::new(OccupationMeasure::dirac(&[0.0], 2.0).unwrap(), vec![0.0]).unwrap();
        assert!(matches!(simulate(&bm, &p, &heavy, 0.1, 0, 0), Err(OsdeError::InitialMassExceedsBudget { .. })));
    }

    #[test]
    fn boundary_start_exits_immediately() {
        let bm = OsdeModel::brownian(1, 1.0).unwrap();
        let init = ParabolicPoint::new(OccupationMeasure::dirac(&[0.0], 1.0).unwrap(), vec![0.4]).unwrap();
        let path = simulate(&bm, &ControlPolicy::Constant(0.0), &init, 0.1, 0, 0).unwrap();
        assert_eq!(path.tau, Some(0.0));
        assert_eq!(path.n_steps, 0);
        assert_eq!(path.x_final, vec![0.4]);
    }

    #[test]
    fn until_rule_continues_past_the_budget() {
        let bm = OsdeModel::brownian(1, 0.5).unwrap();
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let opts = SimOptions { stop: StopRule::Until(1.0), ..SimOptions::default() };
        let path = simulate_with(&bm, &ControlPolicy::Constant(0.0), &init, 0.1, 0, 0, opts, None).unwrap();
        assert!((path.t_final - 1.0).abs() < 1e-12);
        assert!((path.tau.unwrap() - 0.5).abs() < 1e-12);
        assert!((path.clock_final - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_has_one_row_per_node() {
        let bm = OsdeModel::brownian(1, 0.25).unwrap();
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let path = simulate(&bm, &ControlPolicy::Constant(0.0), &init, 0.125, 0, 0).unwrap();
        let mut buf = Vec::new();
        path.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + path.n_steps + 1);
        assert!(text.starts_with("t,x_1,lambda_clock,a"));
    }
}
