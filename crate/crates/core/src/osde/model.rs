use std::fmt;
use std::sync::Arc;

use crate::measure::{OccupationMeasure, ParabolicPoint};

use super::OsdeError;

/// A control value. Every control set in this crate is a subset of R.
pub type Control = f64;

/// What coefficients see of the occupation flow: its total mass, the
/// running pairings with the model's tracked functions, and the raw
/// particle list.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub measure: &'a OccupationMeasure,
    pub mass: f64,
    pub coords: &'a [f64],
}

pub type SpatialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type RateFn = Arc<dyn Fn(&StateView, &[f64], Control) -> f64 + Send + Sync>;
/// Writes `b(o, x, a)` into the output slice (length d).
pub type DriftFn = Arc<dyn Fn(&StateView, &[f64], Control, &mut [f64]) + Send + Sync>;
/// Writes `sigma(o, x, a)` row-major into the output slice (length d*d).
pub type DiffusionFn = Arc<dyn Fn(&StateView, &[f64], Control, &mut [f64]) + Send + Sync>;
pub type RunningCostFn = Arc<dyn Fn(&StateView, &[f64], Control) -> f64 + Send + Sync>;
pub type TerminalCostFn = Arc<dyn Fn(&OccupationMeasure, &[f64]) -> f64 + Send + Sync>;

/// Rate `lambda` of the random clock driving the occupation flow.
#[derive(Clone)]
pub enum Clock {
    /// `lambda = 1`: calendar time.
    Standard,
    /// `lambda = ||sigma||_F^2`: the occupation flow generating local times.
    QuadraticVariation,
    Custom(RateFn),
}

impl fmt::Debug for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clock::Standard => write!(f, "Standard"),
            Clock::QuadraticVariation => write!(f, "QuadraticVariation"),
            Clock::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The control set `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    Finite(Vec<Control>),
    /// A continuum `[low, high]` (bounds may be infinite). `grid` lists the
    /// points used wherever a finite search is needed; the finite endpoints
    /// are always included.
    Interval { low: Control, high: Control, grid: Vec<Control> },
}

impl ControlSet {
    pub fn interval(low: Control, high: Control) -> Self {
        ControlSet::Interval { low, high, grid: Vec::new() }
    }

    pub fn contains(&self, a: Control) -> bool {
        match self {
            ControlSet::Finite(values) => values.iter().any(|v| v.to_bits() == a.to_bits() || *v == a),
            ControlSet::Interval { low, high, .. } => a.is_finite() && *low <= a && a <= *high,
        }
    }

    /// Finite search grid: the list itself, or endpoints plus the grid.
    pub fn grid(&self) -> Vec<Control> {
        match self {
            ControlSet::Finite(values) => values.clone(),
            ControlSet::Interval { low, high, grid } => {
                let mut g: Vec<Control> = [*low, *high].into_iter().filter(|v| v.is_finite()).collect();
                g.extend(grid.iter().copied().filter(|a| *low <= *a && *a <= *high));
                g.sort_by(f64::total_cmp);
                g.dedup();
                g
            }
        }
    }
}

/// Coefficient bundle `(lambda, b, sigma, l, g)` of a controlled occupied SDE
/// together with its control set, horizon (mass budget) `T` and the
/// growth/Lipschitz/ellipticity constant `c*`.
#[derive(Clone)]
pub struct OsdeModel {
    dim: usize,
    horizon: f64,
    c_star: f64,
    clock: Clock,
    drift: Option<DriftFn>,
    diffusion: Option<DiffusionFn>,
    running_cost: Option<RunningCostFn>,
    terminal_cost: Option<TerminalCostFn>,
    control_set: ControlSet,
    tracked: Vec<SpatialFn>,
}

impl fmt::Debug for OsdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OsdeModel")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("c_star", &self.c_star)
            .field("clock", &self.clock)
            .field("control_set", &self.control_set)
            .field("tracked", &self.tracked.len())
            .finish_non_exhaustive()
    }
}

impl OsdeModel {
    /// Zero drift, zero diffusion, standard clock, zero costs and the single
    /// control `0`.
    pub fn new(dim: usize, horizon: f64, c_star: f64) -> Result<Self, OsdeError> {
        if dim == 0 {
            return Err(OsdeError::InvalidModel("dimension must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(OsdeError::InvalidModel(format!("horizon {horizon} must be positive")));
        }
        if !(c_star >= 1.0 && c_star.is_finite()) {
            return Err(OsdeError::InvalidModel(format!("c* = {c_star} must be >= 1")));
        }
        Ok(Self {
            dim,
            horizon,
            c_star,
            clock: Clock::Standard,
            drift: None,
            diffusion: None,
            running_cost: None,
            terminal_cost: None,
            control_set: ControlSet::Finite(vec![0.0]),
            tracked: Vec::new(),
        })
    }

    /// Uncontrolled d-dimensional Brownian motion in calendar time.
    pub fn brownian(dim: usize, horizon: f64) -> Result<Self, OsdeError> {
        Ok(Self::new(dim, horizon, 1.0)?.with_diffusion(Arc::new(move |_, _, _, s: &mut [f64]| {
            s.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..dim {
                s[i * dim + i] = 1.0;
            }
        })))
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_drift(mut self, f: DriftFn) -> Self {
        self.drift = Some(f);
        self
    }

    pub fn with_diffusion(mut self, f: DiffusionFn) -> Self {
        self.diffusion = Some(f);
        self
    }

    pub fn with_running_cost(mut self, f: RunningCostFn) -> Self {
        self.running_cost = Some(f);
        self
    }

    pub fn with_terminal_cost(mut self, f: TerminalCostFn) -> Self {
        self.terminal_cost = Some(f);
        self
    }

    pub fn with_control_set(mut self, set: ControlSet) -> Self {
        self.control_set = set;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Declares a function whose pairing with the occupation flow is kept
    /// up to date during simulation and exposed in [`StateView::coords`].
    pub fn track(mut self, f: SpatialFn) -> Self {
        self.tracked.push(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.control_set
    }

    pub fn tracked(&self) -> &[SpatialFn] {
        &self.tracked
    }

    /// `T* = c* T`, the a priori bound on every exit time.
    pub fn exit_bound(&self) -> f64 {
        self.c_star * self.horizon
    }

    /// Pairings of the tracked functions with `measure`.
    pub fn tracked_coords(&self, measure: &OccupationMeasure) -> Vec<f64> {
        self.tracked.iter().map(|f| measure.pair(|x| f(x))).collect()
    }

    pub fn drift_into(&self, view: &StateView, x: &[f64], a: Control, out: &mut [f64]) {
        match &self.drift {
            Some(f) => f(view, x, a, out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn diffusion_into(&self, view: &StateView, x: &[f64], a: Control, out: &mut [f64]) {
        match &self.diffusion {
            Some(f) => f(view, x, a, out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Clock rate given an already evaluated diffusion matrix.
    pub fn rate_with(&self, view: &StateView, x: &[f64], a: Control, sigma: &[f64]) -> f64 {
        match &self.clock {
            Clock::Standard => 1.0,
            Clock::QuadraticVariation => sigma.iter().map(|s| s * s).sum(),
            Clock::Custom(f) => f(view, x, a),
        }
    }

    pub fn rate(&self, view: &StateView, x: &[f64], a: Control) -> f64 {
        let mut sigma = vec![0.0; self.dim * self.dim];
        self.diffusion_into(view, x, a, &mut sigma);
        self.rate_with(view, x, a, &sigma)
    }

    pub fn running_cost(&self, view: &StateView, x: &[f64], a: Control) -> f64 {
        self.running_cost.as_ref().map_or(0.0, |f| f(view, x, a))
    }

    pub fn terminal_cost(&self, measure: &OccupationMeasure, x: &[f64]) -> f64 {
        self.terminal_cost.as_ref().map_or(0.0, |g| g(measure, x))
    }

    /// Smallest admissible clock rate, `1/c*`, with a relative allowance
    /// for rounding in user-supplied constants.
    pub(crate) fn ellipticity_floor(&self) -> f64 {
        (1.0 / self.c_star) * (1.0 - 1e-12)
    }

    /// Evaluates the full coefficient set at a state, for Hamiltonians and
    /// checks outside a simulation.
    pub fn coefficients_at(&self, p: &ParabolicPoint, a: Control) -> Result<Coefficients, OsdeError> {
        if p.dim() != self.dim {
            return Err(OsdeError::DimensionMismatch { expected: self.dim, found: p.dim() });
        }
        let coords = self.tracked_coords(&p.measure);
        let view = StateView { measure: &p.measure, mass: p.measure.total_mass(), coords: &coords };
        let mut drift = vec![0.0; self.dim];
        let mut sigma = vec![0.0; self.dim * self.dim];
        self.drift_into(&view, &p.x, a, &mut drift);
        self.diffusion_into(&view, &p.x, a, &mut sigma);
        let rate = self.rate_with(&view, &p.x, a, &sigma);
        let running = self.running_cost(&view, &p.x, a);
        Ok(Coefficients { rate, drift, sigma, running })
    }
}

/// `(lambda, b, sigma, l)` evaluated at one state and control.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub rate: f64,
    pub drift: Vec<f64>,
    /// Row-major d x d.
    pub sigma: Vec<f64>,
    pub running: f64,
}

/// Stationary feedback map `(t, x, view) -> a`.
pub type FeedbackFn = Arc<dyn Fn(f64, &[f64], &StateView) -> Control + Send + Sync>;

/// An implementable admissible control.
#[derive(Clone)]
pub enum ControlPolicy {
    Constant(Control),
    Feedback(FeedbackFn),
    /// `(start time, control)` pairs sorted by time; before the first start
    /// the first control applies.
    PiecewiseConstant(Vec<(f64, Control)>),
}

impl fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlPolicy::Constant(a) => write!(f, "Constant({a})"),
            ControlPolicy::Feedback(_) => write!(f, "Feedback"),
            ControlPolicy::PiecewiseConstant(s) => write!(f, "PiecewiseConstant({s:?})"),
        }
    }
}

impl ControlPolicy {
    pub fn control(&self, t: f64, x: &[f64], view: &StateView) -> Control {
        match self {
            ControlPolicy::Constant(a) => *a,
            ControlPolicy::Feedback(f) => f(t, x, view),
            ControlPolicy::PiecewiseConstant(schedule) => {
                let idx = schedule.partition_point(|(start, _)| *start <= t);
                schedule[idx.saturating_sub(1)].1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_includes_finite_endpoints() {
        let set = ControlSet::Interval { low: 0.1, high: 0.3, grid: vec![0.2, 0.5] };
        assert_eq!(set.grid(), vec![0.1, 0.2, 0.3]);
        assert!(set.contains(0.25));
        assert!(!set.contains(0.31));
        let real = ControlSet::interval(f64::NEG_INFINITY, f64::INFINITY);
        assert!(real.contains(-1e9));
        assert!(!real.contains(f64::NAN));
        assert!(real.grid().is_empty());
    }

    #[test]
    fn piecewise_schedule_lookup() {
        let p = ControlPolicy::PiecewiseConstant(vec![(0.0, 1.0), (0.5, 2.0), (0.75, 3.0)]);
        let m = OccupationMeasure::new(1).unwrap();
        let v = StateView { measure: &m, mass: 0.0, coords: &[] };
        assert_eq!(p.control(0.0, &[0.0], &v), 1.0);
        assert_eq!(p.control(0.49, &[0.0], &v), 1.0);
        assert_eq!(p.control(0.5, &[0.0], &v), 2.0);
        assert_eq!(p.control(10.0, &[0.0], &v), 3.0);
    }

    #[test]
    fn model_validation() {
        assert!(OsdeModel::new(0, 1.0, 1.0).is_err());
        assert!(OsdeModel::new(1, 0.0, 1.0).is_err());
        assert!(OsdeModel::new(1, 1.0, 0.5).is_err());
    }

    #[test]
    fn quadratic_variation_rate_is_frobenius_norm() {
        let m = OsdeModel::new(2, 1.0, 1.0)
            .unwrap()
            .with_clock(Clock::QuadraticVariation)
            .with_diffusion(Arc::new(|_, _, _, s: &mut [f64]| s.copy_from_slice(&[1.0, 2.0, 0.0, 3.0])));
        let p = ParabolicPoint::at(vec![0.0, 0.0]).unwrap();
        assert_eq!(m.coefficients_at(&p, 0.0).unwrap().rate, 14.0);
    }
}
