use std::sync::Arc;

use anyhow::{bail, Result};
use occupied::calculus::{derivative_consistency, ito_convergence, ErrorRow, SmoothOuter, TestFunctional, OCC_STEPS, SPACE_STEPS};
use occupied::control::{cil_trace_check, exit_time_diagnostic, gronwall_diagnostic, holder_probe, sample_admissible_pairs};
use occupied::measure::{projection_gap, FamilyParams, OccupationMeasure, ParabolicPoint};
use occupied::osde::{batch, simulate, write_summary_csv, ControlPolicy};
use occupied::pricing::{uvm_model, PayoffSpec};
use occupied::stats::McEstimate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{dyadic, Context, Family, Scenario};
use crate::config::{
    family_for, positive, positive_count, ClockConfig, CoefficientsConfig, JobKind, ModelConfig, TerminalConfig,
};
use crate::report::{num, Outcome, Table};

const IDLE: ControlPolicy = ControlPolicy::Constant(0.0);

fn brownian(dim: usize) -> ModelConfig {
    ModelConfig {
        dim,
        horizon: 1.0,
        c_star: 1.0,
        clock: ClockConfig::Standard,
        coefficients: CoefficientsConfig::Brownian { sigma: 1.0 },
        terminal: TerminalConfig::Zero,
    }
}

fn point(model: &ModelConfig, x: &[f64], name: &str) -> Result<ParabolicPoint> {
    if x.len() != model.dim {
        bail!("{name} has {} coordinates, the model has dimension {}", x.len(), model.dim);
    }
    Ok(ParabolicPoint::at(x.to_vec())?)
}

fn error_rows(t: &mut Table, functional: &str, kind: &str, rows: &[ErrorRow]) {
    for r in rows {
        t.push([functional.to_string(), kind.to_string(), num(r.h), num(r.max_error), num(r.rounding_floor)]);
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsParams {
    pub x0: Vec<f64>,
    /// Number of leading paths whose full trace is exported.
    pub trace_paths: usize,
}

impl Default for PathsParams {
    fn default() -> Self {
        Self { x0: vec![0.0], trace_paths: 1 }
    }
}

pub struct Paths;

impl Scenario for Paths {
    type Params = PathsParams;
    const NAME: &'static str = "paths";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Simulate;
    const SUMMARY: &'static str = "simulate an ensemble of occupied paths and export exit summaries and traces";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(1000))
    }

    fn model() -> Option<ModelConfig> {
        Some(ModelConfig { terminal: TerminalConfig::BallOccupation { radius: 1.0 }, ..brownian(1) })
    }

    fn validate(_: &Self::Params) -> Result<()> {
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let cfg = ctx.model();
        let model = cfg.build()?;
        let init = point(cfg, &p.x0, "x0")?;
        let (dt, n) = (ctx.numerics.dt(), ctx.numerics.n_paths());
        let summaries = batch(&model, &IDLE, &init, dt, n, ctx.seed)?;
        let mut buf = Vec::new();
        write_summary_csv(&summaries, &mut buf)?;
        let mut out = Outcome::new(&json!({
            "tau": McEstimate::from_samples(&summaries.iter().map(|s| s.tau).collect::<Vec<_>>(), ctx.seed),
            "max_tau": summaries.iter().map(|s| s.tau).fold(0.0, f64::max),
            "exit_bound": model.exit_bound(),
            "terminal_cost": McEstimate::from_samples(&summaries.iter().map(|s| s.terminal_cost).collect::<Vec<_>>(), ctx.seed),
        }))?
        .table(Table::from_csv("summary", &buf)?);
        for i in 0..p.trace_paths.min(n) {
            let path = simulate(&model, &IDLE, &init, dt, ctx.seed, i as u64)?;
            let mut buf = Vec::new();
            path.write_trace_csv(&mut buf)?;
            out = out.table(Table::from_csv(&format!("trace-{i}"), &buf)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ItoParams {
    /// Family members entering the cylindrical functional.
    pub indices: Vec<usize>,
    pub w: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: f64,
    pub x0: Vec<f64>,
    /// Step sizes `2^-k`.
    pub dt_exponents: Vec<i32>,
    pub min_slope: f64,
}

impl Default for ItoParams {
    fn default() -> Self {
        Self {
            indices: vec![1, 2, 3],
            w: vec![1.0, -0.5, 0.7],
            nu: vec![0.8],
            kappa: 0.3,
            x0: vec![0.2],
            dt_exponents: (6..=11).collect(),
            min_slope: 0.45,
        }
    }
}

pub struct ItoConvergence;

impl Scenario for ItoConvergence {
    type Params = ItoParams;
    const NAME: &'static str = "ito-convergence";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "RMS residual of the Ito formula for a cylindrical functional as the step shrinks";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, Some(1000))
    }

    fn model() -> Option<ModelConfig> {
        Some(brownian(1))
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams { c0: 0.25, k_max: 64 })
    }

    fn validate(p: &Self::Params) -> Result<()> {
        if p.w.len() != p.indices.len() {
            bail!("w needs one weight per index");
        }
        if p.nu.len() != p.x0.len() {
            bail!("nu and x0 must have the model dimension");
        }
        if p.dt_exponents.len() < 2 {
            bail!("dt_exponents needs at least two step sizes");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let cfg = ctx.model();
        let model = cfg.build()?;
        let family = Arc::new(family_for(ctx.family(), cfg.dim)?);
        let outer = SmoothOuter { w: p.w.clone(), nu: p.nu.clone(), kappa: p.kappa };
        let v = TestFunctional::cylindrical(family, p.indices.clone(), Arc::new(outer))?;
        let dts: Vec<f64> = p.dt_exponents.iter().map(|&k| dyadic(k)).collect();
        let rep = ito_convergence(&model, &IDLE, &v, &point(cfg, &p.x0, "x0")?, &dts, ctx.numerics.n_paths(), ctx.seed)?;
        let mut buf = Vec::new();
        rep.write_csv(&mut buf)?;
        let slope = rep.slope.unwrap_or(f64::NAN);
        Ok(Outcome::new(&json!({ "report": rep, "min_slope": p.min_slope }))?
            .check("strictly-decreasing", rep.strictly_decreasing, "RMS residual ordered by dt")
            .check("slope", rep.slope.is_some_and(|s| s >= p.min_slope), format!("slope {slope:.4} >= {}", p.min_slope))
            .table(Table::from_csv("residuals", &buf)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DerivativeParams {
    pub dim: usize,
    pub n_points: usize,
    /// Atoms per random measure.
    pub atoms: usize,
    pub indices: Vec<usize>,
    pub nu: Vec<f64>,
    pub kappa: f64,
    /// Truncation of the squared-distance functional.
    pub rho_k: usize,
    pub min_occupation_order: f64,
    pub min_space_order: f64,
}

impl Default for DerivativeParams {
    fn default() -> Self {
        Self {
            dim: 2,
            n_points: 100,
            atoms: 3,
            indices: vec![1, 4, 9],
            nu: vec![0.7, -0.4],
            kappa: 0.2,
            rho_k: 64,
            min_occupation_order: 0.9,
            min_space_order: 1.9,
        }
    }
}

pub struct DerivativeFormulas;

impl Scenario for DerivativeFormulas {
    type Params = DerivativeParams;
    const NAME: &'static str = "derivative-formulas";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "analytic occupation, gradient and Hessian derivatives against finite differences";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, None)
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams { c0: 0.25, k_max: 64 })
    }

    fn validate(p: &Self::Params) -> Result<()> {
        positive_count("dim", p.dim)?;
        positive_count("n_points", p.n_points)?;
        positive_count("atoms", p.atoms)?;
        if p.nu.len() != p.dim {
            bail!("nu must have `dim` entries");
        }
        if p.indices.is_empty() {
            bail!("indices must be nonempty");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let d = p.dim;
        let family = Arc::new(family_for(ctx.family(), d)?);
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let mut points = Vec::with_capacity(p.n_points);
        for _ in 0..p.n_points {
            let mut o = OccupationMeasure::new(d)?;
            for _ in 0..p.atoms {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                o.push(&y, rng.random_range(0.0..0.3))?;
            }
            let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            points.push(ParabolicPoint::new(o, x)?);
        }
        // Weights scaled by the member sup norms keep the phase of order one.
        let w: Vec<f64> = p.indices.iter().map(|&k| 1.0 / family.sup_norm(k)).collect();
        let cyl = TestFunctional::cylindrical(family.clone(), p.indices.clone(), Arc::new(SmoothOuter { w, nu: p.nu.clone(), kappa: p.kappa }))?;
        let reference = ParabolicPoint::new(OccupationMeasure::dirac(&vec![0.5; d], 0.4)?, vec![1.0; d])?;
        let rho = TestFunctional::rho_squared(family, reference, p.rho_k)?;

        let mut t = Table::new("errors", &["functional", "derivative", "h", "max_error", "rounding_floor"]);
        let mut out = Outcome::default();
        let mut reports = Vec::new();
        for (name, v) in [("cylindrical", &cyl), ("rho-squared", &rho)] {
            let rep = derivative_consistency(v, &points, &OCC_STEPS, &SPACE_STEPS)?;
            error_rows(&mut t, name, "occupation", &rep.occupation);
            error_rows(&mut t, name, "gradient", &rep.gradient);
            error_rows(&mut t, name, "hessian", &rep.hessian);
            let detail = format!(
                "orders occupation {} gradient {} hessian {}",
                opt(rep.occupation_order),
                opt(rep.gradient_order),
                opt(rep.hessian_order)
            );
            out = out.check(name, rep.passes(p.min_occupation_order, p.min_space_order), detail);
            reports.push(json!({ "functional": name, "report": rep }));
        }
        out.results = json!({
            "functionals": reports,
            "min_occupation_order": p.min_occupation_order,
            "min_space_order": p.min_space_order,
        });
        Ok(out.table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupledParams {
    pub x0: Vec<f64>,
    pub x0_other: Vec<f64>,
}

impl Default for CoupledParams {
    fn default() -> Self {
        Self { x0: vec![0.0], x0_other: vec![0.1] }
    }
}

pub struct ExitTime;

impl Scenario for ExitTime {
    type Params = CoupledParams;
    const NAME: &'static str = "exit-time";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "exit times stay below c* T and coupled exit times differ by at most c* times the clock gap";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(10_000))
    }

    fn model() -> Option<ModelConfig> {
        Some(ModelConfig {
            dim: 1,
            horizon: 1.0,
            c_star: 4.0,
            clock: ClockConfig::QuadraticVariation,
            coefficients: CoefficientsConfig::LocalVol { base: 0.75, amplitude: 0.25, log_price: false },
            terminal: TerminalConfig::Zero,
        })
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams::default())
    }

    fn validate(_: &Self::Params) -> Result<()> {
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let cfg = ctx.model();
        let model = cfg.build()?;
        let family = family_for(ctx.family(), cfg.dim)?;
        let (a, b) = (point(cfg, &p.x0, "x0")?, point(cfg, &p.x0_other, "x0_other")?);
        let (rep, pairs) = exit_time_diagnostic(&model, &family, &IDLE, &a, &b, ctx.numerics.dt(), ctx.numerics.n_paths(), ctx.seed)?;
        let mut t = Table::new("pairs", &["path_index", "tau", "tau_other", "clock_gap", "bound", "holds"]);
        for e in &pairs {
            t.push([e.path_index.to_string(), num(e.tau), num(e.tau_other), num(e.clock_gap), num(e.bound), e.holds().to_string()]);
        }
        let cap = model.exit_bound() + ctx.numerics.dt();
        Ok(Outcome::new(&json!({ "report": rep, "exit_cap": cap }))?
            .check("exit-bound", rep.exit_bound_violations == 0, format!("{} paths beyond {cap}, max tau {}", rep.exit_bound_violations, rep.max_tau))
            .check("coupled-exit", rep.violations == 0, format!("{} of {} pairs violate", rep.violations, pairs.len()))
            .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GronwallParams {
    pub x0: Vec<f64>,
    /// Initial gaps along the first coordinate.
    pub gaps: Vec<f64>,
}

impl Default for GronwallParams {
    fn default() -> Self {
        Self { x0: vec![0.0], gaps: vec![0.05, 0.1, 0.2] }
    }
}

pub struct Gronwall;

impl Scenario for Gronwall {
    type Params = GronwallParams;
    const NAME: &'static str = "gronwall";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "expected running squared distance of coupled paths against C1 times the initial gap";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(2000))
    }

    fn model() -> Option<ModelConfig> {
        Some(ModelConfig { coefficients: CoefficientsConfig::OccupationReverting { kappa: 1.0, sigma: 1.0 }, ..brownian(1) })
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams::default())
    }

    fn validate(p: &Self::Params) -> Result<()> {
        if p.gaps.is_empty() {
            bail!("gaps must be nonempty");
        }
        for &g in &p.gaps {
            positive("gaps", g)?;
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let cfg = ctx.model();
        let model = cfg.build()?;
        let family = family_for(ctx.family(), cfg.dim)?;
        let base = point(cfg, &p.x0, "x0")?;
        let mut t = Table::new("gaps", &["gap", "rho0", "lhs", "stderr", "log_rhs", "rhs", "pass"]);
        let mut reports = Vec::new();
        let mut checks = Vec::new();
        for &g in &p.gaps {
            let mut x = p.x0.clone();
            x[0] += g;
            let other = point(cfg, &x, "x0")?;
            let rep = gronwall_diagnostic(&model, &family, &IDLE, &base, &other, ctx.numerics.dt(), ctx.numerics.n_paths(), ctx.seed)?;
            t.push([num(g), num(rep.rho0), num(rep.lhs.mean), num(rep.lhs.stderr), num(rep.log_rhs), opt(rep.rhs), rep.pass.to_string()]);
            checks.push((
                format!("gap={g}"),
                rep.pass,
                format!("lhs + 3 se = {:.4e}, ln rhs = {:.4}", rep.lhs.mean + 3.0 * rep.lhs.stderr, rep.log_rhs),
            ));
            reports.push(json!({ "gap": g, "report": rep }));
        }
        let mut out = Outcome::new(&json!({ "gaps": reports }))?;
        for (name, pass, detail) in checks {
            out = out.check(name, pass, detail);
        }
        Ok(out.table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionParams {
    pub dim: usize,
    pub n_pairs: usize,
    pub atoms: usize,
    /// Mass budget; every measure has total mass at most this.
    pub horizon: f64,
    /// Truncation levels, each at most `k_max`.
    pub ks: Vec<usize>,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        let mut ks: Vec<usize> = (0..=12).map(|e| 1usize << e).collect();
        ks.insert(0, 0);
        Self { dim: 1, n_pairs: 50, atoms: 8, horizon: 1.0, ks }
    }
}

pub struct ProjectionTail;

impl Scenario for ProjectionTail {
    type Params = ProjectionParams;
    const NAME: &'static str = "projection-tail";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "projection gap is nonnegative, nonincreasing in K and below its closed-form tail bound";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, None)
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams::default())
    }

    fn validate(p: &Self::Params) -> Result<()> {
        positive_count("dim", p.dim)?;
        positive_count("n_pairs", p.n_pairs)?;
        positive_count("atoms", p.atoms)?;
        positive("horizon", p.horizon)?;
        if p.ks.is_empty() {
            bail!("ks must be nonempty");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let family = family_for(ctx.family(), p.dim)?;
        let mut ks = p.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        if let Some(&k) = ks.last().filter(|&&k| k > family.k_max()) {
            bail!("truncation {k} exceeds k_max = {}", family.k_max());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let measure = |rng: &mut ChaCha8Rng| -> Result<OccupationMeasure> {
            let mass = p.horizon * rng.random_range(0.0..=1.0);
            let raw: Vec<f64> = (0..p.atoms).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut o = OccupationMeasure::new(p.dim)?;
            for r in raw {
                let y: Vec<f64> = (0..p.dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                o.push(&y, mass * r / total)?;
            }
            Ok(o)
        };
        let mut t = Table::new("gaps", &["pair", "k", "gap", "bound"]);
        let (mut negative, mut increasing, mut above) = (0usize, 0usize, 0usize);
        let mut max_mass = 0.0_f64;
        for i in 0..p.n_pairs {
            let o = measure(&mut rng)?;
            let o2 = measure(&mut rng)?;
            let mass = o.total_mass() + o2.total_mass();
            max_mass = max_mass.max(o.total_mass()).max(o2.total_mass());
            let mut prev = f64::INFINITY;
            for &k in &ks {
                let gap = projection_gap(&o, &o2, &family, k)?;
                let bound = family.tail_sup_sq(k) * mass * mass;
                negative += usize::from(gap < 0.0);
                increasing += usize::from(gap > prev);
                above += usize::from(gap > bound);
                prev = gap;
                t.push([i.to_string(), k.to_string(), num(gap), num(bound)]);
            }
        }
        Ok(Outcome::new(&json!({
            "pairs": p.n_pairs,
            "ks": ks,
            "max_total_mass": max_mass,
            "negative": negative,
            "increasing_steps": increasing,
            "above_bound": above,
        }))?
        .check("nonnegative", negative == 0, format!("{negative} negative gaps"))
        .check("nonincreasing", increasing == 0, format!("{increasing} increases in K"))
        .check("tail-bound", above == 0, format!("{above} gaps above the bound"))
        .check("mass-budget", max_mass <= p.horizon, format!("largest mass {max_mass}"))
        .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CilParams {
    pub band: (f64, f64),
    pub n_controls: usize,
    pub epsilon: f64,
    pub n_pairs: usize,
    pub max_draws: usize,
    pub spot: f64,
    pub spot_other: f64,
    pub horizon: f64,
}

impl Default for CilParams {
    fn default() -> Self {
        Self { band: (0.1, 0.3), n_controls: 5, epsilon: 0.5, n_pairs: 100, max_draws: 1_000_000, spot: 100.0, spot_other: 101.0, horizon: 0.25 }
    }
}

pub struct CilTrace;

impl Scenario for CilTrace {
    type Params = CilParams;
    const NAME: &'static str = "cil-trace";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Verify;
    const SUMMARY: &'static str = "trace inequality on rejection-sampled admissible matrix pairs for uncertain-volatility diffusions";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (None, None)
    }

    fn validate(p: &Self::Params) -> Result<()> {
        if !(p.band.0 > 0.0 && p.band.0 <= p.band.1 && p.band.1.is_finite()) {
            bail!("band must satisfy 0 < low <= high");
        }
        positive_count("n_controls", p.n_controls)?;
        positive("epsilon", p.epsilon)?;
        positive_count("n_pairs", p.n_pairs)?;
        positive_count("max_draws", p.max_draws)?;
        positive("horizon", p.horizon)
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let model = uvm_model(&PayoffSpec::constant(0.0), p.band, p.horizon, p.n_controls)?;
        let (pairs, draws) = sample_admissible_pairs(1, p.epsilon, p.n_pairs, ctx.seed, p.max_draws);
        let a = ParabolicPoint::at(vec![p.spot])?;
        let b = ParabolicPoint::at(vec![p.spot_other])?;
        // Both measures are empty, so the parabolic distance is |x - x'|.
        let rho = (p.spot - p.spot_other).abs();
        let rep = cil_trace_check(&model, &a, &b, p.epsilon, &pairs, rho)?;
        let mut t = Table::new("summary", &["pairs", "draws", "checks", "inadmissible", "violations", "max_excess", "rho_bound"]);
        t.push([
            pairs.len().to_string(),
            draws.to_string(),
            rep.checks.to_string(),
            rep.inadmissible.to_string(),
            rep.violations.to_string(),
            num(rep.max_excess),
            num(rep.rho_bound),
        ]);
        Ok(Outcome::new(&json!({ "report": rep, "draws": draws, "controls": model.control_set().grid() }))?
            .check("sampled", pairs.len() == p.n_pairs, format!("{} of {} pairs in {draws} draws", pairs.len(), p.n_pairs))
            .check("trace-inequality", rep.pass && rep.violations == 0, format!("{} violations, max excess {:.3e}", rep.violations, rep.max_excess))
            .table(t))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderParams {
    pub x0: Vec<f64>,
    /// Perturbations `2^-k` of the first coordinate.
    pub exponents: Vec<i32>,
    pub slope_window: (f64, f64),
}

impl Default for HolderParams {
    fn default() -> Self {
        Self { x0: vec![0.0], exponents: (2..=8).collect(), slope_window: (0.4, 1.1) }
    }
}

pub struct HolderProbe;

impl Scenario for HolderProbe {
    type Params = HolderParams;
    const NAME: &'static str = "holder-probe";
    const FAMILY: Family = Family::Diagnostics;
    const JOB: JobKind = JobKind::Diagnose;
    const SUMMARY: &'static str = "fitted slope of the cost difference against the parabolic distance of the initial states";

    fn numerics() -> (Option<f64>, Option<usize>) {
        (Some(dyadic(8)), Some(20_000))
    }

    fn model() -> Option<ModelConfig> {
        Some(ModelConfig { c_star: 2.0, clock: ClockConfig::Cosine { amplitude: 0.5 }, terminal: TerminalConfig::Sine, ..brownian(1) })
    }

    fn family() -> Option<FamilyParams> {
        Some(FamilyParams::default())
    }

    fn validate(p: &Self::Params) -> Result<()> {
        if p.exponents.len() < 2 {
            bail!("exponents needs at least two perturbations");
        }
        Ok(())
    }

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome> {
        let p = ctx.params;
        let cfg = ctx.model();
        let model = cfg.build()?;
        let family = family_for(ctx.family(), cfg.dim)?;
        let base = point(cfg, &p.x0, "x0")?;
        let perturbed = p
            .exponents
            .iter()
            .map(|&k| {
                let mut x = p.x0.clone();
                x[0] += dyadic(k);
                point(cfg, &x, "x0")
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = holder_probe(&model, &family, &IDLE, &base, &perturbed, ctx.numerics.dt(), ctx.numerics.n_paths(), ctx.seed)?;
        let mut t = Table::new("rows", &["rho", "abs_diff", "stderr"]);
        for r in &rep.rows {
            t.push([num(r.rho), num(r.abs_diff), num(r.stderr)]);
        }
        let (lo, hi) = p.slope_window;
        Ok(Outcome::new(&json!({ "report": rep, "slope_window": p.slope_window }))?
            .check("slope-in-window", rep.slope_within(lo, hi), format!("slope {}", opt(rep.slope)))
            .table(t))
    }
}
