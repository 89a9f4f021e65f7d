//! The builtin scenario catalog.
//!
//! Each scenario is a type implementing [`Scenario`]; the catalog erases
//! the parameter type behind plain function pointers so that templates,
//! schemas and execution can be looked up by name.

mod diagnostics;
mod hedging;
mod heat;
mod timer;
mod uvm;

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context as _, Result};
use occupied::measure::FamilyParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{
    config_hash, family_for, parse_typed, positive, ConfigFile, JobKind, ModelConfig, Numerics, OutputConfig, Overrides, ResolvedNumerics,
};
use crate::report::{Outcome, RunOutput};

/// The five scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    HeatOccupation,
    Timer,
    UvmBsb,
    Hedging,
    Diagnostics,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::HeatOccupation, Family::Timer, Family::UvmBsb, Family::Hedging, Family::Diagnostics];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::HeatOccupation => "heat-occupation",
            Family::Timer => "timer",
            Family::UvmBsb => "uvm-bsb",
            Family::Hedging => "hedging",
            Family::Diagnostics => "diagnostics",
        }
    }
}

/// Resolved inputs of one run.
pub struct Context<'a, P> {
    pub seed: u64,
    pub numerics: ResolvedNumerics,
    pub model: Option<ModelConfig>,
    pub family: Option<FamilyParams>,
    pub params: &'a P,
}

impl<P> Context<'_, P> {
    pub fn model(&self) -> &ModelConfig {
        self.model.as_ref().expect("scenario declares a model")
    }

    pub fn family(&self) -> FamilyParams {
        self.family.expect("scenario declares a family")
    }
}

pub trait Scenario {
    type Params: Serialize + DeserializeOwned + Default;
    const NAME: &'static str;
    const FAMILY: Family;
    const JOB: JobKind;
    const SUMMARY: &'static str;

    /// Default `(dt, n_paths)`; `None` marks a control the scenario ignores.
    fn numerics() -> (Option<f64>, Option<usize>);

    /// Default model for scenarios that accept a `[model]` table.
    fn model() -> Option<ModelConfig> {
        None
    }

    /// Default separating family for scenarios that use one.
    fn family() -> Option<FamilyParams> {
        None
    }

    fn validate(params: &Self::Params) -> Result<()>;

    fn run(ctx: &Context<Self::Params>) -> Result<Outcome>;
}

/// Runs a config with overrides, returning the output and its directory.
type ExecuteFn = fn(&str, &Overrides) -> Result<(RunOutput, Option<PathBuf>)>;

/// A type-erased catalog entry.
#[derive(Clone, Copy)]
pub struct Entry {
    pub name: &'static str,
    pub family: Family,
    pub job: JobKind,
    pub summary: &'static str,
    template: fn(u64) -> Result<String>,
    schema: fn() -> Result<Value>,
    check: fn(&str, &Overrides) -> Result<String>,
    execute: ExecuteFn,
}

impl Entry {
    fn of<S: Scenario>() -> Self {
        Entry {
            name: S::NAME,
            family: S::FAMILY,
            job: S::JOB,
            summary: S::SUMMARY,
            template: template::<S>,
            schema: schema::<S>,
            check: check::<S>,
            execute: execute::<S>,
        }
    }

    /// A complete config with every default spelled out.
    pub fn template(&self, seed: u64) -> Result<String> {
        (self.template)(seed)
    }

    pub fn schema(&self) -> Result<Value> {
        (self.schema)()
    }

    /// Parses and validates `text` without running it; returns the config
    /// hash.
    pub fn check(&self, text: &str, overrides: &Overrides) -> Result<String> {
        (self.check)(text, overrides)
    }

    /// Parses `text` as a config of this scenario and runs it. Returns the
    /// rendered output and the output directory named in the config.
    pub fn execute(&self, text: &str, overrides: &Overrides) -> Result<(RunOutput, Option<PathBuf>)> {
        (self.execute)(text, overrides)
    }
}

pub fn catalog() -> Vec<Entry> {
    vec![
        Entry::of::<heat::HeatPrice>(),
        Entry::of::<heat::HeatOracle>(),
        Entry::of::<timer::TimerVanilla>(),
        Entry::of::<timer::TimerAsian>(),
        Entry::of::<timer::TimerIndependence>(),
        Entry::of::<uvm::UvmPrice>(),
        Entry::of::<uvm::BsbUvm>(),
        Entry::of::<uvm::BsbRefinement>(),
        Entry::of::<hedging::Hedging>(),
        Entry::of::<diagnostics::Paths>(),
        Entry::of::<diagnostics::ItoConvergence>(),
        Entry::of::<diagnostics::DerivativeFormulas>(),
        Entry::of::<diagnostics::ExitTime>(),
        Entry::of::<diagnostics::Gronwall>(),
        Entry::of::<diagnostics::ProjectionTail>(),
        Entry::of::<diagnostics::CilTrace>(),
        Entry::of::<diagnostics::HolderProbe>(),
    ]
}

pub fn find(name: &str) -> Result<Entry> {
    catalog().into_iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        anyhow!("unknown scenario `{name}`; available: {}", names.join(", "))
    })
}

fn default_config<S: Scenario>(seed: u64) -> ConfigFile<S::Params> {
    let (dt, n_paths) = S::numerics();
    ConfigFile {
        job: S::JOB,
        scenario: S::NAME.into(),
        seed,
        numerics: Numerics { dt, n_paths },
        model: S::model(),
        family: S::family(),
        output: OutputConfig::default(),
        params: S::Params::default(),
    }
}

fn template<S: Scenario>(seed: u64) -> Result<String> {
    let header = format!("# {}: {}\n", S::NAME, S::SUMMARY);
    Ok(header + &toml::to_string(&default_config::<S>(seed))?)
}

/// A JSON schema read off the serialized defaults: every object is closed
/// and every leaf carries its type and default.
fn schema_of(value: &Value) -> Value {
    match value {
        Value::Object(m) => {
            let props: Map<String, Value> = m.iter().map(|(k, v)| (k.clone(), schema_of(v))).collect();
            json!({ "type": "object", "properties": props, "additionalProperties": false })
        }
        Value::Array(items) => {
            let item = items.first().map(schema_of).unwrap_or_else(|| json!({}));
            json!({ "type": "array", "items": item, "default": value })
        }
        Value::Number(n) if n.is_u64() || n.is_i64() => json!({ "type": "integer", "default": value }),
        Value::Number(_) => json!({ "type": "number", "default": value }),
        Value::Bool(_) => json!({ "type": "boolean", "default": value }),
        Value::String(_) => json!({ "type": "string", "default": value }),
        Value::Null => json!({}),
    }
}

fn schema<S: Scenario>() -> Result<Value> {
    let defaults = default_config::<S>(0);
    let mut props = Map::new();
    props.insert("job".into(), json!({ "const": S::JOB.as_str() }));
    props.insert("scenario".into(), json!({ "const": S::NAME }));
    props.insert("seed".into(), json!({ "type": "integer", "minimum": 0 }));
    let (dt, n_paths) = S::numerics();
    let mut numerics = Map::new();
    if let Some(dt) = dt {
        numerics.insert("dt".into(), json!({ "type": "number", "exclusiveMinimum": 0, "default": dt }));
    }
    if let Some(n) = n_paths {
        numerics.insert("n_paths".into(), json!({ "type": "integer", "minimum": 1, "default": n }));
    }
    props.insert("numerics".into(), json!({ "type": "object", "properties": numerics, "additionalProperties": false }));
    if let Some(m) = &defaults.model {
        props.insert("model".into(), schema_of(&serde_json::to_value(m)?));
    }
    if let Some(f) = &defaults.family {
        props.insert("family".into(), schema_of(&serde_json::to_value(f)?));
    }
    props.insert(
        "output".into(),
        json!({ "type": "object", "properties": { "dir": { "type": "string" } }, "additionalProperties": false }),
    );
    props.insert("params".into(), schema_of(&serde_json::to_value(&defaults.params)?));
    Ok(json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": S::NAME,
        "description": S::SUMMARY,
        "type": "object",
        "properties": props,
        "required": ["job", "scenario", "seed", "params"],
        "additionalProperties": false,
    }))
}

fn resolve_numerics<S: Scenario>(cfg: &Numerics, ov: &Overrides) -> Result<ResolvedNumerics> {
    let (dt_default, paths_default) = S::numerics();
    let dt = match (dt_default, ov.dt.or(cfg.dt)) {
        (None, Some(_)) => bail!("scenario `{}` takes no time step (dt)", S::NAME),
        (None, None) => None,
        (Some(d), given) => Some(given.unwrap_or(d)),
    };
    let n_paths = match (paths_default, ov.n_paths.or(cfg.n_paths)) {
        (None, Some(_)) => bail!("scenario `{}` takes no path count (n_paths)", S::NAME),
        (None, None) => None,
        (Some(n), given) => Some(given.unwrap_or(n)),
    };
    if let Some(dt) = dt {
        positive("numerics.dt", dt)?;
    }
    if n_paths == Some(0) {
        bail!("numerics.n_paths must be at least 1");
    }
    Ok(ResolvedNumerics { dt, n_paths })
}

/// A parsed config with defaults and overrides applied.
struct Prepared<P> {
    cfg: ConfigFile<P>,
    numerics: ResolvedNumerics,
    hash: String,
}

fn prepare<S: Scenario>(text: &str, ov: &Overrides) -> Result<Prepared<S::Params>> {
    let mut cfg: ConfigFile<S::Params> = parse_typed(text)?;
    if cfg.scenario != S::NAME {
        bail!("config names scenario `{}`, expected `{}`", cfg.scenario, S::NAME);
    }
    if cfg.job != S::JOB {
        bail!("scenario `{}` is a {} job, config says {}", S::NAME, S::JOB.as_str(), cfg.job.as_str());
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    let numerics = resolve_numerics::<S>(&cfg.numerics, ov)?;
    cfg.numerics = Numerics { dt: numerics.dt, n_paths: numerics.n_paths };
    match (S::model(), &cfg.model) {
        (None, Some(_)) => bail!("scenario `{}` takes no [model] table", S::NAME),
        (Some(d), None) => cfg.model = Some(d),
        _ => {}
    }
    if let Some(m) = &cfg.model {
        m.validate()?;
    }
    match (S::family(), &cfg.family) {
        (None, Some(_)) => bail!("scenario `{}` takes no [family] table", S::NAME),
        (Some(d), None) => cfg.family = Some(d),
        _ => {}
    }
    if let Some(f) = cfg.family {
        let dim = cfg.model.map_or(1, |m| m.dim);
        family_for(f, dim)?;
    }
    S::validate(&cfg.params).with_context(|| format!("params of scenario `{}`", S::NAME))?;
    let hash = config_hash(&cfg, &numerics)?;
    Ok(Prepared { cfg, numerics, hash })
}

fn check<S: Scenario>(text: &str, ov: &Overrides) -> Result<String> {
    Ok(prepare::<S>(text, ov)?.hash)
}

fn execute<S: Scenario>(text: &str, ov: &Overrides) -> Result<(RunOutput, Option<PathBuf>)> {
    let Prepared { cfg, numerics, hash } = prepare::<S>(text, ov)?;
    let ctx = Context { seed: cfg.seed, numerics, model: cfg.model, family: cfg.family, params: &cfg.params };
    let outcome = S::run(&ctx).with_context(|| format!("scenario `{}` (seed {})", S::NAME, cfg.seed))?;
    let output = render::<S>(outcome, &hash, cfg.seed, numerics)?;
    Ok((output, cfg.output.dir))
}

fn render<S: Scenario>(outcome: Outcome, hash: &str, seed: u64, numerics: ResolvedNumerics) -> Result<RunOutput> {
    let gating = S::JOB == JobKind::Verify;
    let pass = outcome.all_pass();
    let mut files = Vec::with_capacity(outcome.tables.len() + 1);
    for t in &outcome.tables {
        files.push((format!("{}-{}.csv", S::NAME, t.name), t.render(hash, seed)?));
    }
    let failures: Vec<&str> = outcome.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let summary = json!({
        "scenario": S::NAME,
        "family": S::FAMILY.as_str(),
        "job": S::JOB.as_str(),
        "seed": seed,
        "config_sha256": hash,
        "numerics": numerics,
        "gating": gating,
        "pass": pass,
        "failures": failures,
        "checks": outcome.checks,
        "results": outcome.results,
        "tables": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    files.push((format!("{}.json", S::NAME), bytes));
    Ok(RunOutput { scenario: S::NAME.into(), summary, files, failed: gating && !pass })
}

/// `2^-k`.
pub(crate) fn dyadic(k: i32) -> f64 {
    2f64.powi(-k)
}
