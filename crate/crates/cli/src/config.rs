//! Scenario configuration files.
//!
//! A config is a TOML document with a fixed top level and a scenario-specific
//! `[params]` table. It is read twice: once loosely to find the scenario,
//! then strictly against that scenario's parameter type, so that unknown
//! keys anywhere are reported with their line and column.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use occupied::measure::{FamilyParams, OccupationMeasure, SeparatingFamily};
use occupied::osde::{Clock, OsdeModel, StateView, TerminalCostFn};
use occupied::pricing::PayoffSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Simulate,
    Price,
    Verify,
    Diagnose,
}

impl JobKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JobKind::Simulate => "simulate",
            JobKind::Price => "price",
            JobKind::Verify => "verify",
            JobKind::Diagnose => "diagnose",
        }
    }
}

/// Monte Carlo controls shared by every scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
}

/// Resolved numerics after scenario defaults and command-line overrides.
/// A field is `None` when the scenario does not use it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedNumerics {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
}

impl ResolvedNumerics {
    pub fn dt(&self) -> f64 {
        self.dt.expect("scenario declares a time step")
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths.expect("scenario declares a path count")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Occupation clock by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClockConfig {
    /// `lambda = 1`.
    Standard,
    /// `lambda = ||sigma||_F^2`.
    QuadraticVariation,
    /// `lambda = 1 + amplitude (1 - cos x_1)`.
    Cosine { amplitude: f64 },
}

/// Drift and diffusion by name. Every model is uncontrolled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientsConfig {
    /// `b = 0`, `sigma = s I`.
    Brownian { sigma: f64 },
    /// `b = -theta x`, `sigma = s I`.
    OrnsteinUhlenbeck { theta: f64, sigma: f64 },
    /// One-dimensional `sigma = base + amplitude sin x`; with `log_price`
    /// the drift is `-sigma^2 / 2`.
    LocalVol { base: f64, amplitude: f64, log_price: bool },
    /// One-dimensional `dX = s X dW`.
    Geometric { sigma: f64 },
    /// `b = kappa (m - x)` with `m` the occupation mean `o(y) / |o|`
    /// (taken as `x` while the measure is empty), `sigma = s I`.
    OccupationReverting { kappa: f64, sigma: f64 },
}

/// Terminal cost `g(o, x)` by name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalConfig {
    #[default]
    Zero,
    /// `sin x_1`.
    Sine,
    /// `|x|^2`.
    Square,
    /// `o(B)` for the closed ball of `radius` about the origin.
    BallOccupation { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub horizon: f64,
    pub c_star: f64,
    pub clock: ClockConfig,
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub terminal: TerminalConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            bail!("model.dim must be positive");
        }
        positive("model.horizon", self.horizon)?;
        positive("model.c_star", self.c_star)?;
        match self.coefficients {
            CoefficientsConfig::Brownian { sigma } | CoefficientsConfig::Geometric { sigma } => positive("model.coefficients.sigma", sigma)?,
            CoefficientsConfig::OrnsteinUhlenbeck { theta, sigma } => {
                nonnegative("model.coefficients.theta", theta)?;
                positive("model.coefficients.sigma", sigma)?;
            }
            CoefficientsConfig::LocalVol { base, amplitude, .. } => {
                if !(base > amplitude.abs() && base.is_finite()) {
                    bail!("model.coefficients: local vol needs base > |amplitude| so that sigma stays positive");
                }
            }
            CoefficientsConfig::OccupationReverting { kappa, sigma } => {
                nonnegative("model.coefficients.kappa", kappa)?;
                positive("model.coefficients.sigma", sigma)?;
            }
        }
        if let TerminalConfig::BallOccupation { radius } = self.terminal {
            nonnegative("model.terminal.radius", radius)?;
        }
        if let ClockConfig::Cosine { amplitude } = self.clock {
            nonnegative("model.clock.amplitude", amplitude)?;
        }
        let one_dim = matches!(self.coefficients, CoefficientsConfig::LocalVol { .. } | CoefficientsConfig::Geometric { .. });
        if one_dim && self.dim != 1 {
            bail!("model.coefficients: this kind is one-dimensional, got dim = {}", self.dim);
        }
        Ok(())
    }

    pub fn build(&self) -> Result<OsdeModel> {
        self.validate()?;
        let d = self.dim;
        let mut model = OsdeModel::new(d, self.horizon, self.c_star)?;
        let diag = move |s: f64| {
            move |_: &StateView, _: &[f64], _: f64, out: &mut [f64]| {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = s;
                }
            }
        };
        model = match self.coefficients {
            CoefficientsConfig::Brownian { sigma } => model.with_diffusion(Arc::new(diag(sigma))),
            CoefficientsConfig::OrnsteinUhlenbeck { theta, sigma } => model
                .with_diffusion(Arc::new(diag(sigma)))
                .with_drift(Arc::new(move |_: &StateView, x: &[f64], _, b: &mut [f64]| {
                    for (bi, xi) in b.iter_mut().zip(x) {
                        *bi = -theta * xi;
                    }
                })),
            CoefficientsConfig::LocalVol { base, amplitude, log_price } => {
                let m = model.with_diffusion(Arc::new(move |_: &StateView, x: &[f64], _, s: &mut [f64]| {
                    s[0] = base + amplitude * x[0].sin();
                }));
                if log_price {
                    m.with_drift(Arc::new(move |_: &StateView, x: &[f64], _, b: &mut [f64]| {
                        let s = base + amplitude * x[0].sin();
                        b[0] = -0.5 * s * s;
                    }))
                } else {
                    m
                }
            }
            CoefficientsConfig::Geometric { sigma } => {
                model.with_diffusion(Arc::new(move |_: &StateView, x: &[f64], _, s: &mut [f64]| s[0] = sigma * x[0]))
            }
            CoefficientsConfig::OccupationReverting { kappa, sigma } => {
                let mut m = model.with_diffusion(Arc::new(diag(sigma)));
                for i in 0..d {
                    m = m.track(Arc::new(move |y: &[f64]| y[i]));
                }
                m.with_drift(Arc::new(move |view: &StateView, x: &[f64], _, b: &mut [f64]| {
                    for i in 0..d {
                        let mean = if view.mass > 0.0 { view.coords[i] / view.mass } else { x[i] };
                        b[i] = kappa * (mean - x[i]);
                    }
                }))
            }
        };
        let clock = match self.clock {
            ClockConfig::Standard => Clock::Standard,
            ClockConfig::QuadraticVariation => Clock::QuadraticVariation,
            ClockConfig::Cosine { amplitude } => Clock::Custom(Arc::new(move |_: &StateView, x: &[f64], _| 1.0 + amplitude * (1.0 - x[0].cos()))),
        };
        let terminal: TerminalCostFn = match self.terminal {
            TerminalConfig::Zero => Arc::new(|_: &OccupationMeasure, _: &[f64]| 0.0),
            TerminalConfig::Sine => Arc::new(|_: &OccupationMeasure, x: &[f64]| x[0].sin()),
            TerminalConfig::Square => Arc::new(|_: &OccupationMeasure, x: &[f64]| x.iter().map(|v| v * v).sum()),
            TerminalConfig::BallOccupation { radius } => PayoffSpec::OccupationTime { radius }.terminal_fn(),
        };
        Ok(model.with_clock(clock).with_terminal_cost(terminal))
    }
}

/// A config file with parameters of type `P`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile<P> {
    pub job: JobKind,
    pub scenario: String,
    /// Mandatory: runs are never seeded from the clock.
    pub seed: u64,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub family: Option<FamilyParams>,
    #[serde(default)]
    pub output: OutputConfig,
    pub params: P,
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Only the keys needed to dispatch; everything else is checked later.
#[derive(Debug, Deserialize)]
struct Header {
    job: JobKind,
    scenario: String,
}

pub fn read_header(text: &str) -> Result<(JobKind, String)> {
    #[derive(Deserialize)]
    struct Loose {
        #[serde(flatten)]
        header: Header,
        #[serde(flatten)]
        _rest: toml::Table,
    }
    let loose: Loose = toml::from_str(text).context("config")?;
    Ok((loose.header.job, loose.header.scenario))
}

pub fn parse_typed<P: DeserializeOwned>(text: &str) -> Result<ConfigFile<P>> {
    toml::from_str(text).context("config")
}

/// SHA-256 of the canonical JSON form of the effective config. The output
/// location is excluded so that `--out` does not change any report.
pub fn config_hash<P: Serialize>(cfg: &ConfigFile<P>, numerics: &ResolvedNumerics) -> Result<String> {
    #[derive(Serialize)]
    struct Canonical<'a, P> {
        job: JobKind,
        scenario: &'a str,
        seed: u64,
        numerics: &'a ResolvedNumerics,
        model: &'a Option<ModelConfig>,
        family: &'a Option<FamilyParams>,
        params: &'a P,
    }
    let canonical = Canonical {
        job: cfg.job,
        scenario: &cfg.scenario,
        seed: cfg.seed,
        numerics,
        model: &cfg.model,
        family: &cfg.family,
        params: &cfg.params,
    };
    let bytes = serde_json::to_vec(&canonical)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn family_for(params: FamilyParams, dim: usize) -> Result<SeparatingFamily> {
    positive("family.c0", params.c0)?;
    if params.k_max == 0 {
        bail!("family.k_max must be positive");
    }
    Ok(SeparatingFamily::from_params(dim, params)?)
}

pub fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

pub fn nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        bail!("{name} must be nonnegative and finite, got {v}");
    }
    Ok(())
}

pub fn positive_count(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        bail!("{name} must be at least 1");
    }
    Ok(())
}
