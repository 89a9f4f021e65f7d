//! Occupation measures as weighted particle systems.
//!
//! A measure on R^d is stored as a list of atoms `(position, weight)`. The
//! occupation flow of a simulated path is exactly such a list (one atom per
//! time step), so pairings `o(f) = sum_i w_i f(x_i)` are exact sums and no
//! density estimation is ever involved.

mod family;
mod norms;
mod theta;

pub use family::{FamilyParams, Oscillator, SeparatingFamily, DEFAULT_C0, DEFAULT_K_MAX};
pub use norms::{cyl_norm, parabolic_norm, project, projection_gap, CylNorm};
pub use theta::{q, theta_coercive, ThetaJet};

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative particle weight {0}")]
    NegativeWeight(f64),
    #[error("non-finite particle position or weight")]
    NonFinite,
    #[error("measures live on R^d with d >= 1")]
    ZeroDimension,
    #[error("truncation K = {k} exceeds the family size K_max = {k_max}")]
    TruncationTooLarge { k: usize, k_max: usize },
    #[error("invalid separating family: {0}")]
    InvalidFamily(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// A finite positive measure on R^d given by weighted atoms.
///
/// Weights carry units of (clock) time. The total mass is kept as the
/// running sum of weights in insertion order, which is also what a clock
/// accumulating the same increments produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl OccupationMeasure {
    /// The zero measure on R^dim.
    pub fn new(dim: usize) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        Ok(Self { dim, positions: Vec::new(), weights: Vec::new(), mass: 0.0 })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Result<Self, MeasureError> {
        let mut m = Self::new(dim)?;
        m.positions.reserve(n * dim);
        m.weights.reserve(n);
        Ok(m)
    }

    /// `weight * delta_x`.
    pub fn dirac(x: &[f64], weight: f64) -> Result<Self, MeasureError> {
        let mut m = Self::new(x.len())?;
        m.push(x, weight)?;
        Ok(m)
    }

    pub fn from_particles<'a, I>(dim: usize, particles: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut m = Self::new(dim)?;
        for (x, w) in particles {
            m.push(x, w)?;
        }
        Ok(m)
    }

    /// Appends the atom `weight * delta_x`.
    pub fn push(&mut self, x: &[f64], weight: f64) -> Result<(), MeasureError> {
        if x.len() != self.dim {
            return Err(MeasureError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if !weight.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        if weight < 0.0 {
            return Err(MeasureError::NegativeWeight(weight));
        }
        self.positions.extend_from_slice(x);
        self.weights.push(weight);
        self.mass += weight;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `|o| = o(R^d)`.
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.positions.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// `o(f) = sum_i w_i f(x_i)`.
    pub fn pair<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.particles().map(|(x, w)| w * f(x)).sum()
    }

    /// Pairing with a function declared on R^`dim`; rejects a mismatched domain.
    pub fn pair_checked<F: Fn(&[f64]) -> f64>(&self, dim: usize, f: F) -> Result<f64, MeasureError> {
        if dim != self.dim {
            return Err(MeasureError::DimensionMismatch { expected: self.dim, found: dim });
        }
        Ok(self.pair(f))
    }

    /// `o + h delta_x`, the perturbation behind the occupation derivative.
    pub fn with_atom(&self, x: &[f64], h: f64) -> Result<Self, MeasureError> {
        let mut m = self.clone();
        m.push(x, h)?;
        Ok(m)
    }

    /// `o + o'`, as the concatenation of both particle lists.
    pub fn sum(&self, other: &Self) -> Result<Self, MeasureError> {
        if other.dim != self.dim {
            return Err(MeasureError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut m = self.clone();
        m.positions.extend_from_slice(&other.positions);
        m.weights.extend_from_slice(&other.weights);
        m.mass += other.mass;
        Ok(m)
    }

    /// The measure made of the first `n` atoms.
    ///
    /// A simulated occupation flow stores its atoms in time order, so the
    /// prefix of length `n_init + n` is the flow at grid node `n`.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let weights = self.weights[..n].to_vec();
        let mass = weights.iter().sum();
        Self { dim: self.dim, positions: self.positions[..n * self.dim].to_vec(), weights, mass }
    }

    /// Merges atoms at bitwise-identical positions by adding their weights.
    /// No spatial binning is performed, so every pairing is preserved.
    pub fn compact(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            let (pa, pb) = (self.position(a), self.position(b));
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut out = Self { dim: self.dim, positions: Vec::new(), weights: Vec::new(), mass: 0.0 };
        for i in idx {
            let p = self.position(i);
            let w = self.weights[i];
            let same = !out.is_empty() && {
                let last = out.position(out.len() - 1);
                last.iter().zip(p).all(|(a, b)| a.to_bits() == b.to_bits())
            };
            if same {
                *out.weights.last_mut().unwrap() += w;
            } else {
                out.positions.extend_from_slice(p);
                out.weights.push(w);
            }
        }
        out.mass = out.weights.iter().sum();
        out
    }

    /// Writes one row per atom with columns `x_1..x_d,w`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MeasureError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        header.push("w".into());
        wtr.write_record(&header).map_err(|e| MeasureError::Csv(e.to_string()))?;
        for (x, w) in self.particles() {
            let row: Vec<String> = x.iter().chain(std::iter::once(&w)).map(|v| format!("{v:e}")).collect();
            wtr.write_record(&row).map_err(|e| MeasureError::Csv(e.to_string()))?;
        }
        wtr.flush().map_err(|e| MeasureError::Csv(e.to_string()))
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv). The
    /// dimension is inferred from the header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MeasureError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| MeasureError::Csv(e.to_string()))?.clone();
        let ncol = header.len();
        if ncol < 2 || header.get(ncol - 1) != Some("w") {
            return Err(MeasureError::Csv("expected columns x_1..x_d,w".into()));
        }
        let mut m = Self::new(ncol - 1)?;
        let mut buf = vec![0.0; ncol];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| MeasureError::Csv(e.to_string()))?;
            for (slot, field) in buf.iter_mut().zip(rec.iter()) {
                *slot = field.trim().parse().map_err(|_| MeasureError::Csv(format!("bad number '{field}'")))?;
            }
            m.push(&buf[..ncol - 1], buf[ncol - 1])?;
        }
        Ok(m)
    }
}

/// A state `(o, x)` of the parabolic state space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicPoint {
    pub measure: OccupationMeasure,
    pub x: Vec<f64>,
}

impl ParabolicPoint {
    pub fn new(measure: OccupationMeasure, x: Vec<f64>) -> Result<Self, MeasureError> {
        if measure.dim() != x.len() {
            return Err(MeasureError::DimensionMismatch { expected: measure.dim(), found: x.len() });
        }
        Ok(Self { measure, x })
    }

    /// `(0, x)`.
    pub fn at(x: Vec<f64>) -> Result<Self, MeasureError> {
        let m = OccupationMeasure::new(x.len())?;
        Ok(Self { measure: m, x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Membership in the state space truncated at mass budget `horizon`.
    pub fn within_budget(&self, horizon: f64) -> bool {
        self.measure.total_mass() <= horizon
    }
}
