use serde::{Deserialize, Serialize};

use super::{MeasureError, OccupationMeasure};

pub const DEFAULT_C0: f64 = 0.25;
pub const DEFAULT_K_MAX: usize = 4096;

/// Serializable parameters of a [`SeparatingFamily`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_c0() -> f64 {
    DEFAULT_C0
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self { c0: DEFAULT_C0, k_max: DEFAULT_K_MAX }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oscillator {
    pub frequency: Vec<f64>,
    pub amplitude: f64,
}

/// The countable family `(f_k)` defining cylindrical coordinates.
///
/// Member 0 is the constant `c0`. Oscillator `j` contributes the members
/// `2j+1 = a_j cos(xi_j . x)` and `2j+2 = a_j sin(xi_j . x)`, with
/// `a_j = 2^-(j+2) / (1 + |xi_j|)`, so that each has C^1 norm
/// `a_j (1 + |xi_j|) = 2^-(j+2)` and the squared C^1 norms sum to at most
/// `c0^2 + 1/6 < 1`.
///
/// Frequencies run through nested dyadic grids: level `L` is
/// `2^-L Z^d` restricted to `[-2^L, 2^L]^d`. Only one of `xi`, `-xi` is kept
/// since both give the same pair of members up to sign.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingFamily {
    dim: usize,
    c0: f64,
    k_max: usize,
    oscillators: Vec<Oscillator>,
    /// `tail_sq[k] = sum_{k < m <= k_max} ||f_m||_inf^2`.
    tail_sq: Vec<f64>,
}

impl SeparatingFamily {
    pub fn new(dim: usize, c0: f64, k_max: usize) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(MeasureError::InvalidFamily(format!("c0 = {c0} must lie in (0, 1)")));
        }
        if k_max == 0 {
            return Err(MeasureError::InvalidFamily("k_max must be positive".into()));
        }
        let n_osc = k_max.div_ceil(2);
        let oscillators = dyadic_frequencies(dim, n_osc)
            .into_iter()
            .enumerate()
            .map(|(j, frequency)| {
                let norm = frequency.iter().map(|v| v * v).sum::<f64>().sqrt();
                let amplitude = (-((j + 2) as f64)).exp2() / (1.0 + norm);
                Oscillator { frequency, amplitude }
            })
            .collect();
        let mut fam = Self { dim, c0, k_max, oscillators, tail_sq: Vec::new() };
        let mut tail = vec![0.0; k_max + 1];
        for k in (0..k_max).rev() {
            let s = fam.sup_norm(k + 1);
            tail[k] = tail[k + 1] + s * s;
        }
        fam.tail_sq = tail;
        Ok(fam)
    }

    pub fn from_params(dim: usize, params: FamilyParams) -> Result<Self, MeasureError> {
        Self::new(dim, params.c0, params.k_max)
    }

    /// `c0 = 1/4`, `K_max = 4096`.
    pub fn with_defaults(dim: usize) -> Result<Self, MeasureError> {
        Self::new(dim, DEFAULT_C0, DEFAULT_K_MAX)
    }

    pub fn params(&self) -> FamilyParams {
        FamilyParams { c0: self.c0, k_max: self.k_max }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Index of the last member; members are `f_0..=f_{k_max}`.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn oscillators(&self) -> &[Oscillator] {
        &self.oscillators
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<(), MeasureError> {
        if k > self.k_max {
            Err(MeasureError::TruncationTooLarge { k, k_max: self.k_max })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<(), MeasureError> {
        if dim != self.dim {
            Err(MeasureError::DimensionMismatch { expected: self.dim, found: dim })
        } else {
            Ok(())
        }
    }

    fn oscillator_of(&self, k: usize) -> &Oscillator {
        &self.oscillators[(k - 1) / 2]
    }

    /// `f_k(x)`.
    pub fn member(&self, k: usize, x: &[f64]) -> f64 {
        if k == 0 {
            return self.c0;
        }
        let osc = self.oscillator_of(k);
        let phase = dot(&osc.frequency, x);
        if k % 2 == 1 {
            osc.amplitude * phase.cos()
        } else {
            osc.amplitude * phase.sin()
        }
    }

    /// Gradient of `f_k` at `x`, written into `out`.
    pub fn member_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        if k == 0 {
            out.iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        let osc = self.oscillator_of(k);
        let phase = dot(&osc.frequency, x);
        let s = if k % 2 == 1 { -osc.amplitude * phase.sin() } else { osc.amplitude * phase.cos() };
        for (g, xi) in out.iter_mut().zip(&osc.frequency) {
            *g = s * xi;
        }
    }

    /// Writes `f_0(x), .., f_k(x)` into `out[..=k]`.
    pub fn eval_upto(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.c0;
        let mut m = 1;
        for osc in &self.oscillators {
            if m > k {
                break;
            }
            let (s, c) = dot(&osc.frequency, x).sin_cos();
            out[m] = osc.amplitude * c;
            if m < k {
                out[m + 1] = osc.amplitude * s;
            }
            m += 2;
        }
    }

    /// `||f_k||_inf`.
    pub fn sup_norm(&self, k: usize) -> f64 {
        if k == 0 {
            self.c0
        } else {
            self.oscillator_of(k).amplitude
        }
    }

    /// `||f_k||_{C^1} = ||f_k||_inf + ||grad f_k||_inf`, in closed form.
    pub fn c1_norm(&self, k: usize) -> f64 {
        if k == 0 {
            return self.c0;
        }
        let osc = self.oscillator_of(k);
        let freq = osc.frequency.iter().map(|v| v * v).sum::<f64>().sqrt();
        osc.amplitude * (1.0 + freq)
    }

    /// `sum_{k <= k_max} ||f_k||_{C^1}^2`; at most 1 by construction.
    pub fn c1_norm_sq_sum(&self) -> f64 {
        (0..=self.k_max).map(|k| self.c1_norm(k).powi(2)).sum()
    }

    /// `sum_{k < m <= k_max} ||f_m||_inf^2`.
    pub fn tail_sup_sq(&self, k: usize) -> f64 {
        self.tail_sq[k.min(self.k_max)]
    }

    /// `(o(f_0), .., o(f_k))`.
    pub fn pairings(&self, o: &OccupationMeasure, k: usize) -> Result<Vec<f64>, MeasureError> {
        self.check_dim(o.dim())?;
        self.check_k(k)?;
        let mut acc = vec![0.0; k + 1];
        let mut buf = vec![0.0; k + 1];
        for (x, w) in o.particles() {
            self.eval_upto(k, x, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += w * b;
            }
        }
        Ok(acc)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The first `count` frequencies of the nested dyadic grids.
fn dyadic_frequencies(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut level: u32 = 0;
    while out.len() < count {
        // integer coordinates n with xi = n / 2^L and |n_i| <= 4^L
        let scale = (1u64 << level) as f64;
        let bound = 1i64 << (2 * level);
        let mut fresh: Vec<Vec<i64>> = Vec::new();
        let mut n = vec![-bound; dim];
        loop {
            if is_positive_half(&n) && (level == 0 || !in_previous_level(&n, level)) {
                fresh.push(n.clone());
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == dim {
                    break;
                }
                n[i] += 1;
                if n[i] > bound {
                    n[i] = -bound;
                    i += 1;
                } else {
                    break;
                }
            }
            if i == dim {
                break;
            }
        }
        fresh.sort_by(|a, b| {
            let na: i64 = a.iter().map(|v| v * v).sum();
            let nb: i64 = b.iter().map(|v| v * v).sum();
            na.cmp(&nb).then_with(|| a.cmp(b))
        });
        for n in fresh {
            if out.len() == count {
                break;
            }
            out.push(n.iter().map(|&v| v as f64 / scale).collect());
        }
        level += 1;
    }
    out
}

fn is_positive_half(n: &[i64]) -> bool {
    n.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

/// Whether the level-`level` grid point `n / 2^level` already belongs to
/// level `level - 1`.
fn in_previous_level(n: &[i64], level: u32) -> bool {
    let prev_bound = 1i64 << (2 * level - 1);
    n.iter().all(|&v| v % 2 == 0 && v.abs() <= prev_bound)
}
