//! Explicit monotone finite-difference solvers for the projected equations.
//!
//! The occupation variable enters only through its projected coordinates:
//! the remaining budget `t = T - |o|` and, for the linear equation, a
//! single pairing `y = o(phi)`.

mod bsb;
mod linear;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bsb::{check_margin, solve_black_scholes, solve_bsb, BsbSense};
pub use linear::{solve_linear_occupied, YBoundary};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("explicit scheme unstable: CFL ratio {ratio} exceeds 1")]
    Cfl { ratio: f64 },
    #[error("grid margin too small: x_max {x_max} below {required}")]
    Margin { x_max: f64, required: f64 },
    #[error("invalid volatility band [{low}, {high}]")]
    Band { low: f64, high: f64 },
    #[error("non-finite value at time index {step}")]
    NonFinite { step: usize },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// Uniform axis with `n` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self, PdeError> {
        if !(min.is_finite() && max.is_finite() && max > min && n >= 2) {
            return Err(PdeError::InvalidGrid(format!("axis [{min}, {max}] with {n} intervals")));
        }
        Ok(Self { min, max, n })
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Interval index and weight of the right node for linear interpolation.
    fn locate(&self, v: f64) -> (usize, f64) {
        let s = ((v - self.min) / self.step()).clamp(0.0, self.n as f64);
        let i = (s.floor() as usize).min(self.n - 1);
        (i, s - i as f64)
    }
}

/// Time horizon and number of explicit steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeAxis {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, PdeError> {
        if !(horizon > 0.0 && horizon.is_finite() && steps >= 1) {
            return Err(PdeError::InvalidGrid(format!("time horizon {horizon} with {steps} steps")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub time: TimeAxis,
    pub x: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3D {
    pub time: TimeAxis,
    pub x: Axis,
    pub y: Axis,
}

/// Values on saved time levels. Level `k` holds `u(times[k], .)` with the
/// x index varying slowest, then y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSolution {
    pub scheme: String,
    pub cfl_ratio: f64,
    pub times: Vec<f64>,
    pub x: Axis,
    pub y: Option<Axis>,
    pub levels: Vec<Vec<f64>>,
}

impl PdeSolution {
    fn ny(&self) -> usize {
        self.y.map_or(1, |y| y.n + 1)
    }

    /// `u(times[level], x_i, y_j)`.
    pub fn node(&self, level: usize, i: usize, j: usize) -> f64 {
        self.levels[level][i * self.ny() + j]
    }

    /// Level index of time `t`, if that time was saved.
    pub fn level_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    /// Linear (bilinear with y) interpolation on a saved level.
    pub fn interpolate(&self, level: usize, x: f64, y: f64) -> f64 {
        let (i, wx) = self.x.locate(x);
        match self.y {
            None => (1.0 - wx) * self.node(level, i, 0) + wx * self.node(level, i + 1, 0),
            Some(ya) => {
                let (j, wy) = ya.locate(y);
                let lo = (1.0 - wy) * self.node(level, i, j) + wy * self.node(level, i, j + 1);
                let hi = (1.0 - wy) * self.node(level, i + 1, j) + wy * self.node(level, i + 1, j + 1);
                (1.0 - wx) * lo + wx * hi
            }
        }
    }

    /// `x, value` (or `x, y, value`) rows of one saved level.
    pub fn write_slice_csv<W: Write>(&self, level: usize, writer: W) -> Result<(), PdeError> {
        let mut w = csv::Writer::from_writer(writer);
        match self.y {
            None => {
                w.write_record(["x", "value"])?;
                for i in 0..=self.x.n {
                    w.write_record([format!("{:e}", self.x.node(i)), format!("{:e}", self.node(level, i, 0))])?;
                }
            }
            Some(ya) => {
                w.write_record(["x", "y", "value"])?;
                for i in 0..=self.x.n {
                    for j in 0..=ya.n {
                        w.write_record([
                            format!("{:e}", self.x.node(i)),
                            format!("{:e}", ya.node(j)),
                            format!("{:e}", self.node(level, i, j)),
                        ])?;
                    }
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_nodes_and_interpolation() {
        let a = Axis::new(0.0, 2.0, 4).unwrap();
        assert_eq!(a.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(a.locate(0.75), (1, 0.5));
        assert_eq!(a.locate(2.0), (3, 1.0));
        assert_eq!(a.locate(-1.0), (0, 0.0));
        assert!(Axis::new(1.0, 1.0, 4).is_err());
        assert!(TimeAxis::new(0.0, 4).is_err());
    }

    #[test]
    fn slice_csv_rows() {
        let sol = PdeSolution {
            scheme: "test".into(),
            cfl_ratio: 0.5,
            times: vec![0.0],
            x: Axis::new(0.0, 1.0, 2).unwrap(),
            y: None,
            levels: vec![vec![1.0, 2.0, 3.0]],
        };
        let mut buf = Vec::new();
        sol.write_slice_csv(0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(sol.interpolate(0, 0.25, 0.0), 1.5);
    }
}
