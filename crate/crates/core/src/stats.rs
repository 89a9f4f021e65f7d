//! Monte Carlo summaries with a deterministic reduction order.

use serde::{Deserialize, Serialize};

/// Mean and standard error of a Monte Carlo sample, tagged with the seed
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Builds an estimate from per-path samples listed in path-index order.
    ///
    /// The standard error is the sample standard deviation (n - 1
    /// denominator) divided by sqrt(n). A single sample has zero stderr.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n_paths: 0, seed };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n > 1 {
            let sq: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&sq) / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n_paths: n, seed }
    }

    /// A deterministic value with zero variance.
    pub fn exact(value: f64, n_paths: usize, seed: u64) -> Self {
        Self { mean: value, stderr: 0.0, n_paths, seed }
    }

    /// z-score of the estimate against a reference value.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        }
    }

    /// True when `reference` lies within `k` standard errors.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr
    }
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Returns `None` when fewer than two points have strictly positive
/// coordinates or all abscissae coincide.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_sample_has_zero_stderr() {
        let est = McEstimate::from_samples(&[1.5; 10], 7);
        assert_eq!(est.mean, 1.5);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_paths, 10);
        assert_eq!(est.seed, 7);
    }

    #[test]
    fn stderr_matches_textbook_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let est = McEstimate::from_samples(&xs, 0);
        // sample variance 5/3
        let expected = (5.0f64 / 3.0).sqrt() / 2.0;
        assert!((est.stderr - expected).abs() < 1e-15);
        assert_eq!(est.mean, 2.5);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
