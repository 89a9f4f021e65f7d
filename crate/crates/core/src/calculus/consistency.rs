use serde::{Deserialize, Serialize};

use crate::measure::{MeasureError, ParabolicPoint};
use crate::stats::loglog_slope;

use super::functional::{occ_derivative_fd, TestFunctional};

/// Default one-sided steps for the occupation derivative.
pub const OCC_STEPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
/// Default central-difference steps in space.
pub const SPACE_STEPS: [f64; 4] = [1e-1, 5e-2, 2.5e-2, 1.25e-2];

/// Errors below this multiple of the rounding level of a difference
/// quotient carry no information about its truncation order.
const ROUNDING_MULTIPLE: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub h: f64,
    /// Largest `|fd - analytic| / (1 + |analytic|)` over points and components.
    pub max_error: f64,
    /// Largest rounding level of the quotient over the points.
    pub rounding_floor: f64,
}

impl ErrorRow {
    fn resolved(&self) -> bool {
        self.max_error > self.rounding_floor
    }
}

/// Observed convergence orders of finite differences against analytic
/// derivatives. An order of `None` means every error sat at the rounding
/// level, i.e. the quotient is exact for this functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub occupation: Vec<ErrorRow>,
    pub gradient: Vec<ErrorRow>,
    pub hessian: Vec<ErrorRow>,
    pub occupation_order: Option<f64>,
    pub gradient_order: Option<f64>,
    pub hessian_order: Option<f64>,
    pub n_points: usize,
}

impl DerivativeReport {
    pub fn passes(&self, min_occ_order: f64, min_space_order: f64) -> bool {
        self.occupation_order.is_none_or(|o| o >= min_occ_order)
            && self.gradient_order.is_none_or(|o| o >= min_space_order)
            && self.hessian_order.is_none_or(|o| o >= min_space_order)
    }
}

fn observed_order(rows: &[ErrorRow]) -> Option<f64> {
    let used: Vec<&ErrorRow> = rows.iter().filter(|r| r.resolved()).collect();
    if used.len() < 2 {
        return None;
    }
    let hs: Vec<f64> = used.iter().map(|r| r.h).collect();
    let es: Vec<f64> = used.iter().map(|r| r.max_error).collect();
    loglog_slope(&hs, &es)
}

fn rel(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / (1.0 + an.abs())
}

/// Compares analytic `d_o v`, `grad v` and `hess v` with one-sided
/// (occupation) and central (space) difference quotients.
pub fn derivative_consistency(
    v: &TestFunctional,
    points: &[ParabolicPoint],
    occ_steps: &[f64],
    space_steps: &[f64],
) -> Result<DerivativeReport, MeasureError> {
    let eps = f64::EPSILON;
    let mut occupation = Vec::with_capacity(occ_steps.len());
    for &h in occ_steps {
        let mut row = ErrorRow { h, max_error: 0.0, rounding_floor: 0.0 };
        for p in points {
            let jet = v.jet(p);
            let fd = occ_derivative_fd(v, p, h)?;
            row.max_error = row.max_error.max(rel(fd, jet.d_o));
            row.rounding_floor = row.rounding_floor.max(ROUNDING_MULTIPLE * eps * (1.0 + jet.value.abs()) / h);
        }
        occupation.push(row);
    }

    let mut gradient = Vec::with_capacity(space_steps.len());
    let mut hessian = Vec::with_capacity(space_steps.len());
    for &h in space_steps {
        let mut g_row = ErrorRow { h, max_error: 0.0, rounding_floor: 0.0 };
        let mut h_row = ErrorRow { h, max_error: 0.0, rounding_floor: 0.0 };
        for p in points {
            let d = p.dim();
            let feats = v.features(&p.measure);
            let jet = v.jet_from_features(&feats, &p.x);
            let at = |shift: &[(usize, f64)]| {
                let mut x = p.x.clone();
                for &(i, s) in shift {
                    x[i] += s;
                }
                v.jet_from_features(&feats, &x).value
            };
            let scale = 1.0 + jet.value.abs();
            g_row.rounding_floor = g_row.rounding_floor.max(ROUNDING_MULTIPLE * eps * scale / h);
            h_row.rounding_floor = h_row.rounding_floor.max(ROUNDING_MULTIPLE * eps * scale / (h * h));
            for i in 0..d {
                let g = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
                g_row.max_error = g_row.max_error.max(rel(g, jet.grad[i]));
                for j in 0..d {
                    let fd = if i == j {
                        (at(&[(i, h)]) - 2.0 * jet.value + at(&[(i, -h)])) / (h * h)
                    } else {
                        (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)]) + at(&[(i, -h), (j, -h)]))
                            / (4.0 * h * h)
                    };
                    h_row.max_error = h_row.max_error.max(rel(fd, jet.hess[i * d + j]));
                }
            }
        }
        gradient.push(g_row);
        hessian.push(h_row);
    }

    Ok(DerivativeReport {
        occupation_order: observed_order(&occupation),
        gradient_order: observed_order(&gradient),
        hessian_order: observed_order(&hessian),
        occupation,
        gradient,
        hessian,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::calculus::SmoothOuter;
    use crate::measure::{OccupationMeasure, SeparatingFamily};

    fn random_points(d: usize, n: usize, seed: u64) -> Vec<ParabolicPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut o = OccupationMeasure::new(d).unwrap();
                for _ in 0..3 {
                    let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                    o.push(&y, rng.random_range(0.0..0.3)).unwrap();
                }
                let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                ParabolicPoint::new(o, x).unwrap()
            })
            .collect()
    }

    #[test]
    fn theta_quotients_are_exact_in_the_measure() {
        let rep = derivative_consistency(&TestFunctional::theta(2), &random_points(2, 20, 1), &OCC_STEPS, &SPACE_STEPS).unwrap();
        assert_eq!(rep.occupation_order, None);
        assert!(rep.gradient_order.unwrap() > 1.9);
        assert!(rep.hessian_order.unwrap() > 1.9);
        assert!(rep.passes(0.9, 1.9));
    }

    #[test]
    fn rho_squared_is_first_order_in_the_measure() {
        let fam = Arc::new(SeparatingFamily::new(1, 0.25, 64).unwrap());
        let reference = ParabolicPoint::new(OccupationMeasure::dirac(&[0.5], 0.4).unwrap(), vec![1.0]).unwrap();
        let v = TestFunctional::rho_squared(fam, reference, 64).unwrap();
        let rep = derivative_consistency(&v, &random_points(1, 20, 2), &OCC_STEPS, &SPACE_STEPS).unwrap();
        assert!((rep.occupation_order.unwrap() - 1.0).abs() < 0.05);
        // quadratic in x: central differences are exact
        assert_eq!(rep.gradient_order, None);
        assert!(rep.passes(0.9, 1.9));
    }

    #[test]
    fn cylindrical_orders() {
        let fam = Arc::new(SeparatingFamily::new(2, 0.25, 64).unwrap());
        let w: Vec<f64> = [1usize, 4, 9].iter().map(|&k| 1.0 / fam.sup_norm(k)).collect();
        let v = TestFunctional::cylindrical(fam, vec![1, 4, 9], Arc::new(SmoothOuter { w, nu: vec![0.7, -0.4], kappa: 0.2 }))
            .unwrap();
        let rep = derivative_consistency(&v, &random_points(2, 20, 3), &OCC_STEPS, &SPACE_STEPS).unwrap();
        assert!(rep.occupation_order.unwrap() >= 0.9, "{rep:?}");
        assert!(rep.gradient_order.unwrap() >= 1.9, "{rep:?}");
        assert!(rep.hessian_order.unwrap() >= 1.9, "{rep:?}");
    }
}
