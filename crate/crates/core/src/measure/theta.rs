//! The coercivity function `theta(o, x) = o(q) + q(x)`, `q(x) = sqrt(1 + |x|^2)`.

use nalgebra::{DMatrix, DVector};

use super::ParabolicPoint;

pub fn q(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Value and all derivatives of `theta` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaJet {
    pub value: f64,
    /// Occupation derivative, `q(x)`.
    pub d_o: f64,
    /// `x / q(x)`.
    pub grad: DVector<f64>,
    /// `(I - x x^T / q^2) / q`.
    pub hess: DMatrix<f64>,
}

pub fn theta_coercive(p: &ParabolicPoint) -> ThetaJet {
    let qx = q(&p.x);
    let d = p.x.len();
    let x = DVector::from_column_slice(&p.x);
    let grad = &x / qx;
    let hess = (DMatrix::identity(d, d) - &x * x.transpose() / (qx * qx)) / qx;
    ThetaJet { value: p.measure.pair(q) + qx, d_o: qx, grad, hess }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::OccupationMeasure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn theta_value(o: &OccupationMeasure, x: &[f64]) -> f64 {
        o.pair(q) + q(x)
    }

    #[test]
    fn origin_of_empty_measure() {
        let p = ParabolicPoint::at(vec![0.0, 0.0]).unwrap();
        let j = theta_coercive(&p);
        assert_eq!(j.value, 1.0);
        assert_eq!(j.d_o, 1.0);
        assert!(j.grad.iter().all(|&g| g == 0.0));
        assert_eq!(j.hess, DMatrix::identity(2, 2));
    }

    #[test]
    fn weighted_atom_at_origin() {
        let p = ParabolicPoint::new(OccupationMeasure::dirac(&[0.0], 2.0).unwrap(), vec![0.0]).unwrap();
        assert_eq!(theta_coercive(&p).value, 3.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..100 {
            let d = rng.random_range(1..=3);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut o = OccupationMeasure::new(d).unwrap();
            for _ in 0..3 {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                o.push(&y, rng.random_range(0.0..0.5)).unwrap();
            }
            let p = ParabolicPoint::new(o.clone(), x.clone()).unwrap();
            let jet = theta_coercive(&p);
            // linear in o: the one-sided quotient is exact up to rounding
            let fd_o = (theta_value(&o.with_atom(&x, h).unwrap(), &x) - jet.value) / h;
            assert!((fd_o - jet.d_o).abs() < 1e-9);
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let g = (theta_value(&o, &xp) - theta_value(&o, &xm)) / (2.0 * h);
                assert!((g - jet.grad[i]).abs() < 1e-7);
                for j in 0..d {
                    let mut xpp = xp.clone();
                    let mut xpm = xp.clone();
                    let mut xmp = xm.clone();
                    let mut xmm = xm.clone();
                    xpp[j] += h;
                    xpm[j] -= h;
                    xmp[j] += h;
                    xmm[j] -= h;
                    let hij = (q(&xpp) - q(&xpm) - q(&xmp) + q(&xmm)) / (4.0 * h * h);
                    assert!((hij - jet.hess[(i, j)]).abs() < 1e-5, "{hij} vs {}", jet.hess[(i, j)]);
                }
            }
        }
    }
}
