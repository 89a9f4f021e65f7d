use std::fmt;
use std::sync::Arc;

use crate::measure::{q, MeasureError, OccupationMeasure, ParabolicPoint, SeparatingFamily};

/// Value and derivatives of an outer function `F(z, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterJet {
    pub value: f64,
    pub dz: Vec<f64>,
    pub dx: Vec<f64>,
    /// Row-major `d x d`.
    pub dxx: Vec<f64>,
}

/// A smooth `F: R^K x R^d -> R` with analytic derivatives.
pub trait OuterFn: Send + Sync {
    fn jet(&self, z: &[f64], x: &[f64]) -> OuterJet;
}

/// `F(z, x) = sin(w.z + nu.x) + kappa |x|^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOuter {
    pub w: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: f64,
}

impl OuterFn for SmoothOuter {
    fn jet(&self, z: &[f64], x: &[f64]) -> OuterJet {
        let d = x.len();
        let u: f64 = self.w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
            + self.nu.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let (s, c) = u.sin_cos();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let mut dxx = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                dxx[i * d + j] = -s * self.nu[i] * self.nu[j];
            }
            dxx[i * d + i] += self.kappa;
        }
        OuterJet {
            value: s + 0.5 * self.kappa * x2,
            dz: self.w.iter().map(|wk| c * wk).collect(),
            dx: self.nu.iter().zip(x).map(|(n, xi)| c * n + self.kappa * xi).collect(),
            dxx,
        }
    }
}

/// `F(z, x) = offset + coeffs.z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOuter {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl OuterFn for LinearOuter {
    fn jet(&self, z: &[f64], x: &[f64]) -> OuterJet {
        let d = x.len();
        OuterJet {
            value: self.offset + self.coeffs.iter().zip(z).map(|(a, b)| a * b).sum::<f64>(),
            dz: self.coeffs.clone(),
            dx: vec![0.0; d],
            dxx: vec![0.0; d * d],
        }
    }
}

/// Value and derivatives of a test functional at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalJet {
    pub value: f64,
    pub d_o: f64,
    pub grad: Vec<f64>,
    /// Row-major `d x d`.
    pub hess: Vec<f64>,
}

/// Functionals `v(o, x)` with analytic occupation and space derivatives.
///
/// Every kind is a function of finitely many linear features `o(phi_j)` and
/// of `x`, which is what allows incremental evaluation along a path.
#[derive(Clone)]
pub enum TestFunctional {
    /// `F(o(f_{k_1}), .., o(f_{k_J}), x)`.
    Cylindrical { family: Arc<SeparatingFamily>, indices: Vec<usize>, outer: Arc<dyn OuterFn> },
    /// `rho^2((o, x) - (o_ref, x_ref))` with the cylindrical part truncated at `k`.
    RhoSquared { family: Arc<SeparatingFamily>, k: usize, reference: ParabolicPoint, reference_coords: Vec<f64> },
    /// The coercivity function `o(q) + q(x)`.
    Theta { dim: usize },
}

impl fmt::Debug for TestFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunctional::Cylindrical { indices, .. } => write!(f, "Cylindrical({indices:?})"),
            TestFunctional::RhoSquared { k, .. } => write!(f, "RhoSquared(K = {k})"),
            TestFunctional::Theta { dim } => write!(f, "Theta(d = {dim})"),
        }
    }
}

impl TestFunctional {
    pub fn cylindrical(
        family: Arc<SeparatingFamily>,
        indices: Vec<usize>,
        outer: Arc<dyn OuterFn>,
    ) -> Result<Self, MeasureError> {
        if let Some(&k) = indices.iter().max() {
            family.check_k(k)?;
        }
        Ok(TestFunctional::Cylindrical { family, indices, outer })
    }

    pub fn rho_squared(family: Arc<SeparatingFamily>, reference: ParabolicPoint, k: usize) -> Result<Self, MeasureError> {
        family.check_dim(reference.dim())?;
        let reference_coords = family.pairings(&reference.measure, k)?;
        Ok(TestFunctional::RhoSquared { family, k, reference, reference_coords })
    }

    pub fn theta(dim: usize) -> Self {
        TestFunctional::Theta { dim }
    }

    /// `v(o, x) = |o|`, written as `o(f_0) / c_0`.
    pub fn total_mass(family: Arc<SeparatingFamily>) -> Self {
        let c0 = family.c0();
        TestFunctional::Cylindrical { family, indices: vec![0], outer: Arc::new(LinearOuter { coeffs: vec![1.0 / c0], offset: 0.0 }) }
    }

    pub fn constant(family: Arc<SeparatingFamily>, c: f64) -> Self {
        TestFunctional::Cylindrical { family, indices: vec![], outer: Arc::new(LinearOuter { coeffs: vec![], offset: c }) }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunctional::Cylindrical { family, .. } | TestFunctional::RhoSquared { family, .. } => family.dim(),
            TestFunctional::Theta { dim } => *dim,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TestFunctional::Cylindrical { indices, .. } => indices.len(),
            TestFunctional::RhoSquared { k, .. } => k + 1,
            TestFunctional::Theta { .. } => 1,
        }
    }

    /// The functions `phi_j` with `v` depending on `o` through `o(phi_j)`,
    /// evaluated at `y`.
    pub fn feature_functions(&self, y: &[f64], out: &mut [f64]) {
        match self {
            TestFunctional::Cylindrical { family, indices, .. } => {
                for (o, &k) in out.iter_mut().zip(indices) {
                    *o = family.member(k, y);
                }
            }
            TestFunctional::RhoSquared { family, k, .. } => family.eval_upto(*k, y, out),
            TestFunctional::Theta { .. } => out[0] = q(y),
        }
    }

    pub fn features(&self, o: &OccupationMeasure) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features()];
        let mut buf = vec![0.0; self.n_features()];
        for (y, w) in o.particles() {
            self.feature_functions(y, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += w * b;
            }
        }
        acc
    }

    /// Value and derivatives from precomputed features.
    pub fn jet_from_features(&self, feats: &[f64], x: &[f64]) -> FunctionalJet {
        let d = x.len();
        match self {
            TestFunctional::Cylindrical { family, indices, outer } => {
                let j = outer.jet(feats, x);
                let d_o = indices.iter().zip(&j.dz).map(|(&k, dz)| dz * family.member(k, x)).sum();
                FunctionalJet { value: j.value, d_o, grad: j.dx, hess: j.dxx }
            }
            TestFunctional::RhoSquared { family, k, reference, reference_coords } => {
                let mut fx = vec![0.0; k + 1];
                family.eval_upto(*k, x, &mut fx);
                let mut cyl2 = 0.0;
                let mut d_o = 0.0;
                for m in 0..=*k {
                    let g = feats[m] - reference_coords[m];
                    cyl2 += g * g;
                    d_o += 2.0 * g * fx[m];
                }
                let dx: Vec<f64> = x.iter().zip(&reference.x).map(|(a, b)| a - b).collect();
                let mut hess = vec![0.0; d * d];
                for i in 0..d {
                    hess[i * d + i] = 2.0;
                }
                FunctionalJet {
                    value: cyl2 + dx.iter().map(|v| v * v).sum::<f64>(),
                    d_o,
                    grad: dx.iter().map(|v| 2.0 * v).collect(),
                    hess,
                }
            }
            TestFunctional::Theta { .. } => {
                let qx = q(x);
                let mut hess = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[i * d + j] = (delta - x[i] * x[j] / (qx * qx)) / qx;
                    }
                }
                FunctionalJet { value: feats[0] + qx, d_o: qx, grad: x.iter().map(|v| v / qx).collect(), hess }
            }
        }
    }

    pub fn jet(&self, p: &ParabolicPoint) -> FunctionalJet {
        self.jet_from_features(&self.features(&p.measure), &p.x)
    }

    pub fn value(&self, o: &OccupationMeasure, x: &[f64]) -> f64 {
        self.jet_from_features(&self.features(o), x).value
    }

    /// The linear (flat) derivative `delta_o v(o, x)(y)`, defined for
    /// functionals of finitely many pairings. At `y = x` it equals the
    /// occupation derivative.
    pub fn linear_derivative(&self, p: &ParabolicPoint, y: &[f64]) -> f64 {
        let feats = self.features(&p.measure);
        let mut phi = vec![0.0; self.n_features()];
        self.feature_functions(y, &mut phi);
        match self {
            TestFunctional::Cylindrical { outer, .. } => {
                let j = outer.jet(&feats, &p.x);
                j.dz.iter().zip(&phi).map(|(a, b)| a * b).sum()
            }
            TestFunctional::RhoSquared { k, reference_coords, .. } => {
                (0..=*k).map(|m| 2.0 * (feats[m] - reference_coords[m]) * phi[m]).sum()
            }
            TestFunctional::Theta { .. } => phi[0],
        }
    }
}

/// One-sided quotient `(v(o + h delta_x, x) - v(o, x)) / h`.
pub fn occ_derivative_fd(v: &TestFunctional, p: &ParabolicPoint, h: f64) -> Result<f64, MeasureError> {
    let base = v.value(&p.measure, &p.x);
    let bumped = v.value(&p.measure.with_atom(&p.x, h)?, &p.x);
    Ok((bumped - base) / h)
}
