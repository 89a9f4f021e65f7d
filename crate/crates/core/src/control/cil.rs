use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measure::ParabolicPoint;
use crate::osde::{OsdeError, OsdeModel};

/// Relative slack for the eigenvalue test and the trace inequality.
const TOL: f64 = 1e-10;

/// A pair `(Gamma, Gamma')` of symmetric `d x d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPair {
    pub gamma: DMatrix<f64>,
    pub gamma_other: DMatrix<f64>,
}

/// `-(3/eps) I <= diag(Gamma, -Gamma') <= (3/eps) [[I, -I], [-I, I]]`,
/// checked through the smallest eigenvalues of both differences.
pub fn is_admissible(pair: &GammaPair, epsilon: f64) -> bool {
    let d = pair.gamma.nrows();
    let s = 3.0 / epsilon;
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&pair.gamma);
    m.view_mut((d, d), (d, d)).copy_from(&(-&pair.gamma_other));
    let mut g = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        g[(i, i)] = s;
        g[(d + i, d + i)] = s;
        g[(i, d + i)] = -s;
        g[(d + i, i)] = -s;
    }
    let lower = &m + DMatrix::identity(2 * d, 2 * d) * s;
    let upper = g - &m;
    let slack = -TOL * s;
    min_eigenvalue(lower) >= slack && min_eigenvalue(upper) >= slack
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Rejection sampler: draws a symmetric `Gamma'` with entries of order
/// `3/eps`, a positive semidefinite `Q = A A^T`, sets `Gamma = Gamma' - Q`
/// and keeps the pair only if the eigenvalue test accepts it. Returns the
/// accepted pairs and the number of draws.
pub fn sample_admissible_pairs(d: usize, epsilon: f64, count: usize, seed: u64, max_draws: usize) -> (Vec<GammaPair>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 3.0 / epsilon;
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count && draws < max_draws {
        draws += 1;
        let mut gp = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = s * rng.random_range(-1.0..1.0);
                gp[(i, j)] = v;
                gp[(j, i)] = v;
            }
        }
        let a = DMatrix::from_fn(d, d, |_, _| s.sqrt() * rng.random_range(-1.0..1.0));
        let q = &a * a.transpose();
        let pair = GammaPair { gamma: &gp - q, gamma_other: gp };
        if is_admissible(&pair, epsilon) {
            out.push(pair);
        }
    }
    (out, draws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CilReport {
    pub epsilon: f64,
    pub pairs_supplied: usize,
    pub inadmissible: usize,
    /// Inequality evaluations: admissible pairs times controls.
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` observed (nonpositive when every check passes).
    pub max_excess: f64,
    /// `(3 c*^2 / eps) rho^2`, the outer bound.
    pub rho_bound: f64,
    pub pass: bool,
}

/// Checks `tr(sigma sigma^T Gamma - sigma' sigma'^T Gamma') <= (3/eps) ||sigma - sigma'||_F^2`
/// for every admissible pair and every control on the model's grid, with
/// `sigma = sigma(o, x, a)` and `sigma' = sigma(o', x', a)`. Inadmissible
/// pairs are counted and skipped.
pub fn cil_trace_check(
    model: &OsdeModel,
    p: &ParabolicPoint,
    p_other: &ParabolicPoint,
    epsilon: f64,
    pairs: &[GammaPair],
    rho: f64,
) -> Result<CilReport, OsdeError> {
    let d = model.dim();
    let s = 3.0 / epsilon;
    let controls = model.control_set().grid();
    if controls.is_empty() {
        return Err(OsdeError::InvalidModel("empty control grid".into()));
    }
    let mut report = CilReport {
        epsilon,
        pairs_supplied: pairs.len(),
        inadmissible: 0,
        checks: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        rho_bound: s * model.c_star().powi(2) * rho * rho,
        pass: true,
    };
    let sigmas: Vec<(DMatrix<f64>, DMatrix<f64>)> = controls
        .iter()
        .map(|&a| {
            let c = model.coefficients_at(p, a)?;
            let c2 = model.coefficients_at(p_other, a)?;
            Ok((DMatrix::from_row_slice(d, d, &c.sigma), DMatrix::from_row_slice(d, d, &c2.sigma)))
        })
        .collect::<Result<_, OsdeError>>()?;
    for pair in pairs {
        if !is_admissible(pair, epsilon) {
            report.inadmissible += 1;
            continue;
        }
        for (sg, sg2) in &sigmas {
            let lhs = (sg * sg.transpose() * &pair.gamma).trace() - (sg2 * sg2.transpose() * &pair.gamma_other).trace();
            let rhs = s * (sg - sg2).norm_squared();
            let scale = s * (sg.norm_squared() + sg2.norm_squared()).max(1.0);
            report.checks += 1;
            report.max_excess = report.max_excess.max(lhs - rhs);
            if lhs > rhs + TOL * scale {
                report.violations += 1;
            }
        }
    }
    report.pass = report.violations == 0;
    Ok(report)
}
