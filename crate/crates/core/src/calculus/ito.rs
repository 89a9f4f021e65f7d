use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::measure::ParabolicPoint;
use crate::osde::{batch_map, ControlPolicy, OsdeError, OsdeModel, SimOptions, SimPath};
use crate::stats::{loglog_slope, McEstimate};

use super::functional::TestFunctional;

/// `v(O_tau, X_tau) - v(O_0, X_0)` minus the discretized Ito expansion
///
/// ```text
/// sum_n (lambda_n d_o v + b_n . grad v + tr(sigma_n sigma_n^T hess v) / 2) h_n + grad v . sigma_n dW_n
/// ```
///
/// with coefficients and derivatives at the left endpoint of each step.
/// Features of `v` are carried along the path, so the cost is linear in
/// the number of steps. Returns `None` if the path was not recorded.
pub fn ito_residual(v: &TestFunctional, path: &SimPath) -> Option<f64> {
    if !path.is_recorded() || v.dim() != path.dim {
        return None;
    }
    let d = path.dim;
    let init = path.occupation.prefix(path.n_initial);
    let mut feats = v.features(&init);
    let mut phi = vec![0.0; v.n_features()];
    let v0 = v.jet_from_features(&feats, path.x_at(0)).value;
    let mut rhs = 0.0;
    let weights = &path.occupation.weights()[path.n_initial..];
    for n in 0..path.n_steps {
        let x = path.x_at(n);
        let jet = v.jet_from_features(&feats, x);
        let h = path.step_sizes[n];
        let b = &path.drifts[n * d..(n + 1) * d];
        let s = &path.diffusions[n * d * d..(n + 1) * d * d];
        let dw = &path.dw[n * d..(n + 1) * d];
        let mut gen = path.rates[n] * jet.d_o;
        let mut mart = 0.0;
        for i in 0..d {
            gen += b[i] * jet.grad[i];
            // (sigma sigma^T)_{ij} = sum_k s_ik s_jk
            for j in 0..d {
                let a_ij: f64 = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
                gen += 0.5 * a_ij * jet.hess[i * d + j];
            }
            let sdw: f64 = (0..d).map(|k| s[i * d + k] * dw[k]).sum();
            mart += jet.grad[i] * sdw;
        }
        rhs += gen * h + mart;

        v.feature_functions(x, &mut phi);
        for (f, p) in feats.iter_mut().zip(&phi) {
            *f += weights[n] * p;
        }
    }
    let v_end = v.jet_from_features(&feats, &path.x_final).value;
    Some(v_end - v0 - rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub dt: f64,
    pub rms: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ResidualRow>,
    /// Least-squares slope of `log rms` against `log dt`.
    pub slope: Option<f64>,
    pub strictly_decreasing: bool,
    pub seed: u64,
}

impl ConvergenceReport {
    pub fn passes(&self, min_slope: f64) -> bool {
        self.strictly_decreasing && self.slope.is_some_and(|s| s >= min_slope)
    }

    /// `dt, rms, stderr, n_paths`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dt", "rms_residual", "stderr", "n_paths"])?;
        for r in &self.rows {
            w.write_record([format!("{:e}", r.dt), format!("{:e}", r.rms), format!("{:e}", r.stderr), r.n_paths.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RMS Ito residual over `n_paths` paths for each step size.
#[allow(clippy::too_many_arguments)]
pub fn ito_convergence(
    model: &OsdeModel,
    policy: &ControlPolicy,
    v: &TestFunctional,
    init: &ParabolicPoint,
    dts: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceReport, OsdeError> {
    if v.dim() != model.dim() {
        return Err(OsdeError::DimensionMismatch { expected: model.dim(), found: v.dim() });
    }
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let sq = batch_map(model, policy, init, dt, n_paths, seed, SimOptions::default(), |p| {
            ito_residual(v, p).expect("recorded path").powi(2)
        })?;
        let est = McEstimate::from_samples(&sq, seed);
        let rms = est.mean.sqrt();
        let stderr = if rms > 0.0 { est.stderr / (2.0 * rms) } else { 0.0 };
        rows.push(ResidualRow { dt, rms, stderr, n_paths });
    }
    let slope = loglog_slope(&rows.iter().map(|r| r.dt).collect::<Vec<_>>(), &rows.iter().map(|r| r.rms).collect::<Vec<_>>());
    let mut by_dt: Vec<&ResidualRow> = rows.iter().collect();
    by_dt.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let strictly_decreasing = by_dt.windows(2).all(|w| w[0].rms < w[1].rms);
    Ok(ConvergenceReport { rows, slope, strictly_decreasing, seed })
}
