use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::ParabolicPoint;

use super::model::{ControlPolicy, OsdeModel};
use super::path::{simulate_with, SimOptions, SimPath};
use super::OsdeError;

/// Exit data of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_index: u64,
    pub tau: f64,
    pub terminal_cost: f64,
    pub running_cost: f64,
    pub steps: usize,
    pub x_exit: Vec<f64>,
    /// Tracked pairings of the exit occupation measure.
    pub coordinates: Vec<f64>,
}

/// Runs paths `0..n_paths` in parallel and maps each through `f`. Results
/// are in path-index order and do not depend on the number of workers.
/// The failure with the smallest path index is reported.
#[allow(clippy::too_many_arguments)]
pub fn batch_map<R, F>(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
    options: SimOptions,
    f: F,
) -> Result<Vec<R>, OsdeError>
where
    R: Send,
    F: Fn(&SimPath) -> R + Sync,
{
    if n_paths == 0 {
        return Err(OsdeError::InvalidModel("n_paths must be at least 1".into()));
    }
    let results: Vec<Result<R, OsdeError>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            simulate_with(model, policy, init, dt, seed, i, options, None)
                .map(|p| f(&p))
                .map_err(|e| OsdeError::Path { index: i, source: Box::new(e) })
        })
        .collect();
    results.into_iter().collect()
}

/// Per-path exit summaries, simulated without trace recording.
pub fn batch(
    model: &OsdeModel,
    policy: &ControlPolicy,
    init: &ParabolicPoint,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathSummary>, OsdeError> {
    let options = SimOptions { record: false, ..SimOptions::default() };
    batch_map(model, policy, init, dt, n_paths, seed, options, |p| PathSummary {
        path_index: p.path_index,
        tau: p.tau.unwrap_or(f64::NAN),
        terminal_cost: model.terminal_cost(&p.occupation, &p.x_final),
        running_cost: p.running_cost,
        steps: p.n_steps,
        x_exit: p.x_final.clone(),
        coordinates: p.coords_final.clone(),
    })
}

/// Ensemble summary CSV: `path_index, tau, terminal_cost, running_cost,
/// steps, x_1..x_d, c_1..c_m`.
pub fn write_summary_csv<W: Write>(summaries: &[PathSummary], writer: W) -> Result<(), OsdeError> {
    let mut w = csv::Writer::from_writer(writer);
    let d = summaries.first().map_or(0, |s| s.x_exit.len());
    let m = summaries.first().map_or(0, |s| s.coordinates.len());
    let mut header: Vec<String> =
        ["path_index", "tau", "terminal_cost", "running_cost", "steps"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("c_{i}")));
    w.write_record(&header)?;
    for s in summaries {
        let mut row = vec![
            s.path_index.to_string(),
            format!("{:e}", s.tau),
            format!("{:e}", s.terminal_cost),
            format!("{:e}", s.running_cost),
            s.steps.to_string(),
        ];
        row.extend(s.x_exit.iter().chain(&s.coordinates).map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::osde::{simulate, Clock};

    fn vol_model() -> OsdeModel {
        OsdeModel::new(1, 0.5, 4.0)
            .unwrap()
            .with_clock(Clock::QuadraticVariation)
            .with_diffusion(Arc::new(|_, x: &[f64], _, s: &mut [f64]| s[0] = 0.75 + 0.25 * x[0].cos()))
            .with_terminal_cost(Arc::new(|o, x: &[f64]| o.pair(|y| y[0].abs()) + x[0]))
            .with_running_cost(Arc::new(|_, x: &[f64], _| x[0] * x[0]))
            .track(Arc::new(|y: &[f64]| y[0].sin()))
    }

    #[test]
    fn single_path_batch_reproduces_simulate() {
        let model = vol_model();
        let init = ParabolicPoint::at(vec![0.1]).unwrap();
        let p = ControlPolicy::Constant(0.0);
        let b = batch(&model, &p, &init, 0.01, 1, 17).unwrap();
        let s = simulate(&model, &p, &init, 0.01, 17, 0).unwrap();
        assert_eq!(b[0].tau, s.tau.unwrap());
        assert_eq!(b[0].x_exit, s.x_final);
        assert_eq!(b[0].running_cost, s.running_cost);
        assert_eq!(b[0].terminal_cost, model.terminal_cost(&s.occupation, &s.x_final));
        assert!((b[0].coordinates[0] - s.occupation.pair(|y| y[0].sin())).abs() < 1e-14);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let model = vol_model();
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let p = ControlPolicy::Constant(0.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| batch(&model, &p, &init, 0.02, 64, 5).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_summary_csv(&a, &mut ca).unwrap();
        write_summary_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn ensemble_exit_times_respect_the_bound() {
        let model = vol_model();
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        let dt = 0.01;
        let s = batch(&model, &ControlPolicy::Constant(0.0), &init, dt, 200, 1).unwrap();
        let max_tau = s.iter().map(|p| p.tau).fold(0.0, f64::max);
        assert!(max_tau <= model.exit_bound() + dt);
    }

    #[test]
    fn failures_carry_the_path_index() {
        let model = OsdeModel::new(1, 1.0, 1.0).unwrap().with_drift(Arc::new(|_, x: &[f64], _, b: &mut [f64]| {
            b[0] = if x[0] > 0.0 { f64::INFINITY } else { 0.0 }
        }));
        let model = model.with_diffusion(Arc::new(|_, _, _, s: &mut [f64]| s[0] = 1.0));
        let init = ParabolicPoint::at(vec![0.0]).unwrap();
        match batch(&model, &ControlPolicy::Constant(0.0), &init, 0.1, 8, 0) {
            Err(OsdeError::Path { index, .. }) => assert!(index < 8),
            other => panic!("expected a path failure, got {other:?}"),
        }
    }
}
