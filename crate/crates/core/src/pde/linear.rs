use std::fmt;
use std::sync::Arc;

use super::{Grid3D, PdeError, PdeSolution};

/// Inflow data on the y edges. Only the edge the transport enters through
/// is ever read, since the upwind stencil at the outflow edge stays inside.
#[derive(Clone)]
pub enum YBoundary {
    /// Copies the edge value, i.e. `du/dy = 0` across the edge.
    ZeroGradient,
    /// `u(t, y)` prescribed at the ghost node one step outside the edge.
    Dirichlet(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for YBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroGradient => f.write_str("ZeroGradient"),
            Self::Dirichlet(_) => f.write_str("Dirichlet(..)"),
        }
    }
}

/// Explicit backward scheme for `-u_t - u_xx / 2 - phi(x) u_y = 0` with
/// `u(T, x, y) = psi(y)`: centered second difference in x with mirror
/// (zero-flux) edges, upwind first difference in y chosen by the sign of
/// `phi`. Stable and monotone when `dt (1/dx^2 + max|phi|/dy) <= 1`.
///
/// Levels at `t = 0`, `t = T` and the steps nearest each of `save_times`
/// are kept, in increasing time order.
pub fn solve_linear_occupied<P, S>(
    phi: P,
    psi: S,
    grid: &Grid3D,
    y_boundary: &YBoundary,
    save_times: &[f64],
) -> Result<PdeSolution, PdeError>
where
    P: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let dt = grid.time.dt();
    let (dx, dy) = (grid.x.step(), grid.y.step());
    let (nx, ny) = (grid.x.n, grid.y.n);
    let xs = grid.x.nodes();
    let ys = grid.y.nodes();
    let speeds: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
    if speeds.iter().any(|v| !v.is_finite()) {
        return Err(PdeError::InvalidGrid("phi is not finite on the x grid".into()));
    }
    let max_speed = speeds.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cfl_ratio = dt * (1.0 / (dx * dx) + max_speed / dy);
    if cfl_ratio > 1.0 {
        return Err(PdeError::Cfl { ratio: cfl_ratio });
    }

    let steps = grid.time.steps;
    let mut keep = vec![false; steps + 1];
    keep[0] = true;
    keep[steps] = true;
    for &t in save_times {
        let k = (t / dt).round().clamp(0.0, steps as f64) as usize;
        keep[k] = true;
    }

    let stride = ny + 1;
    let terminal: Vec<f64> = ys.iter().map(|&y| psi(y)).collect();
    let mut u: Vec<f64> = (0..=nx).flat_map(|_| terminal.iter().copied()).collect();
    let mut next = u.clone();
    let mut saved = vec![(steps, u.clone())];
    let diffusion = 0.5 * dt / (dx * dx);

    for k in (0..steps).rev() {
        let t_next = (k + 1) as f64 * dt;
        // Ghost values beyond the y edges, read at the later time level.
        let (ghost_lo, ghost_hi) = match y_boundary {
            YBoundary::ZeroGradient => (None, None),
            YBoundary::Dirichlet(f) => (Some(f(t_next, ys[0] - dy)), Some(f(t_next, ys[ny] + dy))),
        };
        for i in 0..=nx {
            let row = i * stride;
            let (left, right) = match i {
                0 => (row + stride, row + stride),
                i if i == nx => (row - stride, row - stride),
                _ => (row - stride, row + stride),
            };
            let c = speeds[i];
            for j in 0..=ny {
                let centre = u[row + j];
                let lap = u[left + j] - 2.0 * centre + u[right + j];
                let transport = if c > 0.0 {
                    let ahead = if j < ny { u[row + j + 1] } else { ghost_hi.unwrap_or(centre) };
                    c * (ahead - centre)
                } else if c < 0.0 {
                    let behind = if j > 0 { u[row + j - 1] } else { ghost_lo.unwrap_or(centre) };
                    c * (centre - behind)
                } else {
                    0.0
                };
                next[row + j] = centre + diffusion * lap + dt / dy * transport;
            }
        }
        std::mem::swap(&mut u, &mut next);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite { step: k });
        }
        if keep[k] {
            saved.push((k, u.clone()));
        }
    }
    saved.reverse();
    let times = saved.iter().map(|(k, _)| if *k == steps { grid.time.horizon } else { *k as f64 * dt }).collect();
    let levels = saved.into_iter().map(|(_, v)| v).collect();
    Ok(PdeSolution { scheme: "explicit-upwind-y".into(), cfl_ratio, times, x: grid.x, y: Some(grid.y), levels })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::pde::{Axis, TimeAxis};

    fn grid(horizon: f64, steps: usize) -> Grid3D {
        Grid3D {
            time: TimeAxis::new(horizon, steps).unwrap(),
            x: Axis::new(-4.0, 4.0, 40).unwrap(),
            y: Axis::new(-3.0, 3.0, 60).unwrap(),
        }
    }

    #[test]
    fn no_transport_keeps_the_terminal_data() {
        let g = grid(1.0, 100);
        let sol = solve_linear_occupied(|_| 0.0, f64::sin, &g, &YBoundary::ZeroGradient, &[0.5]).unwrap();
        assert_eq!(sol.times, vec![0.0, 0.5, 1.0]);
        for level in 0..3 {
            for i in 0..=40 {
                for j in 0..=60 {
                    assert_eq!(sol.node(level, i, j), g.y.node(j).sin());
                }
            }
        }
    }

    #[test]
    fn unit_speed_shifts_the_terminal_data() {
        let g = Grid3D {
            time: TimeAxis::new(1.0, 1000).unwrap(),
            x: Axis::new(-1.0, 1.0, 10).unwrap(),
            y: Axis::new(-3.0, 3.0, 600).unwrap(),
        };
        let exact = |t: f64, y: f64| (y + 1.0 - t).sin();
        let sol = solve_linear_occupied(|_| 1.0, f64::sin, &g, &YBoundary::Dirichlet(Arc::new(exact)), &[]).unwrap();
        assert!(sol.cfl_ratio <= 1.0);
        let mut worst = 0.0f64;
        for i in 0..=10 {
            for j in 0..=600 {
                worst = worst.max((sol.node(0, i, j) - exact(0.0, g.y.node(j))).abs());
            }
        }
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn linear_speed_matches_the_gaussian_formula() {
        let horizon = 1.0;
        let exact = |s: f64, x: f64, y: f64| (y + x * s).sin() * (-s.powi(3) / 6.0).exp();
        let g = Grid3D {
            time: TimeAxis::new(horizon, 400).unwrap(),
            x: Axis::new(-4.0, 4.0, 80).unwrap(),
            y: Axis::new(-3.0, 3.0, 120).unwrap(),
        };
        let sol = solve_linear_occupied(|x| x, f64::sin, &g, &YBoundary::ZeroGradient, &[]).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.3), (-1.0, -0.5), (1.0, 1.0)] {
            let v = sol.interpolate(0, x, y);
            assert!((v - exact(horizon, x, y)).abs() < 0.05, "({x}, {y}): {v} vs {}", exact(horizon, x, y));
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let err = solve_linear_occupied(|x| x, f64::sin, &grid(1.0, 10), &YBoundary::ZeroGradient, &[]).unwrap_err();
        assert!(matches!(err, PdeError::Cfl { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scheme_is_monotone(base in prop::collection::vec(-1.0f64..1.0, 21), bump in prop::collection::vec(0.0f64..1.0, 21), speed in -2.0f64..2.0) {
            let g = Grid3D {
                time: TimeAxis::new(0.2, 40).unwrap(),
                x: Axis::new(-1.0, 1.0, 10).unwrap(),
                y: Axis::new(0.0, 2.0, 20).unwrap(),
            };
            let idx = |y: f64| (y * 10.0).round() as usize;
            let lo = |y: f64| base[idx(y)];
            let hi = |y: f64| base[idx(y)] + bump[idx(y)];
            let a = solve_linear_occupied(|x| speed * x, lo, &g, &YBoundary::ZeroGradient, &[]).unwrap();
            let b = solve_linear_occupied(|x| speed * x, hi, &g, &YBoundary::ZeroGradient, &[]).unwrap();
            for (la, lb) in a.levels.iter().zip(&b.levels) {
                for (x, y) in la.iter().zip(lb) {
                    prop_assert!(y >= x);
                }
            }
        }
    }
}
