//! Monotone explicit solver for one-dimensional slow problems
//! `ū_t = F̄(ū_xx, x, t) + f̄(x, t)` on a periodic interval.

use crate::error::{Error, Result};

use super::grid::SlowField;
use super::slowdiff::periodic_interp;

/// Effective operator `(p, x, t) → F̄` with its ellipticity bound.
pub struct SlowProblem<'a> {
    pub op: &'a (dyn Fn(f64, f64, f64) -> Result<f64> + Sync),
    pub cap_lambda: f64,
    pub source: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
    pub period: f64,
}

/// Number of Euler steps per output interval so that `Δt ≤ 0.9 Δx² / (2Λ)`.
fn substeps(len: f64, dx: f64, cap_lambda: f64) -> usize {
    let dt_max = 0.9 * dx * dx / (2.0 * cap_lambda);
    ((len / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Solves from `initial` (uniform nodes over one period) and records the
/// solution at the increasing times `t_out`. `refine` multiplies the step
/// count per interval, so a grid with twice the nodes passes `refine = 4`
/// to keep `Δt/Δx²` fixed.
pub fn solve_slow_cauchy_with(
    prob: &SlowProblem,
    initial: &[f64],
    t_out: &[f64],
    dx_ref: f64,
    refine: usize,
) -> Result<Vec<SlowField>> {
    let n = initial.len();
    if n < 3 || initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver("slow cauchy", "initial field too small or non-finite"));
    }
    let dx = prob.period / n as f64;
    let inv = 1.0 / (dx * dx);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    let mut u = initial.to_vec();
    let mut next = vec![0.0; n];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_out.len());
    for &target in t_out {
        if target < t - 1e-14 {
            return Err(Error::solver("slow cauchy", "output times must be increasing and non-negative"));
        }
        let len = target - t;
        if len > 1e-15 {
            let k = substeps(len, dx_ref, prob.cap_lambda) * refine;
            let dt = len / k as f64;
            for j in 0..k {
                let tj = t + j as f64 * dt;
                for i in 0..n {
                    let ip = if i + 1 == n { 0 } else { i + 1 };
                    let im = if i == 0 { n - 1 } else { i - 1 };
                    let p = (u[ip] - 2.0 * u[i] + u[im]) * inv;
                    let mut f = (prob.op)(p, xs[i], tj)?;
                    if let Some(src) = prob.source {
                        f += src(xs[i], tj);
                    }
                    next[i] = u[i] + dt * f;
                }
                std::mem::swap(&mut u, &mut next);
            }
            if let Some(bad) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence { s: target, msg: format!("slow node {bad} non-finite") });
            }
        }
        t = target;
        out.push(SlowField { t: target, values: u.clone() });
    }
    Ok(out)
}

/// Plain monotone solve on the grid of `initial`.
pub fn solve_slow_cauchy(prob: &SlowProblem, initial: &[f64], t_out: &[f64]) -> Result<Vec<SlowField>> {
    let dx = prob.period / initial.len() as f64;
    solve_slow_cauchy_with(prob, initial, t_out, dx, 1)
}

/// Richardson-extrapolated solve `(4 u_{2N} − u_N) / 3` with `N = n_fine`;
/// the initial datum is interpolated from `initial` (periodic, 8 points) and
/// the result is sampled back on the nodes of `initial`.
pub fn solve_slow_richardson(
    prob: &SlowProblem,
    initial: &[f64],
    n_fine: usize,
    t_out: &[f64],
) -> Result<Vec<SlowField>> {
    let nx = initial.len();
    if !n_fine.is_multiple_of(nx) {
        return Err(Error::config("grids.n_slow", format!("{n_fine} is not a multiple of {nx}")));
    }
    let sample = |n: usize| -> Vec<f64> {
        (0..n).map(|i| periodic_interp(initial, i as f64 * prob.period / n as f64, prob.period, 8)).collect()
    };
    let (a, b) = (sample(n_fine), sample(2 * n_fine));
    let dx = prob.period / n_fine as f64;
    let (ra, rb) = rayon::join(
        || solve_slow_cauchy_with(prob, &a, t_out, dx, 1),
        || solve_slow_cauchy_with(prob, &b, t_out, dx, 4),
    );
    let (ra, rb) = (ra?, rb?);
    let stride = n_fine / nx;
    Ok(ra
        .iter()
        .zip(&rb)
        .map(|(fa, fb)| SlowField {
            t: fa.t,
            values: (0..nx)
                .map(|i| (4.0 * fb.values[2 * i * stride] - fa.values[i * stride]) / 3.0)
                .collect(),
        })
        .collect())
}
