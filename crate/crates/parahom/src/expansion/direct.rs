//! Direct monotone solves of the ε-problems on the fine lattice `Δx = ε Δy`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{FrozenOp, FullyNonlinearOp, Pt, SymMat};
use crate::pde_core::TorusGrid;

/// Which ε-problem to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `u_t = ε⁻² F(ε² D²u, x, t, x/ε, t/ε²)`.
    Scaled,
    /// `u_t = F(D²u, x, t, x/ε, t/ε²)`.
    Unscaled,
    /// Scaled problem from the y-mean `ḡ(x)` of the datum.
    NonOscillatory,
}

/// Fine-grid trajectory sampled at selected steps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectSolve {
    pub eps_inv: usize,
    pub ny: usize,
    pub nx_fine: usize,
    /// Slow-time step `ε² Δs`.
    pub dt: f64,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl DirectSolve {
    pub fn eps(&self) -> f64 {
        1.0 / self.eps_inv as f64
    }
}

/// Initial data `g(x_p, y_p)` on the fine lattice of a unit period.
pub fn fine_initial(g: &dyn Fn(f64, f64) -> f64, eps_inv: usize, ny: usize, variant: Variant) -> Vec<f64> {
    let nxf = eps_inv * ny;
    (0..nxf)
        .map(|p| {
            let x = p as f64 / nxf as f64;
            match variant {
                Variant::NonOscillatory => (0..ny).map(|y| g(x, y as f64 / ny as f64)).sum::<f64>() / ny as f64,
                _ => g(x, (p % ny) as f64 / ny as f64),
            }
        })
        .collect()
}

/// Explicit monotone solve on the fine lattice (unit slow period) recording
/// the solution after each step listed in `out_steps` (sorted; `0` allowed).
pub fn solve_eps_problem(
    op: &FullyNonlinearOp,
    g: &dyn Fn(f64, f64) -> f64,
    eps_inv: usize,
    fast: &TorusGrid,
    variant: Variant,
    out_steps: &[usize],
    budget: f64,
) -> Result<DirectSolve> {
    if op.n != 1 || fast.n != 1 {
        return Err(Error::config("operator.n", "direct ε-solves are one-dimensional"));
    }
    if op.period != 1.0 {
        return Err(Error::config("grids.period", "direct ε-solves use a unit slow period"));
    }
    fast.check_cfl(op.cap_lambda)?;
    if out_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("pipeline.outputs", "output steps must increase"));
    }
    let ny = fast.ny;
    let nxf = eps_inv * ny;
    let total = out_steps.last().copied().unwrap_or(0);
    let work = nxf as f64 * total as f64;
    if work > budget {
        return Err(Error::Budget(format!("{nxf} nodes × {total} steps = {work:e} exceeds {budget:e}")));
    }
    let eps = 1.0 / eps_inv as f64;
    let ds = fast.ds();
    let dt = eps * eps * ds;
    let inv = 1.0 / (fast.dy() * fast.dy());
    let (scale_in, scale_out) = match variant {
        Variant::Unscaled => (1.0 / (eps * eps), eps * eps),
        _ => (1.0, 1.0),
    };
    let dep = op.dependence();
    let slow_dep = dep.x || dep.t;
    let frozen = FrozenOp::new(op, 0.0, 0.0, fast);
    let phases = frozen.phases();
    let linear = op.is_linear() && !slow_dep;
    let coef: Vec<f64> = if linear {
        let mut out = vec![0.0; phases * ny];
        let mut buf = [0.0; 2];
        for ph in 0..phases {
            for y in 0..ny {
                frozen.derivs_1d(0.0, y, ph, 1, &mut buf);
                out[ph * ny + y] = buf[1];
            }
        }
        out
    } else {
        Vec::new()
    };
    let mut u = fine_initial(g, eps_inv, ny, variant);
    let mut next = vec![0.0; nxf];
    let mut rows = Vec::with_capacity(out_steps.len());
    let mut wanted = out_steps.iter().peekable();
    if wanted.peek() == Some(&&0) {
        rows.push((0, u.clone()));
        wanted.next();
    }
    for n in 0..total {
        let ph = n % phases;
        if linear {
            let a = &coef[ph * ny..(ph + 1) * ny];
            for p in 0..nxf {
                let ip = if p + 1 == nxf { 0 } else { p + 1 };
                let im = if p == 0 { nxf - 1 } else { p - 1 };
                let lap = (u[ip] - 2.0 * u[p] + u[im]) * inv;
                next[p] = u[p] + ds * a[p % ny] * lap;
            }
        } else {
            let t = n as f64 * dt;
            for p in 0..nxf {
                let ip = if p + 1 == nxf { 0 } else { p + 1 };
                let im = if p == 0 { nxf - 1 } else { p - 1 };
                let lap = (u[ip] - 2.0 * u[p] + u[im]) * inv * scale_in;
                let f = if slow_dep {
                    let pt = Pt::y1(p as f64 / nxf as f64, t, (p % ny) as f64 / ny as f64, (n % phases) as f64 * ds);
                    op.eval_unchecked(&SymMat::scalar(lap), &pt)
                } else {
                    frozen.eval(&SymMat::scalar(lap), p % ny, n)
                };
                next[p] = u[p] + ds * scale_out * f;
            }
        }
        std::mem::swap(&mut u, &mut next);
        if n % 1024 == 0 && u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { s: n as f64 * ds, msg: format!("direct solve at ε = 1/{eps_inv}") });
        }
        if wanted.peek() == Some(&&(n + 1)) {
            rows.push((n + 1, u.clone()));
            wanted.next();
        }
    }
    Ok(DirectSolve { eps_inv, ny, nx_fine: nxf, dt, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn g(x: f64, y: f64) -> f64 {
        (TAU * x).cos() * (1.0 + (TAU * y).cos())
    }

    #[test]
    fn scaled_and_unscaled_coincide_for_linear_operators() {
        let op = FullyNonlinearOp::harmonic_1d();
        let fast = TorusGrid::for_ellipticity(1, 8, op.cap_lambda).unwrap();
        let a = solve_eps_problem(&op, &g, 4, &fast, Variant::Scaled, &[0, 50, 100], 1e9).unwrap();
        let b = solve_eps_problem(&op, &g, 4, &fast, Variant::Unscaled, &[0, 50, 100], 1e9).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.0, rb.0);
            assert_eq!(ra.1, rb.1);
        }
        assert_eq!(a.rows.len(), 3);
    }

    #[test]
    fn nonlinear_path_matches_linear_path() {
        let op = FullyNonlinearOp::harmonic_1d();
        let fast = TorusGrid::for_ellipticity(1, 8, op.cap_lambda).unwrap();
        let pm = FullyNonlinearOp::pucci_minus(1, 1.0, 1.0).unwrap();
        let heat = FullyNonlinearOp::heat(1);
        let a = solve_eps_problem(&pm, &g, 2, &fast, Variant::Scaled, &[80], 1e9).unwrap();
        let b = solve_eps_problem(&heat, &g, 2, &fast, Variant::Scaled, &[80], 1e9).unwrap();
        let diff = a.rows[0].1.iter().zip(&b.rows[0].1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-13);
        let _ = op;
    }

    #[test]
    fn fast_independent_operator_sees_no_oscillation() {
        let heat = FullyNonlinearOp::heat(1);
        let fast = TorusGrid::for_ellipticity(1, 8, 1.0).unwrap();
        let ubar = |x: f64, _: f64| (TAU * x).sin();
        let a = solve_eps_problem(&heat, &ubar, 2, &fast, Variant::Scaled, &[40], 1e9).unwrap();
        let b = solve_eps_problem(&heat, &ubar, 4, &fast, Variant::NonOscillatory, &[160], 1e9).unwrap();
        // Same physical time `40 · (1/4) Δs = 160 · (1/16) Δs` on nested fine grids.
        for p in 0..16 {
            assert!((a.rows[0].1[p] - b.rows[0].1[2 * p]).abs() < 5e-3);
        }
    }

    #[test]
    fn budget_guard() {
        let heat = FullyNonlinearOp::heat(1);
        let fast = TorusGrid::for_ellipticity(1, 8, 1.0).unwrap();
        let err = solve_eps_problem(&heat, &g, 8, &fast, Variant::Scaled, &[1000], 10.0).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
        assert_eq!(err.exit_code(), 3);
    }
}
