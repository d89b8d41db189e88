//! Cell problems on the fast torus: ergodic constants, correctors, effective
//! operator tables, matrix correctors and driven cell problems.

mod corrector;
mod table;

pub use corrector::{driven_cell, matrix_corrector, matrix_corrector_checked, DrivenCellResult, MatrixCorrector};
pub use table::{effective_operator_table, stretched_axis, uniform_axis, EffectiveOperatorTable, TableReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{FrozenOp, FullyNonlinearOp, SymMat};
use crate::pde_core::{oscillation, step_lattice, FastField, LatticeOp, TorusGrid};

/// How the ergodic constant is extracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellMethod {
    Penalization,
    LongTimeSlope,
}

/// Tolerances and limits for cell solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellConfig {
    /// Steady-state tolerance on slopes and period-map increments.
    pub tol: f64,
    /// Allowed disagreement between the two methods.
    pub cross_tol: f64,
    /// Largest fast time a single solve may march.
    pub max_time: f64,
    /// Penalization parameters `δ_j = δ₀ 2^{-j}`, `j < deltas`.
    pub delta0: f64,
    pub deltas: usize,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig { tol: 1e-11, cross_tol: 1e-4, max_time: 400.0, delta0: 1.0, deltas: 7 }
    }
}

/// Ergodic constant and normalized corrector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub gamma: f64,
    /// One field per fast-time phase over a period (a single field when the
    /// operator does not depend on `s`).
    pub corrector: Vec<FastField>,
    pub normalization_residual: f64,
    pub method: CellMethod,
    /// Smallest penalization parameter used.
    pub delta: Option<f64>,
    /// Size of the last Richardson correction (penalization only).
    pub extrapolation_change: f64,
}

/// Steps between convergence checks: one period, or an eighth of a unit of
/// fast time when the operator is independent of `s`.
fn check_interval(op: &dyn LatticeOp) -> usize {
    let m = op.grid().steps_per_unit;
    if op.steps() == 1 {
        (m / 8).max(1)
    } else {
        op.steps()
    }
}

/// Runs `chunk` steps of `v_s = F(D²v + P) + f − δ v` starting at absolute step `start`.
fn march(
    op: &dyn LatticeOp,
    v: &mut Vec<f64>,
    tmp: &mut Vec<f64>,
    src: &mut [f64],
    start: usize,
    chunk: usize,
    shift: &SymMat,
    forcing: Option<&[f64]>,
    delta: f64,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let nodes = v.len();
    let phases = op.steps();
    for k in 0..chunk {
        let step = start + k;
        let phase = step % phases;
        for i in 0..nodes {
            src[i] = forcing.map_or(0.0, |f| f[phase * nodes + i]) - delta * v[i];
        }
        step_lattice(op, v, step, Some(shift), Some(src), tmp)?;
        std::mem::swap(v, tmp);
        record(step + 1, v);
    }
    Ok(())
}

/// Long-time slope of `z_s = F(D²z + P) + f` from `z = 0`; returns the
/// slope and the normalized periodic profile, one block of `nodes` per phase.
pub(crate) fn long_time_slope(
    op: &dyn LatticeOp,
    shift: &SymMat,
    forcing: Option<&[f64]>,
    cfg: &CellConfig,
) -> Result<(f64, Vec<f64>)> {
    let grid = op.grid().clone();
    let nodes = grid.nodes();
    let chunk = check_interval(op);
    let tau = chunk as f64 * grid.ds();
    let mut z = vec![0.0; nodes];
    let mut tmp = vec![0.0; nodes];
    let mut src = vec![0.0; nodes];
    let mut step = 0;
    let mut hits = 0;
    let mut gamma = f64::NAN;
    let mut last_osc = f64::INFINITY;
    while (step as f64) * grid.ds() < cfg.max_time {
        let prev = z.clone();
        march(op, &mut z, &mut tmp, &mut src, step, chunk, shift, forcing, 0.0, |_, _| {})?;
        step += chunk;
        let d: Vec<f64> = z.iter().zip(&prev).map(|(a, b)| a - b).collect();
        gamma = d.iter().sum::<f64>() / (nodes as f64 * tau);
        last_osc = oscillation(&d) / tau;
        let scale = 1.0 + gamma.abs();
        if last_osc < cfg.tol * scale {
            hits += 1;
            if hits >= 3 {
                break;
            }
        } else {
            hits = 0;
        }
    }
    if hits < 3 {
        return Err(Error::solver(
            "cell long-time slope",
            format!("slope oscillation {last_osc:e} above tolerance after fast time {}", cfg.max_time),
        ));
    }
    let phases = op.steps();
    let mut profile = vec![0.0; phases * nodes];
    if phases == 1 {
        profile.copy_from_slice(&z);
    } else {
        let base = step;
        let ds = grid.ds();
        profile[..nodes].copy_from_slice(&z);
        march(op, &mut z, &mut tmp, &mut src, step, phases - 1, shift, forcing, 0.0, |st, v| {
            let ph = st - base;
            let lift = gamma * ph as f64 * ds;
            for (o, x) in profile[ph * nodes..(ph + 1) * nodes].iter_mut().zip(v) {
                *o = x - lift;
            }
        })?;
    }
    let pin = profile[0];
    profile.iter_mut().for_each(|v| *v -= pin);
    Ok((gamma, profile))
}

/// Time-periodic steady state of `w_s = F(D²w + P) − δ w` by the accelerated period map.
fn penalized(op: &dyn LatticeOp, shift: &SymMat, delta: f64, cfg: &CellConfig) -> Result<Vec<f64>> {
    let grid = op.grid().clone();
    let nodes = grid.nodes();
    let chunk = check_interval(op);
    let rho = (1.0 - delta * grid.ds()).powi(chunk as i32);
    let gain = rho / (1.0 - rho);
    let mut w = vec![0.0; nodes];
    let mut tmp = vec![0.0; nodes];
    let mut src = vec![0.0; nodes];
    let mut hits = 0;
    let mut step = 0;
    let mut last = f64::INFINITY;
    while (step as f64) * grid.ds() < cfg.max_time {
        let prev = w.clone();
        march(op, &mut w, &mut tmp, &mut src, step, chunk, shift, None, delta, |_, _| {})?;
        step += chunk;
        let mean = w.iter().zip(&prev).map(|(a, b)| a - b).sum::<f64>() / nodes as f64;
        w.iter_mut().for_each(|v| *v += mean * gain);
        last = w.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * delta;
        let scale = 1.0 + prev.iter().fold(0.0f64, |m, v| m.max(v.abs())) * delta;
        if last < cfg.tol * scale {
            hits += 1;
            if hits >= 3 {
                return Ok(w);
            }
        } else {
            hits = 0;
        }
    }
    Err(Error::solver(
        "cell penalization",
        format!("period map did not contract for δ = {delta}: last increment {last:e}"),
    ))
}

/// Neville extrapolation of samples `(δ_j, y_j)` to `δ = 0`; also returns the last correction.
pub fn neville_at_zero(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut p = y.to_vec();
    let n = x.len();
    let mut change = 0.0;
    for k in 1..n {
        for i in 0..n - k {
            let v = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
            if i == 0 {
                change = (v - p[0]).abs();
            }
            p[i] = v;
        }
    }
    (p[0], change)
}

fn to_fields(profile: &[f64], nodes: usize, ds: f64) -> Vec<FastField> {
    profile
        .chunks(nodes)
        .enumerate()
        .map(|(k, c)| FastField { s: k as f64 * ds, values: c.to_vec() })
        .collect()
}

/// Ergodic constant of a lattice operator at the constant matrix `p`.
pub fn ergodic_constant_lattice(
    op: &dyn LatticeOp,
    p: &SymMat,
    method: CellMethod,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    let grid = op.grid().clone();
    let nodes = grid.nodes();
    match method {
        CellMethod::LongTimeSlope => {
            let (gamma, profile) = long_time_slope(op, p, None, cfg)?;
            Ok(CellSolution {
                gamma,
                normalization_residual: profile[0].abs(),
                corrector: to_fields(&profile, nodes, grid.ds()),
                method,
                delta: None,
                extrapolation_change: 0.0,
            })
        }
        CellMethod::Penalization => {
            if op.steps() > 1 {
                return penalization_periodic(op, p, cfg);
            }
            let deltas: Vec<f64> = (0..cfg.deltas).map(|j| cfg.delta0 * 0.5f64.powi(j as i32)).collect();
            let sols = deltas.iter().map(|&d| penalized(op, p, d, cfg)).collect::<Result<Vec<_>>>()?;
            let gam: Vec<f64> = sols.iter().zip(&deltas).map(|(w, d)| d * w[0]).collect();
            let (gamma, change) = neville_at_zero(&deltas, &gam);
            let mut w = vec![0.0; nodes];
            for (i, wi) in w.iter_mut().enumerate() {
                let col: Vec<f64> = sols.iter().map(|s| s[i] - s[0]).collect();
                *wi = neville_at_zero(&deltas, &col).0;
            }
            Ok(CellSolution {
                gamma,
                normalization_residual: w[0].abs(),
                corrector: to_fields(&w, nodes, grid.ds()),
                method,
                delta: deltas.last().copied(),
                extrapolation_change: change,
            })
        }
    }
}

/// Penalization for `s`-dependent operators: the period map is taken over a
/// full fast period and the corrector is sampled over the last period.
fn penalization_periodic(op: &dyn LatticeOp, p: &SymMat, cfg: &CellConfig) -> Result<CellSolution> {
    let grid = op.grid().clone();
    let nodes = grid.nodes();
    let phases = op.steps();
    let deltas: Vec<f64> = (0..cfg.deltas).map(|j| cfg.delta0 * 0.5f64.powi(j as i32)).collect();
    let mut gams = Vec::new();
    let mut profiles = Vec::new();
    for &d in &deltas {
        let w0 = penalized(op, p, d, cfg)?;
        let mut prof = vec![0.0; phases * nodes];
        prof[..nodes].copy_from_slice(&w0);
        let mut w = w0.clone();
        let mut tmp = vec![0.0; nodes];
        let mut src = vec![0.0; nodes];
        march(op, &mut w, &mut tmp, &mut src, 0, phases - 1, p, None, d, |st, v| {
            prof[st * nodes..(st + 1) * nodes].copy_from_slice(v);
        })?;
        gams.push(d * w0[0]);
        let pin = w0[0];
        prof.iter_mut().for_each(|v| *v -= pin);
        profiles.push(prof);
    }
    let (gamma, change) = neville_at_zero(&deltas, &gams);
    let w: Vec<f64> = (0..phases * nodes)
        .map(|i| neville_at_zero(&deltas, &profiles.iter().map(|pr| pr[i]).collect::<Vec<_>>()).0)
        .collect();
    Ok(CellSolution {
        gamma,
        normalization_residual: w[0].abs(),
        corrector: to_fields(&w, nodes, grid.ds()),
        method: CellMethod::Penalization,
        delta: deltas.last().copied(),
        extrapolation_change: change,
    })
}

/// Ergodic constant `F̄(P, x, t)` of an operator at a slow point.
pub fn ergodic_constant(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    p: &SymMat,
    x: f64,
    t: f64,
    method: CellMethod,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    grid.check_cfl(op.cap_lambda)?;
    let frozen = FrozenOp::new(op, x, t, grid);
    ergodic_constant_lattice(&frozen, p, method, cfg)
}

/// Runs both methods and fails with a consistency error when they disagree.
pub fn ergodic_constant_cross(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    p: &SymMat,
    x: f64,
    t: f64,
    cfg: &CellConfig,
) -> Result<(CellSolution, CellSolution)> {
    grid.check_cfl(op.cap_lambda)?;
    let frozen = FrozenOp::new(op, x, t, grid);
    let a = ergodic_constant_lattice(&frozen, p, CellMethod::LongTimeSlope, cfg)?;
    let b = ergodic_constant_lattice(&frozen, p, CellMethod::Penalization, cfg)?;
    if (a.gamma - b.gamma).abs() > cfg.cross_tol {
        return Err(Error::Consistency(format!(
            "ergodic constants disagree: long-time {} vs penalization {}",
            a.gamma, b.gamma
        )));
    }
    Ok((a, b))
}
