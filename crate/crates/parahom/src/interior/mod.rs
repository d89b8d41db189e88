//! Interior corrector hierarchy.
//!
//! At stage `d` the interior correctors `w̃_{d,k} = w_k + ū_k` are built by the
//! recursion over `r = 2, …, M + 2` (`M = m − 2d`): the order-`(2d+r)` source
//! `f_r` collects every term already known, the driven cell problem splits it
//! into its ergodic mean `f̄_r` and a periodic corrector `φ_r`, the effective
//! problem `∂_t ū_{r−2} = Ā ∂_x² ū_{r−2} + f̄_r` is solved from `ğ_{r−2}`, and
//! `w_r = φ_r + χ ∂_x² ū_{r−2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{driven_cell, matrix_corrector, CellConfig, EffectiveOperatorTable, MatrixCorrector};
use crate::error::{Error, Result};
use crate::initial_layer::MAX_ORDER;
use crate::operator::taylor::coefs_1d_into;
use crate::operator::{FrozenOp, FullyNonlinearOp, SymMat};
use crate::pde_core::{
    bounded_weights, oscillation, periodic_interp, solve_slow_richardson, LinearLattice, SlowGrid,
    SlowProblem, TorusGrid,
};
use crate::twoscale::{add_t_field, diff_family, t_of_constant, x_derivative, Layout};

/// Grids shared by the interior stages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteriorSetup {
    pub fast: TorusGrid,
    pub slow: SlowGrid,
    /// Uniform slow-time grid over `[0, T]`.
    pub t_grid: Vec<f64>,
    /// Nodes of the Richardson slow solve.
    pub n_fine: usize,
    pub cell: CellConfig,
}

impl InteriorSetup {
    pub fn new(fast: TorusGrid, slow: SlowGrid, nt: usize, n_fine: usize) -> Result<Self> {
        if nt < 6 {
            return Err(Error::config("grids.n_t", "need at least 6 slow-time nodes"));
        }
        let h = slow.horizon / (nt - 1) as f64;
        let t_grid = (0..nt).map(|j| j as f64 * h).collect();
        Ok(InteriorSetup { fast, slow, t_grid, n_fine, cell: CellConfig::default() })
    }

    pub fn layout(&self, phases: usize) -> Layout {
        Layout { nt: self.t_grid.len(), nx: self.slow.nx, phases, ny: self.fast.ny }
    }

    pub fn dt(&self) -> f64 {
        self.t_grid[1] - self.t_grid[0]
    }
}

/// Effective problem used for `ū₀`.
#[derive(Clone, Copy, Debug)]
pub enum EffectiveMode<'a> {
    /// `∂_t ū = Ā ∂_x² ū`.
    Linearized,
    /// `∂_t ū = F̄(∂_x² ū, x, t)` from a tabulated effective operator.
    Nonlinear(&'a EffectiveOperatorTable),
}

/// Completed interior stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteriorStage {
    pub d: usize,
    /// Orders `k = 0..levels` carried by the expansion (`M + 1`).
    pub levels: usize,
    pub phases: usize,
    /// `Ā` at `j·nx + i`.
    pub abar: Vec<f64>,
    /// `χ` on the stage layout.
    pub chi: Vec<f64>,
    /// `ū_k` at `j·nx + i`.
    pub ubar: Vec<Vec<f64>>,
    /// `w_k` on the stage layout for `k = 0..=M+2`.
    pub w: Vec<Vec<f64>>,
    /// `W_{d,k}` on the stage layout for `k = 0..=M+2`.
    pub big_w: Vec<Vec<f64>>,
    /// `f̄_r` at `j·nx + i`, indexed by `r`; entries `0` and `1` are zero.
    pub fbar: Vec<Vec<f64>>,
}

impl InteriorStage {
    /// `w̃_k` at a slow node and fast point.
    pub fn wtilde(&self, lay: &Layout, k: usize, j: usize, i: usize, ph: usize, y: usize) -> f64 {
        self.w[k][lay.at(j, i) + ph * lay.ny + y] + self.ubar[k][j * lay.nx + i]
    }

    /// Largest fast oscillation of `w̃_k` over all slow nodes.
    pub fn fast_oscillation(&self, lay: &Layout, k: usize) -> f64 {
        self.w[k].chunks(lay.block()).map(oscillation).fold(0.0, f64::max)
    }

    /// `max_x |w̃_k(x, 0, 0, 0) − ğ_k(x)|`.
    pub fn pinning_error(&self, lay: &Layout, k: usize, gbreve: &[f64]) -> f64 {
        (0..lay.nx).map(|i| (self.wtilde(lay, k, 0, i, 0, 0) - gbreve[i]).abs()).fold(0.0, f64::max)
    }
}

/// Interpolates a field given at `j·nx + i` on the slow grid.
pub fn slow_interp(values: &[f64], setup: &InteriorSetup, x: f64, t: f64) -> f64 {
    let nx = setup.slow.nx;
    let nt = setup.t_grid.len();
    let (start, w) = bounded_weights(t, nt, setup.dt(), 6, 0);
    w.iter()
        .enumerate()
        .map(|(q, wq)| wq * periodic_interp(&values[(start + q) * nx..(start + q + 1) * nx], x, setup.slow.period, 8))
        .sum()
}

struct Frozen<'a> {
    ops: Vec<FrozenOp<'a>>,
    per_node: bool,
    nx: usize,
}

impl<'a> Frozen<'a> {
    fn new(op: &'a FullyNonlinearOp, setup: &InteriorSetup) -> Self {
        let dep = op.dependence();
        let per_node = dep.x || dep.t;
        let mut ops = Vec::new();
        if per_node {
            for &t in &setup.t_grid {
                for i in 0..setup.slow.nx {
                    ops.push(FrozenOp::new(op, setup.slow.x(i), t, &setup.fast));
                }
            }
        } else {
            ops.push(FrozenOp::new(op, 0.0, 0.0, &setup.fast));
        }
        Frozen { ops, per_node, nx: setup.slow.nx }
    }

    fn at(&self, j: usize, i: usize) -> &FrozenOp<'a> {
        if self.per_node {
            &self.ops[j * self.nx + i]
        } else {
            &self.ops[0]
        }
    }
}

/// Matrix correctors at every slow node (shared when the operator ignores `x, t`).
fn correctors(op: &FullyNonlinearOp, setup: &InteriorSetup) -> Result<(Vec<MatrixCorrector>, bool)> {
    let dep = op.dependence();
    let per_node = dep.x || dep.t;
    let nx = setup.slow.nx;
    if per_node {
        let jobs: Vec<(usize, usize)> =
            (0..setup.t_grid.len()).flat_map(|j| (0..nx).map(move |i| (j, i))).collect();
        let out: Result<Vec<MatrixCorrector>> = jobs
            .par_iter()
            .map(|&(j, i)| matrix_corrector(op, &setup.fast, setup.slow.x(i), setup.t_grid[j], &setup.cell))
            .collect();
        Ok((out?, true))
    } else {
        Ok((vec![matrix_corrector(op, &setup.fast, 0.0, 0.0, &setup.cell)?], false))
    }
}

/// A field on the slow `(t, x)` grid pre-interpolated onto the nodes of the
/// finest Richardson grid; lookups then only interpolate in `t`.
struct SlowSampler {
    nt: usize,
    ht: f64,
    hx: f64,
    n2: usize,
    vals: Vec<f64>,
}

impl SlowSampler {
    fn new(values: &[f64], setup: &InteriorSetup) -> Self {
        let nx = setup.slow.nx;
        let nt = setup.t_grid.len();
        let n2 = 2 * setup.n_fine;
        let hx = setup.slow.period / n2 as f64;
        let mut vals = vec![0.0; nt * n2];
        for j in 0..nt {
            let row = &values[j * nx..(j + 1) * nx];
            for i in 0..n2 {
                vals[j * n2 + i] = periodic_interp(row, i as f64 * hx, setup.slow.period, 8);
            }
        }
        SlowSampler { nt, ht: setup.dt(), hx, n2, vals }
    }

    fn eval(&self, x: f64, t: f64) -> f64 {
        let i = ((x / self.hx).round() as usize) % self.n2;
        let order = 6.min(self.nt);
        let u = t / self.ht;
        let start = (u.round() as i64 - (order as i64 - 1) / 2).clamp(0, (self.nt - order) as i64) as usize;
        let mut acc = 0.0;
        for q in 0..order {
            let mut w = 1.0;
            for r in 0..order {
                if r != q {
                    w *= (u - (start + r) as f64) / (q as f64 - r as f64);
                }
            }
            acc += w * self.vals[(start + q) * self.n2 + i];
        }
        acc
    }
}

/// Solves the effective problem for `ū_k` on the interior t-grid.
fn effective_solve(
    setup: &InteriorSetup,
    abar: &[f64],
    abar_const: Option<f64>,
    mode: EffectiveMode,
    source: Option<&[f64]>,
    initial: &[f64],
) -> Result<Vec<f64>> {
    let a_s = if abar_const.is_none() { Some(SlowSampler::new(abar, setup)) } else { None };
    let lin = |p: f64, x: f64, t: f64| -> Result<f64> {
        let a = match (&a_s, abar_const) {
            (_, Some(c)) => c,
            (Some(s), None) => s.eval(x, t),
            (None, None) => unreachable!(),
        };
        Ok(a * p)
    };
    let table_op;
    let (op, cap): (&(dyn Fn(f64, f64, f64) -> Result<f64> + Sync), f64) = match mode {
        EffectiveMode::Linearized => (&lin, abar.iter().fold(0.0f64, |m, v| m.max(*v)) * 1.05),
        EffectiveMode::Nonlinear(tab) => {
            table_op = move |p: f64, x: f64, t: f64| tab.eval(&SymMat::scalar(p), x, t);
            (&table_op, tab.cap_lambda)
        }
    };
    let f_s = source.map(|f| SlowSampler::new(f, setup));
    let src = |x: f64, t: f64| f_s.as_ref().map_or(0.0, |s| s.eval(x, t));
    let prob = SlowProblem {
        op,
        cap_lambda: cap,
        source: if source.is_some() { Some(&src) } else { None },
        period: setup.slow.period,
    };
    let sol = solve_slow_richardson(&prob, initial, setup.n_fine, &setup.t_grid)?;
    Ok(sol.into_iter().flat_map(|f| f.values).collect())
}

/// `ū₀` alone: the zeroth-order effective problem from `ğ₀`.
pub fn effective_zeroth(
    op: &FullyNonlinearOp,
    setup: &InteriorSetup,
    mode: EffectiveMode,
    gbreve0: &[f64],
) -> Result<Vec<f64>> {
    let (mc, per_node) = correctors(op, setup)?;
    let abar: Vec<f64> = mc.iter().map(|m| m.abar.e[0]).collect();
    let abar_full = if per_node { abar } else { vec![abar[0]; setup.t_grid.len() * setup.slow.nx] };
    let c = if per_node { None } else { Some(abar_full[0]) };
    effective_solve(setup, &abar_full, c, mode, None, gbreve0)
}

/// Builds interior stage `d` from its Hessian sequence `X_{d,j}` (stage layout,
/// empty entries zero) and the effective data `ğ_{d,k}(x)`, `k = 0..levels`.
pub fn build_interior_stage(
    op: &FullyNonlinearOp,
    setup: &InteriorSetup,
    d: usize,
    x_fields: &[Vec<f64>],
    gbreve: &[Vec<f64>],
    levels: usize,
    mode: EffectiveMode,
) -> Result<InteriorStage> {
    if op.n != 1 {
        return Err(Error::config("operator.n", "the interior hierarchy is one-dimensional"));
    }
    if gbreve.len() < levels {
        return Err(Error::Sequencing(format!("interior stage {d} needs {levels} effective data, have {}", gbreve.len())));
    }
    let top = levels + 1;
    if 2 * d + top > MAX_ORDER {
        return Err(Error::config("pipeline.m", "expansion order too large"));
    }
    let frozen = Frozen::new(op, setup);
    let phases = frozen.at(0, 0).phases();
    let lay = setup.layout(phases);
    let len = lay.len();
    let (nt, nx, ny) = (lay.nt, lay.nx, lay.ny);
    let dy = setup.fast.dy();
    let (mc, per_node) = correctors(op, setup)?;
    let corr = |j: usize, i: usize| if per_node { &mc[j * nx + i] } else { &mc[0] };
    let mut abar = vec![0.0; nt * nx];
    let mut chi = vec![0.0; len];
    for j in 0..nt {
        for i in 0..nx {
            let c = corr(j, i);
            abar[j * nx + i] = c.abar.e[0];
            chi[lay.at(j, i)..lay.at(j, i) + lay.block()].copy_from_slice(&c.chi[0]);
        }
    }
    let abar_const = if per_node { None } else { Some(abar[0]) };
    let linear = op.is_linear();
    let kmax = 2 * d + top;
    let diffs = diff_family(top, setup.slow.dx());

    let mut w: Vec<Vec<f64>> = vec![vec![0.0; len]; 2];
    let mut big_w: Vec<Vec<f64>> = vec![vec![0.0; len]; 2];
    let mut ubar: Vec<Vec<f64>> = Vec::new();
    let mut ubar_x: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut fbar: Vec<Vec<f64>> = vec![vec![0.0; nt * nx]; 2];
    // ∂_x^p w_k, indexed [k][p].
    let mut w_x: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new()], vec![Vec::new()]];
    let x_at = |jx: usize, idx: usize| x_fields.get(jx).and_then(|f| f.get(idx)).copied().unwrap_or(0.0);

    for r in 2..=top {
        // Known part of W_r.
        let mut wp = vec![0.0; len];
        for ip in 1..=r {
            let k = r - ip;
            if ip <= top && k < w.len() {
                while w_x[k].len() <= ip {
                    let p = w_x[k].len();
                    let mut out = vec![0.0; len];
                    x_derivative(&diffs[p], &w[k], &lay, &mut out);
                    w_x[k].push(out);
                }
                add_t_field(ip, &w_x[k][ip], ny, dy, &mut wp);
            }
            if ip >= 4 && ip % 2 == 0 && k < ubar.len() {
                let ux = &ubar_x[k][ip];
                for j in 0..nt {
                    for i in 0..nx {
                        let c = t_of_constant(ip, ux[j * nx + i], dy);
                        wp[lay.at(j, i)..lay.at(j, i) + lay.block()].iter_mut().for_each(|e| *e += c);
                    }
                }
            }
        }
        // Φ_partial − ∂_t w_{r−2}.
        let o = 2 * d + r;
        let mut f = vec![0.0; len];
        let dtw: Vec<(usize, Vec<f64>)> =
            setup.t_grid.iter().map(|&t| bounded_weights(t, nt, setup.dt(), 6, 1)).collect();
        for j in 0..nt {
            for i in 0..nx {
                let fz = frozen.at(j, i);
                let base = lay.at(j, i);
                let mut dv = [0.0; MAX_ORDER + 1];
                let (mut s1, mut s2) = ([0.0; MAX_ORDER + 1], [0.0; MAX_ORDER + 1]);
                let (mut c1, mut c2) = ([0.0; MAX_ORDER + 1], [0.0; MAX_ORDER + 1]);
                for ph in 0..phases {
                    for y in 0..ny {
                        let idx = base + ph * ny + y;
                        let val = if linear {
                            fz.derivs_1d(0.0, y, ph, 1, &mut dv);
                            dv[1] * wp[idx]
                        } else {
                            fz.derivs_1d(0.0, y, ph, kmax, &mut dv);
                            for jj in 1..=o {
                                let xv = x_at(jj, idx);
                                let wv = if jj < 2 * d {
                                    0.0
                                } else if jj - 2 * d < r {
                                    big_w[jj - 2 * d][idx]
                                } else {
                                    wp[idx]
                                };
                                s1[jj] = xv + wv;
                                s2[jj] = xv;
                            }
                            coefs_1d_into(&dv, &s1, o, &mut c1);
                            coefs_1d_into(&dv, &s2, o, &mut c2);
                            c1[o] - c2[o]
                        };
                        let (start, wt) = &dtw[j];
                        let dt: f64 = wt.iter().enumerate().map(|(q, wq)| wq * w[r - 2][lay.at(start + q, i) + ph * ny + y]).sum();
                        f[idx] = val - dt;
                    }
                }
            }
        }
        // Driven cells per slow node.
        let jobs: Vec<(usize, usize)> = (0..nt).flat_map(|j| (0..nx).map(move |i| (j, i))).collect();
        let cells: Result<Vec<_>> = jobs
            .par_iter()
            .map(|&(j, i)| {
                let c = corr(j, i);
                let lat = LinearLattice {
                    grid: setup.fast.clone(),
                    steps: c.steps,
                    a: c.linearization.clone(),
                    cap_lambda: op.cap_lambda,
                };
                let b = lay.at(j, i);
                driven_cell(&lat, &f[b..b + lay.block()], &setup.cell)
            })
            .collect();
        let cells = cells?;
        let fb: Vec<f64> = cells.iter().map(|c| c.fbar).collect();
        // Effective problem for ū_{r−2}.
        let k = r - 2;
        let m = if k == 0 { mode } else { EffectiveMode::Linearized };
        let zero_src = fb.iter().all(|v| *v == 0.0);
        let u = effective_solve(setup, &abar, abar_const, m, if zero_src { None } else { Some(&fb) }, &gbreve[k][..nx])?;
        let mut ux = vec![Vec::new()];
        for p in 1..=top {
            let mut out = vec![0.0; nt * nx];
            for j in 0..nt {
                diffs[p].apply_into(&u[j * nx..(j + 1) * nx], &mut out[j * nx..(j + 1) * nx]);
            }
            ux.push(out);
        }
        // w_r and the full W_r.
        let mut wr = vec![0.0; len];
        let mut wfull = wp;
        for j in 0..nt {
            for i in 0..nx {
                let b = lay.at(j, i);
                let uxx = ux[2][j * nx + i];
                let cell = &cells[j * nx + i];
                for q in 0..lay.block() {
                    wr[b + q] = cell.phi[q] + chi[b + q] * uxx;
                }
                for q in 0..lay.block() {
                    wfull[b + q] += uxx;
                }
            }
        }
        add_t_field(0, &wr, ny, dy, &mut wfull);
        w.push(wr);
        w_x.push(vec![Vec::new()]);
        big_w.push(wfull);
        fbar.push(fb);
        ubar.push(u);
        ubar_x.push(ux);
    }
    Ok(InteriorStage { d, levels, phases, abar, chi, ubar, w, big_w, fbar })
}

/// `X_{d+1,j} = X_{d,j} + W_{d,j−2d}` on the stage layout.
pub fn next_x(x_d: &[Vec<f64>], stage: &InteriorStage, len: usize) -> Vec<Vec<f64>> {
    let jmax = 2 * stage.d + stage.big_w.len() - 1;
    (0..=jmax)
        .map(|j| {
            let mut v = x_d.get(j).filter(|f| !f.is_empty()).cloned().unwrap_or_else(|| vec![0.0; len]);
            if j >= 2 * stage.d {
                if let Some(wf) = stage.big_w.get(j - 2 * stage.d) {
                    v.iter_mut().zip(wf).for_each(|(a, b)| *a += b);
                }
            }
            v
        })
        .collect()
}

/// `g_{d+1,k}(x, y) = ğ_{d,k+2}(x, 0) − w̃_{d,k+2}(x, 0, y, 0)` at `i·ny + y`.
pub fn next_g(stage: &InteriorStage, gbreve: &[Vec<f64>], lay: &Layout, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut g = Vec::with_capacity(lay.nx * lay.ny);
            for i in 0..lay.nx {
                for y in 0..lay.ny {
                    g.push(gbreve[k + 2][i] - stage.wtilde(lay, k + 2, 0, i, 0, y));
                }
            }
            g
        })
        .collect()
}
