//! Two-hierarchy expansion, direct ε-solves and rate experiments.

mod direct;
mod experiments;
mod rates;

pub use direct::{fine_initial, solve_eps_problem, DirectSolve, Variant};
pub use experiments::{
    pucci_gamma_example, recession_experiment, theorem_rate, KinkReport, PucciReport, RecessionSpec, TheoremSpec,
};
pub use rates::{output_steps, rate_fit, RateFit, RateReport, RateRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial_layer::{build_stage, LayerHierarchy, LayerSetup, StageData};
use crate::interior::{build_interior_stage, next_g, next_x, EffectiveMode, InteriorSetup, InteriorStage};
use crate::operator::FullyNonlinearOp;
use crate::pde_core::{bounded_weights, periodic_interp_weights, SlowGrid};
use crate::twoscale::Layout;

/// Grid sizes of a hierarchy run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub ny: usize,
    pub nx: usize,
    pub nt: usize,
    pub n_fine: usize,
    pub horizon: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { ny: 64, nx: 64, nt: 21, n_fine: 512, horizon: 0.1 }
    }
}

/// Samples `g(x_i, y)` at `i·ny + y`.
pub fn sample_slow_fast(g: &dyn Fn(f64, f64) -> f64, slow: &SlowGrid, ny: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(slow.nx * ny);
    for i in 0..slow.nx {
        for y in 0..ny {
            out.push(g(slow.x(i), y as f64 / ny as f64));
        }
    }
    out
}

/// Layer and interior hierarchies for every bootstrap depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionAssembly {
    pub order: usize,
    pub d_max: usize,
    pub layer: LayerHierarchy,
    pub interior: Vec<InteriorStage>,
    pub interior_setup: InteriorSetup,
    pub phases: usize,
    pub notes: Vec<String>,
}

/// Alternates layer and interior stages for `d = 0..=d_max`.
pub fn bootstrap_run(
    op: &FullyNonlinearOp,
    g: &dyn Fn(f64, f64) -> f64,
    m: usize,
    d_max: usize,
    grids: &Grids,
    mode: EffectiveMode,
) -> Result<ExpansionAssembly> {
    if 2 * d_max > m {
        return Err(Error::config("pipeline.d_max", format!("d_max = {d_max} exceeds m/2 for m = {m}")));
    }
    let slow = SlowGrid::new(grids.nx, op.period, grids.horizon)?;
    let mut notes = Vec::new();
    if m < 2 {
        notes.push(format!("m = {m}: expansion is the base layer plus zeroth-order interior term"));
    }
    let probe = InteriorSetup::new(crate::pde_core::TorusGrid::new(1, grids.ny, 1)?, slow.clone(), grids.nt, grids.n_fine)?;
    let needs_dt = (0..=d_max).any(|d| m - 2 * d >= 2 && (d >= 1 || op.dependence().t));
    let ntl = if needs_dt { 3 } else { 1 };
    let lsetup = LayerSetup::new(op, grids.ny, slow.clone(), probe.t_grid[..ntl].to_vec())?;
    let isetup = InteriorSetup::new(lsetup.fast.clone(), slow.clone(), grids.nt, grids.n_fine)?;
    let phases = if op.dependence().s { lsetup.fast.steps_per_unit } else { 1 };
    let ilay = isetup.layout(phases);
    let llay = lsetup.layout();

    let g0 = sample_slow_fast(g, &slow, grids.ny);
    let mut data = vec![StageData { d: 0, g: vec![g0], x: Vec::new(), phases }];
    let mut x_int: Vec<Vec<f64>> = Vec::new();
    let mut stages = Vec::new();
    let mut interior = Vec::new();
    for d in 0..=d_max {
        let levels = m - 2 * d + 1;
        let st = build_stage(op, &lsetup, &data, &stages, levels)?;
        let gb0: Vec<Vec<f64>> = st.gbreve.iter().map(|g| g[..llay.nx].to_vec()).collect();
        let int = build_interior_stage(op, &isetup, d, &x_int, &gb0, levels, if d == 0 { mode } else { EffectiveMode::Linearized })?;
        if d < d_max {
            let xn = next_x(&x_int, &int, ilay.len());
            let gn = next_g(&int, &gb0, &ilay, m - 2 * (d + 1) + 1);
            let per_t = ilay.slab();
            let x_layer: Vec<Vec<f64>> = xn.iter().map(|f| f[..ntl * per_t].to_vec()).collect();
            data.push(StageData { d: d + 1, g: gn, x: x_layer, phases });
            x_int = xn;
        }
        stages.push(st);
        interior.push(int);
    }
    Ok(ExpansionAssembly {
        order: m,
        d_max,
        layer: LayerHierarchy { setup: lsetup, order: m, stages },
        interior,
        interior_setup: isetup,
        phases,
        notes,
    })
}

/// Evaluates an assembly on the fine lattice of one ε.
pub struct Evaluator<'a> {
    asm: &'a ExpansionAssembly,
    eps: f64,
    nxf: usize,
    xw: Vec<(Vec<usize>, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(asm: &'a ExpansionAssembly, eps_inv: usize) -> Self {
        let slow = &asm.interior_setup.slow;
        let ny = asm.layer.setup.fast.ny;
        let nxf = eps_inv * ny;
        let xw = (0..nxf).map(|p| periodic_interp_weights(p as f64 * slow.period / nxf as f64, slow.nx, slow.period, 8)).collect();
        Evaluator { asm, eps: 1.0 / eps_inv as f64, nxf, xw }
    }

    pub fn dt(&self) -> f64 {
        self.eps * self.eps * self.asm.layer.setup.fast.ds()
    }

    fn add_slab(&self, slab: &[f64], mean: &[f64], ny: usize, c: f64, out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            let (idx, w) = &self.xw[p];
            let y = p % ny;
            let mut acc = 0.0;
            for (&i, &wi) in idx.iter().zip(w) {
                acc += wi * (slab[i * ny + y] + mean[i]);
            }
            *o += c * acc;
        }
    }

    /// `Σ_d Σ_k ε^{k+2d} (ṽ_{d,k} + w̃_{d,k})` after `n` fine steps.
    pub fn row(&self, n: usize, include_layer: bool) -> Result<Vec<f64>> {
        let asm = self.asm;
        let is = &asm.interior_setup;
        let ny = asm.layer.setup.fast.ny;
        let nx = is.slow.nx;
        let t = n as f64 * self.dt();
        let mut out = vec![0.0; self.nxf];
        let ilay = is.layout(asm.phases);
        let (start, wt) = bounded_weights(t.min(is.slow.horizon), is.t_grid.len(), is.dt(), 6, 0);
        let ph = n % asm.phases;
        let mut slab = vec![0.0; nx * ny];
        let mut mean = vec![0.0; nx];
        for st in &asm.interior {
            for k in 0..st.levels {
                let c = self.eps.powi((k + 2 * st.d) as i32);
                slab.iter_mut().for_each(|v| *v = 0.0);
                mean.iter_mut().for_each(|v| *v = 0.0);
                for (q, &w) in wt.iter().enumerate() {
                    let j = start + q;
                    for i in 0..nx {
                        let b = ilay.at(j, i) + ph * ny;
                        for y in 0..ny {
                            slab[i * ny + y] += w * st.w[k][b + y];
                        }
                        mean[i] += w * st.ubar[k][j * nx + i];
                    }
                }
                self.add_slab(&slab, &mean, ny, c, &mut out);
            }
        }
        if include_layer {
            let lay: Layout = asm.layer.setup.layout();
            mean.iter_mut().for_each(|v| *v = 0.0);
            for st in &asm.layer.stages {
                if !n.is_multiple_of(st.stride) {
                    return Err(Error::Sequencing(format!("step {n} is not a multiple of the snapshot stride {}", st.stride)));
                }
                let Some(snap) = st.snapshots.get(n / st.stride) else { continue };
                let ts = &asm.layer.setup.t_nodes;
                let tw = if ts.len() == 1 {
                    (0, vec![1.0])
                } else {
                    bounded_weights(t, ts.len(), ts[1] - ts[0], ts.len(), 0)
                };
                for k in 0..st.levels {
                    let c = self.eps.powi((k + 2 * st.d) as i32);
                    slab.iter_mut().for_each(|v| *v = 0.0);
                    for (q, &w) in tw.1.iter().enumerate() {
                        let l = tw.0 + q;
                        for i in 0..nx {
                            let b = lay.at(l, i);
                            for y in 0..ny {
                                slab[i * ny + y] += w * snap[k][b + y];
                            }
                        }
                    }
                    self.add_slab(&slab, &mean, ny, c, &mut out);
                }
            }
        }
        Ok(out)
    }

    /// Last snapshot step of the layer.
    pub fn layer_steps(&self) -> usize {
        self.asm.layer.stages.iter().map(|s| s.horizon_steps).max().unwrap_or(0)
    }

    pub fn stride(&self) -> usize {
        self.asm.layer.setup.stride
    }
}

/// Sup errors of a direct solve against the expansion: over every row with
/// the layer, and over `t ≥ c ε² |log ε|` without it (NaN when that window
/// holds no output row).
pub fn error_report(direct: &DirectSolve, eval: &Evaluator, c_window: f64) -> Result<RateRow> {
    let eps = direct.eps();
    let t0 = c_window * eps * eps * eps.ln().abs();
    let mut full = 0.0f64;
    let mut inner = f64::NAN;
    for (n, u) in &direct.rows {
        let with = eval.row(*n, true)?;
        full = full.max(sup_diff(u, &with));
        if *n as f64 * direct.dt >= t0 {
            let without = eval.row(*n, false)?;
            inner = sup_diff(u, &without).max(if inner.is_nan() { 0.0 } else { inner });
        }
    }
    Ok(RateRow { eps, err_full: full, err_interior: inner })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
