//! Initial-layer corrector hierarchy.
//!
//! Each stage `d` carries levels `ṽ_{d,k}`, `k = 0..=m−2d`, solving
//! `∂_s ṽ_k + ∂_t ṽ_{k−2} = Φ_k` on the fast lattice at every slow node, where
//! `Φ_k` is the order-`(2d+k)` Taylor coefficient of the operator applied to the
//! two-scale expansion of `ε² δ_x²`. Level `k` is driven by levels `< k`, so the
//! hierarchy is built in passes: pass `K` re-marches every lower level in
//! lockstep and runs level `K` until its oscillation has decayed, which fixes
//! the effective datum `ğ_K` as the y-mean of the final profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::taylor::coefs_1d_into;
use crate::operator::{FrozenOp, FullyNonlinearOp};
use crate::pde_core::{bounded_weights, decay_fit, DecayFit, PeriodicDiff, SlowGrid, TorusGrid};
use crate::twoscale::{add_t_field, diff_family, x_derivative, Layout};

/// Maximum expansion order handled by the Taylor recursion.
pub const MAX_ORDER: usize = 7;

/// Grids and stopping policy shared by every stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerSetup {
    pub fast: TorusGrid,
    pub slow: SlowGrid,
    /// Slow-time nodes carried by the layer; `t_nodes[0] = 0`.
    pub t_nodes: Vec<f64>,
    /// Oscillation tolerance relative to the size of the base datum.
    pub tol_osc: f64,
    pub s_max: f64,
    /// Snapshot spacing in fast-time steps.
    pub stride: usize,
}

impl LayerSetup {
    /// Lattice from the operator's ellipticity with the default policy
    /// (`tol_osc = 10⁻⁸`, `S_max = 8`, about 32 snapshots per unit of `s`).
    pub fn new(op: &FullyNonlinearOp, ny: usize, slow: SlowGrid, t_nodes: Vec<f64>) -> Result<Self> {
        let fast = TorusGrid::for_ellipticity(op.n, ny, op.cap_lambda)?;
        let stride = (fast.steps_per_unit / 32).max(1);
        if t_nodes.is_empty() || t_nodes[0] != 0.0 {
            return Err(Error::config("grids.t_nodes", "layer t-nodes must start at 0"));
        }
        Ok(LayerSetup { fast, slow, t_nodes, tol_osc: 1e-8, s_max: 8.0, stride })
    }

    /// Layout of a layer level (`phases = 1`).
    pub fn layout(&self) -> Layout {
        Layout { nt: self.t_nodes.len(), nx: self.slow.nx, phases: 1, ny: self.fast.ny }
    }

    /// Layout of stage fields that are periodic in the fast time.
    pub fn x_layout(&self, phases: usize) -> Layout {
        Layout { phases, ..self.layout() }
    }
}

/// Data defining stage `d`: oscillatory initial data and the accumulated
/// interior Hessian sequence `X_{d,j}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageData {
    pub d: usize,
    /// `g_{d,k}(x_i, y)` at `i·ny + y`; an empty vector stands for zero.
    pub g: Vec<Vec<f64>>,
    /// `X_{d,j}` on [`LayerSetup::x_layout`]; empty entries are zero.
    /// `X_{d,0}` and `X_{d,1}` vanish identically.
    pub x: Vec<Vec<f64>>,
    /// Fast-time phases of the `X` fields.
    pub phases: usize,
}

impl StageData {
    pub fn base(g: Vec<f64>) -> Self {
        StageData { d: 0, g: vec![g], x: Vec::new(), phases: 1 }
    }
}

/// Completed stage of the layer hierarchy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerStage {
    pub d: usize,
    pub levels: usize,
    /// `ğ_{d,k}` as y-means at `l·nx + i` (layer t-node `l`, slow node `i`).
    pub gbreve: Vec<Vec<f64>>,
    /// The same limits read at `y = 0`.
    pub gbreve_y0: Vec<Vec<f64>>,
    /// `ṽ_{d,k}` every `stride` steps: `snapshots[j][k]` on the layer layout.
    pub snapshots: Vec<Vec<Vec<f64>>>,
    pub stride: usize,
    pub horizon_steps: usize,
    /// `(s, max oscillation)` of each level in the final pass.
    pub osc_history: Vec<Vec<(f64, f64)>>,
    pub fits: Vec<Option<DecayFit>>,
    /// `(s, sup |f_{d,2d+k}|)` of the coupling sources (stages `d ≥ 1`).
    pub coupling: Vec<Vec<(f64, f64)>>,
}

impl LayerStage {
    /// `ṽ_{d,k}` at snapshot index `j`, layer t-node `l`, slow node `i`, lattice node `y`.
    pub fn value(&self, j: usize, k: usize, lay: &Layout, l: usize, i: usize, y: usize) -> f64 {
        match self.snapshots.get(j) {
            Some(s) => s[k][lay.at(l, i) + y],
            None => 0.0,
        }
    }

    pub fn horizon(&self, ds: f64) -> f64 {
        self.horizon_steps as f64 * ds
    }
}

/// Layer hierarchy over all computed stages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerHierarchy {
    pub setup: LayerSetup,
    pub order: usize,
    pub stages: Vec<LayerStage>,
}

/// Snapshot bookkeeping of one march.
struct Outcome {
    v: Vec<Vec<Vec<f64>>>,
    steps: usize,
    snapshots: Vec<Vec<Vec<f64>>>,
    osc: Vec<Vec<(f64, f64)>>,
    coupling: Vec<Vec<(f64, f64)>>,
}

/// One lockstep march of every stage up to the current one.
struct Marcher<'a> {
    setup: &'a LayerSetup,
    lay: Layout,
    xlay: Layout,
    frozen: Vec<FrozenOp<'a>>,
    per_node_op: bool,
    linear: bool,
    /// Levels marched per stage.
    levels: Vec<usize>,
    data: &'a [StageData],
    /// Known `ğ` per stage and level at `l·nx + i`; `None` for the level being fixed.
    gb: Vec<Vec<Option<Vec<f64>>>>,
    /// `∂_x^p ğ` per stage, level and `p`.
    dgb: Vec<Vec<Vec<Vec<f64>>>>,
    diffs: Vec<PeriodicDiff>,
    dt_w: Vec<(usize, Vec<f64>)>,
    /// `F'(0)` (linear) or `F^{(j)}(0)` (nonlinear) per node when the operator ignores `s`.
    cache0: Option<Vec<[f64; MAX_ORDER + 1]>>,
    kmax: usize,
    tol_abs: f64,
}

impl<'a> Marcher<'a> {
    fn new(
        op: &'a FullyNonlinearOp,
        setup: &'a LayerSetup,
        data: &'a [StageData],
        levels: Vec<usize>,
        gb: Vec<Vec<Option<Vec<f64>>>>,
        tol_abs: f64,
    ) -> Result<Self> {
        let lay = setup.layout();
        let phases = data.iter().map(|s| s.phases).max().unwrap_or(1).max(1);
        let xlay = setup.x_layout(phases);
        let dep = op.dependence();
        let per_node_op = dep.x || dep.t;
        let mut frozen = Vec::new();
        if per_node_op {
            for l in 0..lay.nt {
                for i in 0..lay.nx {
                    frozen.push(FrozenOp::new(op, setup.slow.x(i), setup.t_nodes[l], &setup.fast));
                }
            }
        } else {
            frozen.push(FrozenOp::new(op, 0.0, 0.0, &setup.fast));
        }
        let kmax = levels.iter().enumerate().map(|(d, &n)| 2 * d + n - 1).max().unwrap_or(0);
        if kmax > MAX_ORDER {
            return Err(Error::config("pipeline.m", format!("order {kmax} exceeds {MAX_ORDER}")));
        }
        let pmax = levels.iter().copied().max().unwrap_or(1);
        let diffs = diff_family(pmax, setup.slow.dx());
        let mut dgb = Vec::new();
        for (d, row) in gb.iter().enumerate() {
            let mut per_level = Vec::new();
            for (k, g) in row.iter().enumerate() {
                let mut per_p = vec![Vec::new()];
                let need = levels[d] - 1 - k;
                for p in 1..=need {
                    let g = g.as_ref().ok_or_else(|| Error::Sequencing(format!("ğ_{{{d},{k}}} missing")))?;
                    let mut out = vec![0.0; g.len()];
                    for l in 0..lay.nt {
                        diffs[p].apply_into(&g[l * lay.nx..(l + 1) * lay.nx], &mut out[l * lay.nx..(l + 1) * lay.nx]);
                    }
                    per_p.push(out);
                }
                per_level.push(per_p);
            }
            dgb.push(per_level);
        }
        let dt_w = if lay.nt > 1 {
            let h = setup.t_nodes[1] - setup.t_nodes[0];
            (0..lay.nt).map(|l| bounded_weights(setup.t_nodes[l], lay.nt, h, lay.nt, 1)).collect()
        } else {
            Vec::new()
        };
        let linear = op.is_linear();
        let steps = frozen[0].phases();
        let cache0 = if steps == 1 {
            let nodes = if per_node_op { lay.nodes() } else { 1 };
            let mut c = vec![[0.0; MAX_ORDER + 1]; nodes * lay.ny];
            for (b, fz) in frozen.iter().enumerate().take(nodes) {
                for y in 0..lay.ny {
                    fz.derivs_1d(0.0, y, 0, kmax.max(1), &mut c[b * lay.ny + y]);
                }
            }
            Some(c)
        } else {
            None
        };
        Ok(Marcher {
            setup,
            lay,
            xlay,
            frozen,
            per_node_op,
            linear,
            levels,
            data,
            gb,
            dgb,
            diffs,
            dt_w,
            cache0,
            kmax,
            tol_abs,
        })
    }

    fn fz(&self, l: usize, i: usize) -> &FrozenOp<'a> {
        if self.per_node_op {
            &self.frozen[l * self.lay.nx + i]
        } else {
            &self.frozen[0]
        }
    }

    fn derivs0(&self, l: usize, i: usize, y: usize, step: usize, out: &mut [f64; MAX_ORDER + 1]) {
        match &self.cache0 {
            Some(c) => {
                let b = if self.per_node_op { l * self.lay.nx + i } else { 0 };
                *out = c[b * self.lay.ny + y];
            }
            None => self.fz(l, i).derivs_1d(0.0, y, step, self.kmax.max(1), out),
        }
    }

    fn x_at(&self, d: usize, j: usize, xi: usize) -> f64 {
        self.data[d].x.get(j).and_then(|f| f.get(xi)).copied().unwrap_or(0.0)
    }

    /// `V_{d,k}` fields from the current levels.
    fn big_v(&self, v: &[Vec<Vec<f64>>], big: &mut [Vec<Vec<f64>>], scratch: &mut Vec<f64>) {
        let lay = &self.lay;
        let dy = self.setup.fast.dy();
        let len = lay.len();
        scratch.resize(len, 0.0);
        for (d, levels) in v.iter().enumerate() {
            for b in big[d].iter_mut() {
                b.iter_mut().for_each(|e| *e = 0.0);
            }
            for k in 0..levels.len() {
                add_t_field(0, &levels[k], lay.ny, dy, &mut big[d][k]);
                let need = self.levels[d] - 1 - k;
                for p in 1..=need {
                    x_derivative(&self.diffs[p], &levels[k], lay, scratch);
                    let g = &self.dgb[d][k][p];
                    for (blk, &gv) in scratch.chunks_mut(lay.ny).zip(g) {
                        blk.iter_mut().for_each(|e| *e -= gv);
                    }
                    add_t_field(p, scratch, lay.ny, dy, &mut big[d][k + p]);
                }
            }
        }
    }

    /// `Φ_{d,k}` at every node; optionally `sup |f_{d,2d+k}|` for the top stage.
    fn phi(&self, big: &[Vec<Vec<f64>>], step: usize, phi: &mut [Vec<Vec<f64>>], coupling: Option<&mut [f64]>) {
        let lay = &self.lay;
        let top = self.levels.len() - 1;
        let mut coupling = coupling;
        if self.linear {
            let mut dv = [0.0; MAX_ORDER + 1];
            for l in 0..lay.nt {
                for i in 0..lay.nx {
                    let off = lay.at(l, i);
                    for y in 0..lay.ny {
                        self.derivs0(l, i, y, step, &mut dv);
                        for d in 0..phi.len() {
                            for k in 0..phi[d].len() {
                                phi[d][k][off + y] = dv[1] * big[d][k][off + y];
                            }
                        }
                    }
                }
            }
            if let Some(c) = coupling.as_deref_mut() {
                c.iter_mut().for_each(|e| *e = 0.0);
            }
            return;
        }
        const N: usize = MAX_ORDER + 1;
        let ph_x = self.xlay.phases;
        let mut dq = [0.0; N];
        let mut d0 = [0.0; N];
        let (mut s1, mut s2, mut s3, mut s4, mut s5) = ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
        let (mut c1, mut c2, mut c3, mut c4, mut c5) = ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
        let mut yv = [0.0; N];
        for l in 0..lay.nt {
            for i in 0..lay.nx {
                let off = lay.at(l, i);
                let fz = self.fz(l, i);
                for y in 0..lay.ny {
                    let node = off + y;
                    let xi = ((l * lay.nx + i) * ph_x + step % ph_x) * lay.ny + y;
                    let q00 = big[0][0][node];
                    fz.derivs_1d(q00, y, step, self.kmax.max(1), &mut dq);
                    self.derivs0(l, i, y, step, &mut d0);
                    let n0 = self.levels[0];
                    for j in 1..n0 {
                        s1[j] = big[0][j][node];
                    }
                    coefs_1d_into(&dq, &s1, n0 - 1, &mut c1);
                    for k in 0..n0 {
                        phi[0][k][node] = c1[k] - if k == 0 { d0[0] } else { 0.0 };
                    }
                    for d in 1..self.levels.len() {
                        let omax = 2 * d + self.levels[d] - 1;
                        for j in 0..=omax {
                            let mut acc = 0.0;
                            for dd in 0..d {
                                if j >= 2 * dd && j - 2 * dd < self.levels[dd] {
                                    acc += big[dd][j - 2 * dd][node];
                                }
                            }
                            yv[j] = acc;
                        }
                        for j in 1..=omax {
                            let xd = self.x_at(d, j, xi);
                            let xp = self.x_at(d - 1, j, xi);
                            let vd = if j >= 2 * d { big[d][j - 2 * d][node] } else { 0.0 };
                            s1[j] = xd + yv[j] + vd;
                            s2[j] = xp + yv[j];
                            s3[j] = xd;
                            s4[j] = xp;
                            s5[j] = xd + yv[j];
                        }
                        coefs_1d_into(&dq, &s1, omax, &mut c1);
                        coefs_1d_into(&dq, &s2, omax, &mut c2);
                        coefs_1d_into(&d0, &s3, omax, &mut c3);
                        coefs_1d_into(&d0, &s4, omax, &mut c4);
                        for k in 0..self.levels[d] {
                            let o = 2 * d + k;
                            phi[d][k][node] = c1[o] - c2[o] - c3[o] + c4[o];
                        }
                        if d == top {
                            if let Some(c) = coupling.as_deref_mut() {
                                coefs_1d_into(&dq, &s5, omax, &mut c5);
                                for k in 0..self.levels[d] {
                                    let o = 2 * d + k;
                                    let f = c5[o] - c2[o] - c3[o] + c4[o];
                                    c[k] = c[k].max(f.abs());
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `∂_t ṽ` of one level at every node.
    fn dt_level(&self, v: &[f64], gb: &[f64], out: &mut [f64]) {
        let lay = &self.lay;
        for l in 0..lay.nt {
            let (start, w) = &self.dt_w[l];
            for i in 0..lay.nx {
                for y in 0..lay.ny {
                    let mut acc = 0.0;
                    for (q, wq) in w.iter().enumerate() {
                        let lq = start + q;
                        acc += wq * (v[lay.at(lq, i) + y] - gb[lq * lay.nx + i]);
                    }
                    out[lay.at(l, i) + y] = acc;
                }
            }
        }
    }

    fn max_osc(&self, f: &[f64]) -> f64 {
        f.chunks(self.lay.ny).map(crate::pde_core::oscillation).fold(0.0, f64::max)
    }

    /// Marches all levels from their data; with `fixed = Some(n)` for exactly `n`
    /// steps, otherwise until every level of the top stage has converged.
    fn run(&self, record: bool, fixed: Option<usize>) -> Result<Outcome> {
        let lay = self.lay;
        let len = lay.len();
        let ds = self.setup.fast.ds();
        let top = self.levels.len() - 1;
        let mut v: Vec<Vec<Vec<f64>>> = Vec::new();
        for (d, &n) in self.levels.iter().enumerate() {
            let mut lv = Vec::new();
            for k in 0..n {
                let mut f = vec![0.0; len];
                if let Some(g) = self.data[d].g.get(k).filter(|g| !g.is_empty()) {
                    for l in 0..lay.nt {
                        f[l * lay.slab()..(l + 1) * lay.slab()].copy_from_slice(g);
                    }
                }
                lv.push(f);
            }
            v.push(lv);
        }
        let mut big: Vec<Vec<Vec<f64>>> = v.iter().map(|s| s.iter().map(|_| vec![0.0; len]).collect()).collect();
        let mut phi = big.clone();
        let mut scratch = Vec::new();
        let mut dt = vec![0.0; len];
        let ntop = self.levels[top];
        let mut osc: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ntop];
        let mut coupling: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ntop];
        let mut snapshots = Vec::new();
        let mut prev: Vec<Vec<f64>> = v[top].clone();
        let mut hits = 0;
        let check = self.setup.stride;
        let mut cbuf = vec![0.0; ntop];
        let mut n = 0usize;
        loop {
            let at_check = n.is_multiple_of(check);
            if at_check {
                let s = n as f64 * ds;
                for k in 0..ntop {
                    osc[k].push((s, self.max_osc(&v[top][k])));
                }
                if record {
                    snapshots.push(v[top].clone());
                }
                if let Some(steps) = fixed {
                    if n >= steps {
                        break;
                    }
                } else if n > 0 {
                    let mut done = true;
                    for k in 0..ntop {
                        let change = v[top][k].iter().zip(&prev[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        if osc[k].last().unwrap().1 > self.tol_abs || change > self.tol_abs {
                            done = false;
                        }
                    }
                    hits = if done { hits + 1 } else { 0 };
                    if hits >= 3 {
                        break;
                    }
                    if s > self.setup.s_max {
                        let last = osc.iter().map(|o| o.last().unwrap().1).fold(0.0, f64::max);
                        return Err(Error::solver(
                            "initial_layer",
                            format!("horizon {} exhausted with oscillation {last:e} (tol {:e})", self.setup.s_max, self.tol_abs),
                        ));
                    }
                    prev.clone_from(&v[top]);
                }
            }
            self.big_v(&v, &mut big, &mut scratch);
            let want = at_check && top > 0;
            if want {
                cbuf.iter_mut().for_each(|e| *e = 0.0);
            }
            self.phi(&big, n, &mut phi, if want { Some(&mut cbuf) } else { None });
            if want {
                for k in 0..ntop {
                    coupling[k].push((n as f64 * ds, cbuf[k]));
                }
            }
            for d in 0..v.len() {
                for k in 0..v[d].len() {
                    let has_dt = k >= 2 && lay.nt > 1;
                    if has_dt {
                        let gb = self.gb[d][k - 2].as_ref().expect("lower level fixed");
                        self.dt_level(&v[d][k - 2], gb, &mut dt);
                    }
                    let level = &mut v[d][k];
                    for (idx, e) in level.iter_mut().enumerate() {
                        let src = phi[d][k][idx] - if has_dt { dt[idx] } else { 0.0 };
                        *e += ds * src;
                    }
                }
            }
            n += 1;
            if n.is_multiple_of(64) {
                for lv in &v[top] {
                    if lv.iter().any(|e| !e.is_finite()) {
                        return Err(Error::Divergence { s: n as f64 * ds, msg: "non-finite layer value".into() });
                    }
                }
            }
        }
        Ok(Outcome { v, steps: n, snapshots, osc, coupling })
    }
}

fn y_mean_and_zero(f: &[f64], ny: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = f.chunks(ny).map(|b| b.iter().sum::<f64>() / ny as f64).collect();
    let zero = f.chunks(ny).map(|b| b[0]).collect();
    (mean, zero)
}

/// Reference scale for the absolute oscillation tolerance.
fn reference_scale(data: &[StageData]) -> f64 {
    let r = data
        .first()
        .and_then(|s| s.g.first())
        .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .unwrap_or(0.0);
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

/// Builds stage `d = data.len() − 1` with `levels` levels, given completed lower stages.
pub fn build_stage(
    op: &FullyNonlinearOp,
    setup: &LayerSetup,
    data: &[StageData],
    done: &[LayerStage],
    levels: usize,
) -> Result<LayerStage> {
    if op.n != 1 {
        return Err(Error::config("operator.n", "the layer hierarchy is one-dimensional"));
    }
    let d = data.len() - 1;
    if done.len() != d {
        return Err(Error::Sequencing(format!("stage {d} needs {d} completed stages, have {}", done.len())));
    }
    if levels == 0 {
        return Err(Error::config("pipeline.m", "stage needs at least one level"));
    }
    let lay = setup.layout();
    for s in data {
        for g in s.g.iter().filter(|g| !g.is_empty()) {
            if g.len() != lay.nx * lay.ny {
                return Err(Error::config("data.g", format!("expected {} values, got {}", lay.nx * lay.ny, g.len())));
            }
        }
    }
    let tol_abs = setup.tol_osc * reference_scale(data);
    let mut gb_lower: Vec<Vec<Option<Vec<f64>>>> =
        done.iter().map(|st| st.gbreve.iter().cloned().map(Some).collect()).collect();
    let mut gbreve = Vec::new();
    let mut gbreve_y0 = Vec::new();
    let mut last = None;
    for kk in 0..levels {
        let mut gb = gb_lower.clone();
        let mut cur: Vec<Option<Vec<f64>>> = gbreve.iter().cloned().map(Some).collect();
        cur.push(None);
        gb.push(cur);
        let mut lv: Vec<usize> = done.iter().map(|s| s.levels).collect();
        lv.push(kk + 1);
        let m = Marcher::new(op, setup, data, lv, gb, tol_abs)?;
        let out = m.run(kk + 1 == levels, None)?;
        let (mean, zero) = y_mean_and_zero(&out.v[d][kk], lay.ny);
        gbreve.push(mean);
        gbreve_y0.push(zero);
        last = Some(out);
    }
    let out = last.expect("at least one level");
    gb_lower.clear();
    let snapshots: Vec<Vec<Vec<f64>>> = out
        .snapshots
        .into_iter()
        .map(|snap| {
            snap.into_iter()
                .enumerate()
                .map(|(k, mut f)| {
                    for (blk, g) in f.chunks_mut(lay.ny).zip(&gbreve[k]) {
                        blk.iter_mut().for_each(|e| *e -= g);
                    }
                    f
                })
                .collect()
        })
        .collect();
    let fits = out.osc.iter().map(|h| decay_fit(h).ok()).collect();
    Ok(LayerStage {
        d,
        levels,
        gbreve,
        gbreve_y0,
        snapshots,
        stride: setup.stride,
        horizon_steps: out.steps,
        osc_history: out.osc,
        fits,
        coupling: out.coupling,
    })
}

/// Base layer `v₀`: `∂_s v = F(δ_y² v) − F(0)` from `g` at every slow node.
pub fn solve_base_layer(op: &FullyNonlinearOp, setup: &LayerSetup, g: Vec<f64>) -> Result<LayerStage> {
    build_stage(op, setup, &[StageData::base(g)], &[], 1)
}

/// All stages `0..=d_max` given the stage data (built by the caller between stages).
pub fn build_layer_hierarchy(
    op: &FullyNonlinearOp,
    setup: &LayerSetup,
    data: &[StageData],
    order: usize,
) -> Result<LayerHierarchy> {
    let mut stages = Vec::new();
    for d in 0..data.len() {
        if order < 2 * d {
            return Err(Error::config("pipeline.d_max", format!("stage {d} needs m ≥ {}", 2 * d)));
        }
        let st = build_stage(op, setup, &data[..=d], &stages, order - 2 * d + 1)?;
        stages.push(st);
    }
    Ok(LayerHierarchy { setup: setup.clone(), order, stages })
}

/// Taylor source `Φ_k` of a single-stage expansion at one point:
/// the order-`k` coefficient of `F(Σ_j σ^j V_j) − F(0)` from derivatives at `V₀`.
pub fn taylor_source_phi(derivs_at_v0: &[f64], f_zero: f64, v: &[f64], k: usize) -> Result<f64> {
    if k >= v.len() || k > MAX_ORDER {
        return Err(Error::Sequencing(format!("Φ_{k} needs V_0..V_{k}, have {}", v.len())));
    }
    let mut c = [0.0; MAX_ORDER + 1];
    coefs_1d_into(derivs_at_v0, v, k, &mut c);
    Ok(c[k] - if k == 0 { f_zero } else { 0.0 })
}

#[cfg(test)]
mod tests;
