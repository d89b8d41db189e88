//! Discrete Hessians and the monotone explicit Euler stepper on the fast torus.

use crate::error::{Error, Result};
use crate::operator::{FrozenOp, FullyNonlinearOp, SymMat};

use super::grid::{FastField, TorusGrid};

/// Periodic central second differences; the off-diagonal entry uses the 4-point cross.
pub fn discrete_hessian(values: &[f64], grid: &TorusGrid) -> Vec<SymMat> {
    let ny = grid.ny;
    let inv = 1.0 / (grid.dy() * grid.dy());
    if grid.n == 1 {
        return (0..ny)
            .map(|i| {
                let ip = (i + 1) % ny;
                let im = (i + ny - 1) % ny;
                SymMat::scalar((values[ip] - 2.0 * values[i] + values[im]) * inv)
            })
            .collect();
    }
    (0..ny * ny).map(|node| cross_hessian(values, ny, node, inv)).collect()
}

/// Periodic second differences of a slow field with spacing `dx`.
pub fn slow_hessian(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let inv = 1.0 / (dx * dx);
    (0..n).map(|i| (values[(i + 1) % n] - 2.0 * values[i] + values[(i + n - 1) % n]) * inv).collect()
}

fn idx2(ny: usize, i: usize, j: usize, di: i64, dj: i64) -> usize {
    let n = ny as i64;
    let a = (i as i64 + di).rem_euclid(n) as usize;
    let b = (j as i64 + dj).rem_euclid(n) as usize;
    b * ny + a
}

fn cross_hessian(v: &[f64], ny: usize, node: usize, inv: f64) -> SymMat {
    let (i, j) = (node % ny, node / ny);
    let g = |di, dj| v[idx2(ny, i, j, di, dj)];
    let c = v[node];
    let pxx = (g(1, 0) - 2.0 * c + g(-1, 0)) * inv;
    let pyy = (g(0, 1) - 2.0 * c + g(0, -1)) * inv;
    let pxy = (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1)) * 0.25 * inv;
    SymMat::new2(pxx, pxy, pyy)
}

/// Hessian with the mixed term from the 7-point stencil whose diagonal pair
/// matches the sign of `g12`.
fn seven_point_hessian(v: &[f64], ny: usize, node: usize, inv: f64, g12: f64) -> SymMat {
    let (i, j) = (node % ny, node / ny);
    let g = |di, dj| v[idx2(ny, i, j, di, dj)];
    let c = v[node];
    let pxx = (g(1, 0) - 2.0 * c + g(-1, 0)) * inv;
    let pyy = (g(0, 1) - 2.0 * c + g(0, -1)) * inv;
    let axis = g(1, 0) + g(-1, 0) + g(0, 1) + g(0, -1);
    let pxy = if g12 >= 0.0 {
        0.5 * (g(1, 1) + g(-1, -1) - axis + 2.0 * c) * inv
    } else {
        -0.5 * (g(1, -1) + g(-1, 1) - axis + 2.0 * c) * inv
    };
    SymMat::new2(pxx, pxy, pyy)
}

/// An operator sampled on the fast lattice: values at `(node, step)` with
/// coefficients periodic in `step` with period [`LatticeOp::steps`].
pub trait LatticeOp: Sync {
    fn grid(&self) -> &TorusGrid;
    /// Number of distinct fast-time phases (1 when independent of `s`).
    fn steps(&self) -> usize;
    fn cap_lambda(&self) -> f64;
    fn eval(&self, p: &SymMat, node: usize, step: usize) -> f64;
    /// Matrix `G` with `tr(G Q) = D_pF(p) Q`.
    fn gradient(&self, p: &SymMat, node: usize, step: usize) -> Result<SymMat>;
}

impl LatticeOp for FrozenOp<'_> {
    fn grid(&self) -> &TorusGrid {
        self.lattice()
    }

    fn steps(&self) -> usize {
        self.phases()
    }

    fn cap_lambda(&self) -> f64 {
        self.op.cap_lambda
    }

    fn eval(&self, p: &SymMat, node: usize, step: usize) -> f64 {
        FrozenOp::eval(self, p, node, step)
    }

    fn gradient(&self, p: &SymMat, node: usize, step: usize) -> Result<SymMat> {
        Ok(self.op.frechet_derivative(1, p, &self.point(node, step))?.as_matrix())
    }
}

/// Linear operator `tr(A P)` with `A` tabulated per `(step, node)`.
#[derive(Clone, Debug)]
pub struct LinearLattice {
    pub grid: TorusGrid,
    pub steps: usize,
    pub a: Vec<SymMat>,
    pub cap_lambda: f64,
}

impl LinearLattice {
    /// Tabulates `D_pF(P(node, step))` for an operator frozen at a slow point.
    pub fn linearize(op: &FrozenOp, at: impl Fn(usize, usize) -> SymMat) -> Result<Self> {
        let grid = op.lattice().clone();
        let steps = op.phases();
        let nodes = grid.nodes();
        let mut a = Vec::with_capacity(steps * nodes);
        for st in 0..steps {
            for node in 0..nodes {
                a.push(LatticeOp::gradient(op, &at(node, st), node, st)?);
            }
        }
        Ok(LinearLattice { grid, steps, a, cap_lambda: op.op.cap_lambda })
    }

    pub fn at(&self, node: usize, step: usize) -> &SymMat {
        &self.a[(step % self.steps) * self.grid.nodes() + node]
    }
}

impl LatticeOp for LinearLattice {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn cap_lambda(&self) -> f64 {
        self.cap_lambda
    }

    fn eval(&self, p: &SymMat, node: usize, step: usize) -> f64 {
        self.at(node, step).frob(p)
    }

    fn gradient(&self, _p: &SymMat, node: usize, step: usize) -> Result<SymMat> {
        Ok(*self.at(node, step))
    }
}

/// One explicit Euler step `out = v + Δs (F(D²v + shift) + source)` at fast step `step`.
pub fn step_lattice(
    op: &dyn LatticeOp,
    v: &[f64],
    step: usize,
    shift: Option<&SymMat>,
    source: Option<&[f64]>,
    out: &mut [f64],
) -> Result<()> {
    let grid = op.grid();
    let ds = grid.ds();
    let ny = grid.ny;
    let inv = 1.0 / (grid.dy() * grid.dy());
    if grid.n == 1 {
        let sh = shift.map_or(0.0, |m| m.e[0]);
        for i in 0..ny {
            let ip = if i + 1 == ny { 0 } else { i + 1 };
            let im = if i == 0 { ny - 1 } else { i - 1 };
            let p = (v[ip] - 2.0 * v[i] + v[im]) * inv + sh;
            let f = op.eval(&SymMat::scalar(p), i, step) + source.map_or(0.0, |s| s[i]);
            out[i] = v[i] + ds * f;
        }
    } else {
        let sh = shift.copied().unwrap_or(SymMat::zero(2));
        for node in 0..ny * ny {
            let cross = cross_hessian(v, ny, node, inv) + sh;
            let g = op.gradient(&cross, node, step)?;
            if g.e[0] + 1e-12 < g.e[1].abs() || g.e[2] + 1e-12 < g.e[1].abs() {
                return Err(Error::config(
                    "operator",
                    format!("linearized stencil not diagonally dominant at node {node}: D_pF = {:?}", g.e),
                ));
            }
            let p = seven_point_hessian(v, ny, node, inv, g.e[1]) + sh;
            let f = op.eval(&p, node, step) + source.map_or(0.0, |s| s[node]);
            out[node] = v[node] + ds * f;
        }
    }
    if let Some(bad) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::Divergence { s: step as f64 * ds, msg: format!("non-finite value at node {bad}") });
    }
    Ok(())
}

/// One monotone explicit step of `v_s = F(D²v, x, t, y, s) + source`.
///
/// The fast time of `field` must sit on the lattice `s = kΔs`.
pub fn monotone_step(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    field: &FastField,
    x: f64,
    t: f64,
    source: Option<&[f64]>,
) -> Result<FastField> {
    grid.check_cfl(op.cap_lambda)?;
    let frozen = FrozenOp::uncached(op, x, t, grid);
    let step = (field.s * grid.steps_per_unit as f64).round() as usize;
    let mut out = vec![0.0; field.values.len()];
    step_lattice(&frozen, &field.values, step, None, source, &mut out)?;
    Ok(FastField { s: field.s + grid.ds(), values: out })
}

/// Source term `(node, step) → f` for fast Cauchy problems.
pub type FastSource<'a> = &'a (dyn Fn(usize, usize) -> f64 + Sync);

/// Solves `v_s = F(D²v, x, t, y, s) + f` from `initial` up to fast time `horizon`,
/// keeping every `stride`-th step (and the final one).
pub fn solve_fast_cauchy(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    x: f64,
    t: f64,
    initial: &[f64],
    source: Option<FastSource>,
    horizon: f64,
    stride: usize,
) -> Result<Vec<FastField>> {
    grid.check_cfl(op.cap_lambda)?;
    if initial.len() != grid.nodes() || initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver("fast cauchy", "initial field has wrong size or non-finite entries"));
    }
    let stride = stride.max(1);
    let frozen = FrozenOp::new(op, x, t, grid);
    let steps = (horizon * grid.steps_per_unit as f64).round() as usize;
    let mut v = initial.to_vec();
    let mut next = vec![0.0; v.len()];
    let mut src = vec![0.0; v.len()];
    let mut out = vec![FastField { s: 0.0, values: v.clone() }];
    for n in 0..steps {
        let s = match source {
            Some(f) => {
                for (node, val) in src.iter_mut().enumerate() {
                    *val = f(node, n);
                }
                Some(src.as_slice())
            }
            None => None,
        };
        step_lattice(&frozen, &v, n, None, s, &mut next)?;
        std::mem::swap(&mut v, &mut next);
        if (n + 1) % stride == 0 || n + 1 == steps {
            out.push(FastField { s: (n + 1) as f64 * grid.ds(), values: v.clone() });
        }
    }
    Ok(out)
}
