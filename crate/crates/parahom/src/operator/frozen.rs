//! Operators with coefficients pre-sampled on a fast lattice.

use super::symmat::SymMat;
use super::{FullyNonlinearOp, Pt, MAX_COEFS};
use crate::pde_core::TorusGrid;

/// Coefficient cache budget in f64 entries.
const CACHE_LIMIT: usize = 1 << 24;

/// `F(·, x, t, y_i, s_n)` at a fixed slow point with coefficients cached per
/// lattice node and fast-time step within one period.
#[derive(Clone, Debug)]
pub struct FrozenOp<'a> {
    pub op: &'a FullyNonlinearOp,
    pub x: f64,
    pub t: f64,
    grid: TorusGrid,
    ncoef: usize,
    steps: usize,
    cache: Option<Vec<f64>>,
}

impl<'a> FrozenOp<'a> {
    pub fn new(op: &'a FullyNonlinearOp, x: f64, t: f64, grid: &TorusGrid) -> Self {
        let dep = op.dependence();
        let ncoef = op.ncoef();
        let steps = if dep.s { grid.steps_per_unit } else { 1 };
        let nodes = grid.nodes();
        let cache = if ncoef > 0 && nodes * steps * ncoef <= CACHE_LIMIT {
            let mut c = vec![0.0; nodes * steps * ncoef];
            for st in 0..steps {
                let s = st as f64 * grid.ds();
                for node in 0..nodes {
                    let pt = Pt::new(x, t, grid.coords(node), s);
                    let off = (st * nodes + node) * ncoef;
                    op.sample_coefs(&pt, &mut c[off..off + ncoef]);
                }
            }
            Some(c)
        } else {
            None
        };
        FrozenOp { op, x, t, grid: grid.clone(), ncoef, steps, cache }
    }

    /// Variant that samples coefficients on every call.
    pub fn uncached(op: &'a FullyNonlinearOp, x: f64, t: f64, grid: &TorusGrid) -> Self {
        let steps = if op.dependence().s { grid.steps_per_unit } else { 1 };
        FrozenOp { op, x, t, grid: grid.clone(), ncoef: op.ncoef(), steps, cache: None }
    }

    pub fn lattice(&self) -> &TorusGrid {
        &self.grid
    }

    /// Number of distinct fast-time phases (1 when the operator ignores `s`).
    pub fn phases(&self) -> usize {
        self.steps
    }

    pub fn point(&self, node: usize, step: usize) -> Pt {
        Pt::new(self.x, self.t, self.grid.coords(node), step as f64 * self.grid.ds())
    }

    fn with_coefs<R>(&self, node: usize, step: usize, f: impl FnOnce(&[f64], &Pt) -> R) -> R {
        let pt = self.point(node, step);
        match &self.cache {
            Some(c) => {
                let st = step % self.steps;
                let off = (st * self.grid.nodes() + node) * self.ncoef;
                f(&c[off..off + self.ncoef], &pt)
            }
            None => {
                let mut buf = [0.0; MAX_COEFS];
                self.op.sample_coefs(&pt, &mut buf);
                f(&buf[..self.ncoef], &pt)
            }
        }
    }

    /// `F(P)` at lattice node `node` and fast-time step `step`.
    pub fn eval(&self, p: &SymMat, node: usize, step: usize) -> f64 {
        self.with_coefs(node, step, |c, pt| self.op.kind.kernel_eval(p, c, pt))
    }

    /// Scalar derivatives `F^{(j)}(p)`, `j ≤ kmax`, into `out` (dimension one).
    pub fn derivs_1d(&self, p: f64, node: usize, step: usize, kmax: usize, out: &mut [f64]) {
        self.with_coefs(node, step, |c, pt| self.op.kind.derivs_1d(p, c, pt, kmax, out))
    }
}
