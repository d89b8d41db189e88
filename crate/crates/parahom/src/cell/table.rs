//! Tabulated effective operator `F̄(P, x, t)` with multilinear interpolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ergodic_constant_lattice, CellConfig, CellMethod};
use crate::error::{Error, Result};
use crate::operator::{FrozenOp, FullyNonlinearOp, SymMat};
use crate::pde_core::TorusGrid;

/// `count` uniform nodes on `[−pmax, pmax]`.
pub fn uniform_axis(pmax: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| -pmax + 2.0 * pmax * i as f64 / (count - 1) as f64).collect()
}

/// Nodes `pmax sinh(aξ)/sinh(a)` for uniform `ξ ∈ [−1, 1]`: dense near zero.
pub fn stretched_axis(pmax: f64, count: usize, a: f64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let xi = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
            if a == 0.0 {
                pmax * xi
            } else {
                pmax * (a * xi).sinh() / a.sinh()
            }
        })
        .collect()
}

/// Sampled ellipticity and concavity of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub min_slope: f64,
    pub max_slope: f64,
    pub ellipticity_ok: bool,
    pub triples: usize,
    pub max_concavity_violation: f64,
    pub concavity_ok: bool,
}

/// `F̄` on a tensor grid of matrix coordinates times slow nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveOperatorTable {
    pub n: usize,
    /// One axis per matrix coordinate (`p11` or `p11, p12, p22`).
    pub axes: Vec<Vec<f64>>,
    /// Slow nodes; a single node means `F̄` is treated as independent of it.
    pub x_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub period: f64,
    /// Layout `[(ix · nt + it) · P + p]` with the matrix index row-major over axes.
    pub values: Vec<f64>,
    pub lambda: f64,
    pub cap_lambda: f64,
    pub concave: bool,
    pub failures: Vec<String>,
    pub report: Option<TableReport>,
}

fn bracket(axis: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n == 1 {
        return Some((0, 0.0));
    }
    if v < axis[0] - 1e-12 * axis[0].abs().max(1.0) || v > axis[n - 1] + 1e-12 * axis[n - 1].abs().max(1.0) {
        return None;
    }
    let k = axis.partition_point(|&a| a <= v).clamp(1, n - 1) - 1;
    let w = ((v - axis[k]) / (axis[k + 1] - axis[k])).clamp(0.0, 1.0);
    Some((k, w))
}

impl EffectiveOperatorTable {
    fn p_count(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    fn p_flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.len() + i)
    }

    /// Matrix at a flat table index.
    pub fn p_at(&self, flat: usize) -> SymMat {
        let mut rem = flat;
        let mut c = [0.0; 3];
        for (k, a) in self.axes.iter().enumerate().rev() {
            c[k] = a[rem % a.len()];
            rem /= a.len();
        }
        if self.n == 1 {
            SymMat::scalar(c[0])
        } else {
            SymMat::new2(c[0], c[1], c[2])
        }
    }

    fn slow_weights(nodes: &[f64], v: f64, periodic: Option<f64>) -> Vec<(usize, f64)> {
        let n = nodes.len();
        if n == 1 {
            return vec![(0, 1.0)];
        }
        if let Some(l) = periodic {
            let h = l / n as f64;
            let u = (v / h).rem_euclid(n as f64);
            let k = u.floor() as usize % n;
            let w = u - u.floor();
            return vec![(k, 1.0 - w), ((k + 1) % n, w)];
        }
        let (k, w) = bracket(nodes, v.clamp(nodes[0], nodes[n - 1])).unwrap();
        vec![(k, 1.0 - w), ((k + 1).min(n - 1), w)]
    }

    /// Multilinear interpolation; errors outside the matrix range.
    pub fn eval(&self, p: &SymMat, x: f64, t: f64) -> Result<f64> {
        let coords: Vec<f64> = if self.n == 1 { vec![p.e[0]] } else { p.e.to_vec() };
        let mut br = Vec::with_capacity(coords.len());
        for (a, &v) in self.axes.iter().zip(&coords) {
            match bracket(a, v) {
                Some(b) => br.push(b),
                None => {
                    return Err(Error::Range(format!(
                        "Hessian coordinate {v} outside table range [{}, {}]; extend the table",
                        a[0],
                        a[a.len() - 1]
                    )))
                }
            }
        }
        let pc = self.p_count();
        let nt = self.t_nodes.len();
        let mut total = 0.0;
        for (ix, wx) in Self::slow_weights(&self.x_nodes, x, Some(self.period)) {
            for (it, wt) in Self::slow_weights(&self.t_nodes, t, None) {
                if wx * wt == 0.0 {
                    continue;
                }
                let base = (ix * nt + it) * pc;
                let d = br.len();
                let mut acc = 0.0;
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    let mut idx = [0usize; 3];
                    for k in 0..d {
                        let (i, f) = br[k];
                        let up = (corner >> k) & 1 == 1;
                        let len = self.axes[k].len();
                        idx[k] = if up { (i + 1).min(len - 1) } else { i };
                        w *= if up { f } else { 1.0 - f };
                    }
                    if w != 0.0 {
                        acc += w * self.values[base + self.p_flat(&idx[..d])];
                    }
                }
                total += wx * wt * acc;
            }
        }
        Ok(total)
    }

    /// Checks sampled ellipticity along diagonal axes and midpoint concavity on random triples.
    pub fn validate(&mut self, tol_ellip: f64, tol_concave: f64, triples: usize, seed: u64) -> TableReport {
        let pc = self.p_count();
        let nt = self.t_nodes.len();
        let mut min_slope = f64::INFINITY;
        let mut max_slope = f64::NEG_INFINITY;
        let diag: Vec<usize> = if self.n == 1 { vec![0] } else { vec![0, 2] };
        let d = self.axes.len();
        for slab in 0..self.x_nodes.len() * nt {
            let base = slab * pc;
            for flat in 0..pc {
                let mut idx = [0usize; 3];
                let mut rem = flat;
                for k in (0..d).rev() {
                    idx[k] = rem % self.axes[k].len();
                    rem /= self.axes[k].len();
                }
                for &k in &diag {
                    if idx[k] + 1 < self.axes[k].len() {
                        let mut j = idx;
                        j[k] += 1;
                        let h = self.axes[k][j[k]] - self.axes[k][idx[k]];
                        let slope = (self.values[base + self.p_flat(&j[..d])] - self.values[base + flat]) / h;
                        min_slope = min_slope.min(slope);
                        max_slope = max_slope.max(slope);
                    }
                }
            }
        }
        let ellipticity_ok = min_slope >= self.lambda - tol_ellip && max_slope <= self.cap_lambda + tol_ellip;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut count = 0;
        if self.concave {
            for _ in 0..triples {
                // Same-parity index pairs so the midpoint is a node on uniform axes;
                // multilinear interpolation is not concave in several variables.
                let mut ia = [0usize; 3];
                let mut ib = [0usize; 3];
                for k in 0..d {
                    let len = self.axes[k].len();
                    ia[k] = rng.gen_range(0..len);
                    ib[k] = rng.gen_range(0..len);
                    if d > 1 && (ia[k] + ib[k]) % 2 == 1 {
                        ib[k] = if ib[k] + 1 < len { ib[k] + 1 } else { ib[k] - 1 };
                    }
                }
                let a = self.p_at(self.p_flat(&ia[..d]));
                let b = self.p_at(self.p_flat(&ib[..d]));
                let x = self.x_nodes[rng.gen_range(0..self.x_nodes.len())];
                let t = self.t_nodes[rng.gen_range(0..nt)];
                let mid = 0.5 * (a + b);
                if let (Ok(fa), Ok(fb), Ok(fm)) = (self.eval(&a, x, t), self.eval(&b, x, t), self.eval(&mid, x, t)) {
                    worst = worst.max(0.5 * (fa + fb) - fm);
                    count += 1;
                }
            }
        }
        let report = TableReport {
            min_slope,
            max_slope,
            ellipticity_ok,
            triples: count,
            max_concavity_violation: worst,
            concavity_ok: worst <= tol_concave,
        };
        self.report = Some(report.clone());
        report
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Tabulates `F̄` by long-time-slope cell solves at every grid point; failed
/// entries are recorded and the table is marked partial.
pub fn effective_operator_table(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    axes: Vec<Vec<f64>>,
    x_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    cfg: &CellConfig,
) -> Result<EffectiveOperatorTable> {
    let want = if op.n == 1 { 1 } else { 3 };
    if axes.len() != want || axes.iter().any(|a| a.is_empty() || a.windows(2).any(|w| w[1] <= w[0])) {
        return Err(Error::config("table.axes", format!("need {want} strictly increasing axes")));
    }
    if x_nodes.is_empty() || t_nodes.is_empty() {
        return Err(Error::config("table", "need at least one slow node"));
    }
    grid.check_cfl(op.cap_lambda)?;
    let mut table = EffectiveOperatorTable {
        n: op.n,
        axes,
        x_nodes,
        t_nodes,
        period: op.period,
        values: Vec::new(),
        lambda: op.lambda,
        cap_lambda: op.cap_lambda,
        concave: op.concave,
        failures: Vec::new(),
        report: None,
    };
    let pc = table.p_count();
    let nt = table.t_nodes.len();
    let jobs: Vec<(usize, usize)> = (0..table.x_nodes.len() * nt).flat_map(|s| (0..pc).map(move |p| (s, p))).collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(slab, flat)| {
            let x = table.x_nodes[slab / nt];
            let t = table.t_nodes[slab % nt];
            let frozen = FrozenOp::new(op, x, t, grid);
            ergodic_constant_lattice(&frozen, &table.p_at(flat), CellMethod::LongTimeSlope, cfg).map(|s| s.gamma)
        })
        .collect();
    for (r, &(slab, flat)) in results.into_iter().zip(&jobs) {
        match r {
            Ok(v) => table.values.push(v),
            Err(e) => {
                table.failures.push(format!("slow slab {slab}, P = {:?}: {e}", table.p_at(flat).e));
                table.values.push(f64::NAN);
            }
        }
    }
    Ok(table)
}
