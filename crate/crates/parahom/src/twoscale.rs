//! Two-scale bookkeeping shared by the layer and interior hierarchies.
//!
//! On the lattice `Δx = εΔy` a field `f(x, x/ε)` satisfies
//! `ε² δ_x² f = Σ_j ε^j T_j f` with `T_0 = δ_y²` and, for `j ≥ 1`,
//! `T_j = Δy^{j−2}/j! · (S₊ + (−1)^j S₋) ∂_x^j`, where `S_±` shift `y` by one node.

use crate::pde_core::PeriodicDiff;

/// Block layout `((t · nx + x) · phases + phase) · ny + y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub nt: usize,
    pub nx: usize,
    pub phases: usize,
    pub ny: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.nt * self.nx * self.phases * self.ny
    }

    pub fn block(&self) -> usize {
        self.phases * self.ny
    }

    pub fn slab(&self) -> usize {
        self.nx * self.block()
    }

    pub fn nodes(&self) -> usize {
        self.nt * self.nx
    }

    /// Offset of the block at slow node `(t, x)`.
    pub fn at(&self, t: usize, x: usize) -> usize {
        (t * self.nx + x) * self.block()
    }
}

/// `Δy^{j−2} / j!`.
pub fn t_coef(j: usize, dy: f64) -> f64 {
    let fact: f64 = (1..=j).map(|v| v as f64).product();
    dy.powi(j as i32 - 2) / fact
}

/// Adds `T_j` applied to one y-periodic row; `g` is `f` for `j = 0` and `∂_x^j f` otherwise.
pub fn add_t_row(j: usize, g: &[f64], dy: f64, out: &mut [f64]) {
    let ny = g.len();
    let c = t_coef(j, dy);
    for y in 0..ny {
        let yp = if y + 1 == ny { 0 } else { y + 1 };
        let ym = if y == 0 { ny - 1 } else { y - 1 };
        out[y] += match j {
            0 => (g[yp] - 2.0 * g[y] + g[ym]) * c,
            _ if j.is_multiple_of(2) => c * (g[yp] + g[ym]),
            _ => c * (g[yp] - g[ym]),
        };
    }
}

/// `T_j` of a function independent of `y` with `∂_x^j` value `g`.
pub fn t_of_constant(j: usize, g: f64, dy: f64) -> f64 {
    if j >= 2 && j.is_multiple_of(2) {
        2.0 * t_coef(j, dy) * g
    } else {
        0.0
    }
}

/// Applies `T_j` to every y-row of a blocked field.
pub fn add_t_field(j: usize, g: &[f64], ny: usize, dy: f64, out: &mut [f64]) {
    for (gr, orow) in g.chunks(ny).zip(out.chunks_mut(ny)) {
        add_t_row(j, gr, dy, orow);
    }
}

/// Periodic 8th-order x-derivatives of a blocked field, one t-slab at a time.
pub fn x_derivative(diff: &PeriodicDiff, f: &[f64], lay: &Layout, out: &mut [f64]) {
    let slab = lay.slab();
    for t in 0..lay.nt {
        diff.apply_strided(&f[t * slab..(t + 1) * slab], lay.nx, lay.block(), &mut out[t * slab..(t + 1) * slab]);
    }
}

/// x-derivative operators of orders `1..=pmax` (index 0 unused).
pub fn diff_family(pmax: usize, dx: f64) -> Vec<PeriodicDiff> {
    (0..=pmax).map(|p| PeriodicDiff::new(p.max(1), 8, dx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Direct check of the expansion on a separable two-scale function.
    #[test]
    fn t_maps_reproduce_fine_grid_second_difference() {
        let ny = 16;
        let dy = 1.0 / ny as f64;
        let eps = 1.0 / 8.0;
        let dx = eps * dy;
        let f = |x: f64, y: f64| (TAU * x).sin() * (1.0 + 0.5 * (TAU * y).cos());
        let dxj = |j: usize, x: f64, y: f64| {
            let w = TAU.powi(j as i32);
            let s = match j % 4 {
                0 => (TAU * x).sin(),
                1 => (TAU * x).cos(),
                2 => -(TAU * x).sin(),
                _ => -(TAU * x).cos(),
            };
            w * s * (1.0 + 0.5 * (TAU * y).cos())
        };
        let x0 = 0.3;
        let yi = 3;
        let y0 = yi as f64 * dy;
        let exact = eps * eps * (f(x0 + dx, y0 + dy) - 2.0 * f(x0, y0) + f(x0 - dx, y0 - dy)) / (dx * dx);
        let mut series = 0.0;
        for j in 0..14 {
            let row: Vec<f64> =
                (0..ny).map(|k| if j == 0 { f(x0, k as f64 * dy) } else { dxj(j, x0, k as f64 * dy) }).collect();
            let mut out = vec![0.0; ny];
            add_t_row(j, &row, dy, &mut out);
            series += eps.powi(j as i32) * out[yi];
        }
        assert!((series - exact).abs() < 1e-9 * exact.abs().max(1.0), "{series} vs {exact}");
    }
}
