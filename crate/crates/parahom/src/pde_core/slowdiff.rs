//! High-order finite differences and Lagrange interpolation on uniform grids.

/// Fornberg weights: `w[d][j]` approximates the `d`-th derivative at `z` from
/// values at `nodes[j]`, for `d ≤ m`.
pub fn fornberg(z: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Centered periodic derivative operator of order `deriv` and accuracy `acc` (even).
#[derive(Clone, Debug)]
pub struct PeriodicDiff {
    half: usize,
    weights: Vec<f64>,
}

impl PeriodicDiff {
    pub fn new(deriv: usize, acc: usize, h: f64) -> Self {
        let half = deriv.div_ceil(2) + acc / 2 - 1;
        let half = half.max(1);
        let nodes: Vec<f64> = (-(half as i64)..=half as i64).map(|j| j as f64).collect();
        let w = fornberg(0.0, &nodes, deriv);
        let scale = h.powi(deriv as i32);
        PeriodicDiff { half, weights: w[deriv].iter().map(|v| v / scale).collect() }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut out = vec![0.0; n];
        self.apply_into(f, &mut out);
        out
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len() as i64;
        let h = self.half as i64;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in self.weights.iter().enumerate() {
                let j = (i as i64 + k as i64 - h).rem_euclid(n) as usize;
                acc += w * f[j];
            }
            *o = acc;
        }
    }

    /// Applies the operator to a strided family of periodic sequences:
    /// element `(i, r)` of the input sits at `f[i * stride + r]`.
    pub fn apply_strided(&self, f: &[f64], len: usize, stride: usize, out: &mut [f64]) {
        let h = self.half as i64;
        let n = len as i64;
        for i in 0..len {
            let o = &mut out[i * stride..(i + 1) * stride];
            o.iter_mut().for_each(|v| *v = 0.0);
            for (k, w) in self.weights.iter().enumerate() {
                let j = (i as i64 + k as i64 - h).rem_euclid(n) as usize;
                let src = &f[j * stride..(j + 1) * stride];
                for (ov, sv) in o.iter_mut().zip(src) {
                    *ov += w * sv;
                }
            }
        }
    }
}

/// Periodic Lagrange interpolation with `order` points on a uniform grid of period `period`.
pub fn periodic_interp_weights(x: f64, n: usize, period: f64, order: usize) -> (Vec<usize>, Vec<f64>) {
    let h = period / n as f64;
    let u = (x / h).rem_euclid(n as f64);
    let base = u.floor() as i64 - (order as i64 / 2 - 1);
    let mut idx = Vec::with_capacity(order);
    let mut nodes = Vec::with_capacity(order);
    for k in 0..order as i64 {
        let j = base + k;
        idx.push(j.rem_euclid(n as i64) as usize);
        nodes.push(j as f64);
    }
    let w = fornberg(u, &nodes, 0).swap_remove(0);
    (idx, w)
}

pub fn periodic_interp(f: &[f64], x: f64, period: f64, order: usize) -> f64 {
    let (idx, w) = periodic_interp_weights(x, f.len(), period, order);
    idx.iter().zip(&w).map(|(&i, w)| w * f[i]).sum()
}

/// Weights for the `deriv`-th derivative (or interpolation when `deriv = 0`) at
/// `z` from a non-periodic uniform grid `0, h, …, (n−1)h`, using the `order`
/// nearest nodes (one-sided near the ends).
pub fn bounded_weights(z: f64, n: usize, h: f64, order: usize, deriv: usize) -> (usize, Vec<f64>) {
    let order = order.min(n);
    let u = z / h;
    let centre = u.round() as i64 - (order as i64 - 1) / 2;
    let start = centre.clamp(0, (n - order) as i64) as usize;
    let nodes: Vec<f64> = (0..order).map(|k| (start + k) as f64).collect();
    let w = fornberg(u, &nodes, deriv);
    let scale = h.powi(deriv as i32);
    (start, w[deriv].iter().map(|v| v / scale).collect())
}
