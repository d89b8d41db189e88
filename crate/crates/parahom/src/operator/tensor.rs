//! Matrix-slot Fréchet derivatives as symmetric multilinear forms.

use super::symmat::{coord_dim, SymMat};
use super::{fd_step, FullyNonlinearOp, Pt, MAX_COEFS};
use crate::error::{Error, Result};

/// Symmetric `k`-linear form on symmetric matrices in coordinates `(p11, p12, p22)`.
///
/// Entry `(a₁,…,a_k)` sits at flat index `Σ a_j d^{j-1}` with `d` the coordinate dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeTensor {
    pub order: usize,
    pub n: usize,
    pub data: Vec<f64>,
    pub point: (SymMat, Pt),
    /// Set when the evaluation point is a kink of a piecewise smooth operator.
    pub kink: bool,
}

impl DerivativeTensor {
    pub fn dim(&self) -> usize {
        coord_dim(self.n)
    }

    /// `D^kF(P)(Q₁,…,Q_k)`.
    pub fn apply(&self, qs: &[SymMat]) -> f64 {
        assert_eq!(qs.len(), self.order, "argument count must equal tensor order");
        let d = self.dim();
        let mut acc = 0.0;
        for (flat, &v) in self.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut r = flat;
            let mut prod = v;
            for q in qs {
                prod *= q.e[r % d];
                r /= d;
            }
            acc += prod;
        }
        acc
    }

    /// Gradient matrix `G` with `D F(P)(Q) = tr(G Q)` for an order-one tensor.
    pub fn as_matrix(&self) -> SymMat {
        assert_eq!(self.order, 1);
        if self.n == 1 {
            SymMat::scalar(self.data[0])
        } else {
            SymMat::new2(self.data[0], 0.5 * self.data[1], self.data[2])
        }
    }

    /// Largest deviation between entries related by an index permutation.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; self.order];
        for (flat, &v) in self.data.iter().enumerate() {
            let mut r = flat;
            for slot in idx.iter_mut() {
                *slot = r % d;
                r /= d;
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            let canon: usize = sorted.iter().rev().fold(0, |acc, &a| acc * d + a);
            worst = worst.max((v - self.data[canon]).abs());
        }
        worst
    }

    fn symmetrize(&mut self) {
        let d = self.dim();
        let mut sums = std::collections::HashMap::<Vec<usize>, (f64, usize)>::new();
        let mut keys = Vec::with_capacity(self.data.len());
        for (flat, &v) in self.data.iter().enumerate() {
            let mut r = flat;
            let mut idx: Vec<usize> = (0..self.order)
                .map(|_| {
                    let a = r % d;
                    r /= d;
                    a
                })
                .collect();
            idx.sort_unstable();
            let e = sums.entry(idx.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
            keys.push(idx);
        }
        for (flat, key) in keys.iter().enumerate() {
            let (s, c) = sums[key];
            self.data[flat] = s / c as f64;
        }
    }
}

impl FullyNonlinearOp {
    /// `D_p^k F(P, x, t, y, s)`: analytic when available, otherwise central
    /// differences of the order `k−1` tensor along each coordinate direction.
    pub fn frechet_derivative(&self, k: usize, p: &SymMat, pt: &Pt) -> Result<DerivativeTensor> {
        if k == 0 {
            return Err(Error::Tolerance("derivative order must be ≥ 1".into()));
        }
        let mut c = [0.0; MAX_COEFS];
        self.sample_coefs(pt, &mut c);
        if let Some((data, kink)) = self.kind.analytic_tensor(k, p, &c) {
            return Ok(DerivativeTensor { order: k, n: p.n, data, point: (*p, *pt), kink });
        }
        let h = fd_step(p.norm(), k);
        if !(h > 0.0) || p.norm() + h == p.norm() {
            return Err(Error::Tolerance(format!("finite-difference step {h:e} underflows")));
        }
        let d = p.dim();
        let lower = |q: &SymMat| -> Result<Vec<f64>> {
            if k == 1 {
                Ok(vec![self.eval(q, pt)?])
            } else {
                Ok(self.frechet_derivative(k - 1, q, pt)?.data)
            }
        };
        let stride = d.pow(k as u32 - 1);
        let mut data = vec![0.0; stride * d];
        for a in 0..d {
            let e = SymMat::basis(p.n, a);
            let plus = lower(&(*p + h * e))?;
            let minus = lower(&(*p - h * e))?;
            for j in 0..stride {
                data[j + a * stride] = (plus[j] - minus[j]) / (2.0 * h);
            }
        }
        let mut t = DerivativeTensor { order: k, n: p.n, data, point: (*p, *pt), kink: false };
        let scale = t.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let asym = t.asymmetry();
        if asym > 1e-3 * scale {
            return Err(Error::Tolerance(format!("derivative tensor asymmetry {asym:e}")));
        }
        t.symmetrize();
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::SymField;

    fn pt() -> Pt {
        Pt::new(0.1, 0.0, [0.3, 0.6], 0.2)
    }

    #[test]
    fn linear_first_derivative_is_coefficient() {
        let a = SymMat::new2(2.0, 0.3, 1.0);
        let op = FullyNonlinearOp::linear_tr(SymField::constant(a)).unwrap();
        let t = op.frechet_derivative(1, &SymMat::new2(5.0, 1.0, -2.0), &pt()).unwrap();
        assert_eq!(t.as_matrix(), a);
        let q = SymMat::new2(0.5, -0.25, 3.0);
        assert!((t.apply(&[q]) - a.frob(&q)).abs() < 1e-14);
        let t2 = op.frechet_derivative(2, &SymMat::new2(5.0, 1.0, -2.0), &pt()).unwrap();
        assert!(t2.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pucci_one_sided_slope() {
        let op = FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap();
        let t = op.frechet_derivative(1, &SymMat::scalar(1.0), &Pt::y1(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(t.data[0], 1.0);
        assert!(!t.kink);
        let k = op.frechet_derivative(1, &SymMat::scalar(0.0), &Pt::y1(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(k.kink);
    }

    #[test]
    fn finite_difference_tensor_matches_analytic_softmin() {
        let fam = vec![
            SymField::constant(SymMat::new2(1.0, 0.2, 0.5)),
            SymField::constant(SymMat::new2(0.6, -0.1, 1.2)),
        ];
        let op = FullyNonlinearOp::hjb_min(fam, 0.5).unwrap();
        let p = SymMat::new2(0.3, -0.2, 0.4);
        let an = op.frechet_derivative(2, &p, &pt()).unwrap();
        let a1 = op.frechet_derivative(1, &p, &pt()).unwrap();
        let custom = FullyNonlinearOp::custom(2, move |q, x| op.eval_unchecked(q, x), 0.5, 2.0, true);
        let fd = custom.frechet_derivative(2, &p, &pt()).unwrap();
        let fd1 = custom.frechet_derivative(1, &p, &pt()).unwrap();
        for (a, b) in an.data.iter().zip(&fd.data) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        for (a, b) in a1.data.iter().zip(&fd1.data) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(an.asymmetry() < 1e-14);
    }

    #[test]
    fn pucci_2d_gradient_is_trace_pairing() {
        let op = FullyNonlinearOp::pucci_minus(2, 1.0, 2.0).unwrap();
        let p = SymMat::new2(1.0, 2.0, -1.0);
        let t = op.frechet_derivative(1, &p, &pt()).unwrap();
        let q = SymMat::new2(0.3, 0.1, -0.2);
        let h = 1e-6;
        let fd = (op.eval_unchecked(&(p + h * q), &pt()) - op.eval_unchecked(&(p - h * q), &pt())) / (2.0 * h);
        assert!((t.apply(&[q]) - fd).abs() < 1e-7);
    }
}
