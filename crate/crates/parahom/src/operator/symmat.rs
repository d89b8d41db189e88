//! Symmetric matrices of dimension one or two.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Symmetric n×n matrix with n ∈ {1, 2}, stored by its upper triangle.
///
/// Coordinates are `(p11, p12, p22)`; in dimension one only `p11` is used.
/// The coordinate basis is `E11, E12 = e1⊗e2 + e2⊗e1, E22`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    pub n: usize,
    pub e: [f64; 3],
}

impl SymMat {
    pub fn zero(n: usize) -> Self {
        assert!(n == 1 || n == 2, "dimension must be 1 or 2");
        SymMat { n, e: [0.0; 3] }
    }

    pub fn scalar(p: f64) -> Self {
        SymMat { n: 1, e: [p, 0.0, 0.0] }
    }

    pub fn new2(p11: f64, p12: f64, p22: f64) -> Self {
        SymMat { n: 2, e: [p11, p12, p22] }
    }

    pub fn identity(n: usize) -> Self {
        if n == 1 {
            Self::scalar(1.0)
        } else {
            Self::new2(1.0, 0.0, 1.0)
        }
    }

    /// Number of independent coordinates (1 or 3).
    pub fn dim(&self) -> usize {
        coord_dim(self.n)
    }

    /// Coordinate basis element `E_a`.
    pub fn basis(n: usize, a: usize) -> Self {
        let mut m = Self::zero(n);
        m.e[a] = 1.0;
        m
    }

    /// Entry `(i, j)` with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.e[0],
            (1, 1) => self.e[2],
            _ => self.e[1],
        }
    }

    pub fn trace(&self) -> f64 {
        if self.n == 1 {
            self.e[0]
        } else {
            self.e[0] + self.e[2]
        }
    }

    /// Frobenius pairing `tr(A B) = Σ a_ij b_ij`.
    pub fn frob(&self, o: &SymMat) -> f64 {
        if self.n == 1 {
            self.e[0] * o.e[0]
        } else {
            self.e[0] * o.e[0] + 2.0 * self.e[1] * o.e[1] + self.e[2] * o.e[2]
        }
    }

    /// Frobenius norm `(Σ p_ij²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.frob(self).sqrt()
    }

    /// Eigenvalues in ascending order (one entry used when n = 1).
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.n == 1 {
            return [self.e[0], self.e[0]];
        }
        let m = 0.5 * (self.e[0] + self.e[2]);
        let d = (0.25 * (self.e[0] - self.e[2]).powi(2) + self.e[1] * self.e[1]).sqrt();
        [m - d, m + d]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|v| v.is_finite())
    }
}

pub fn coord_dim(n: usize) -> usize {
    if n == 1 {
        1
    } else {
        3
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, o: SymMat) -> SymMat {
        SymMat { n: self.n, e: [self.e[0] + o.e[0], self.e[1] + o.e[1], self.e[2] + o.e[2]] }
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, o: SymMat) -> SymMat {
        SymMat { n: self.n, e: [self.e[0] - o.e[0], self.e[1] - o.e[1], self.e[2] - o.e[2]] }
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat { n: self.n, e: [-self.e[0], -self.e[1], -self.e[2]] }
    }
}

impl Mul<SymMat> for f64 {
    type Output = SymMat;
    fn mul(self, m: SymMat) -> SymMat {
        SymMat { n: m.n, e: [self * m.e[0], self * m.e[1], self * m.e[2]] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_is_frobenius() {
        let p = SymMat::new2(1.0, 2.0, 3.0);
        assert!((p.norm() - (1.0f64 + 8.0 + 9.0).sqrt()).abs() < 1e-15);
        assert_eq!(SymMat::scalar(-3.0).norm(), 3.0);
    }

    #[test]
    fn eigenvalues_of_diagonal_and_offdiagonal() {
        let ev = SymMat::new2(0.0, 1.0, 0.0).eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        assert!(!SymMat::new2(0.0, 1.0, 0.0).is_psd(1e-12));
        assert!(SymMat::identity(2).is_psd(0.0));
    }

    #[test]
    fn trace_pairing_matches_coordinates() {
        let a = SymMat::new2(1.0, 0.5, 2.0);
        let b = SymMat::new2(3.0, -1.0, 4.0);
        assert!((a.frob(&b) - (3.0 - 1.0 + 8.0)).abs() < 1e-15);
    }
}
