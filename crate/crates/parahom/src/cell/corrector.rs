//! Matrix correctors and driven linear cell problems.

use serde::{Deserialize, Serialize};

use super::{ergodic_constant_lattice, long_time_slope, to_fields, CellConfig, CellMethod};
use crate::error::{Error, Result};
use crate::operator::{FrozenOp, FullyNonlinearOp, SymMat};
use crate::pde_core::{FastField, LinearLattice, TorusGrid};

/// Solution of `φ_s = tr(A D²φ) + f − f̄` with `φ(0,0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivenCellResult {
    pub fbar: f64,
    /// One block of lattice values per fast-time phase.
    pub phi: Vec<f64>,
}

impl DrivenCellResult {
    pub fn fields(&self, grid: &TorusGrid) -> Vec<FastField> {
        to_fields(&self.phi, grid.nodes(), grid.ds())
    }
}

/// Exact periodic solve of `a_i δ²φ_i = f̄ − f_i` on a one-dimensional lattice.
fn driven_steady_1d(a: &[f64], f: &[f64], dy: f64) -> DrivenCellResult {
    let n = a.len();
    let inv_a: f64 = a.iter().map(|v| 1.0 / v).sum();
    let fbar = f.iter().zip(a).map(|(f, a)| f / a).sum::<f64>() / inv_a;
    let r: Vec<f64> = f.iter().zip(a).map(|(f, a)| (fbar - f) / a * dy * dy).collect();
    // φ_{i+1} − φ_i = D_i with D_i − D_{i−1} = r_i and Σ D_i = 0.
    let mut d = vec![0.0; n];
    for i in 1..n {
        d[i] = d[i - 1] + r[i];
    }
    let shift = d.iter().sum::<f64>() / n as f64;
    let mut phi = vec![0.0; n];
    for i in 1..n {
        phi[i] = phi[i - 1] + d[i - 1] - shift;
    }
    DrivenCellResult { fbar, phi }
}

/// Driven cell problem for the linear lattice operator `a` with forcing `f`
/// (one block of lattice values per phase of `a`).
///
/// One-dimensional `s`-independent problems are solved exactly as a periodic
/// two-point system; all others by the long-time slope of the driven flow.
pub fn driven_cell(a: &LinearLattice, f: &[f64], cfg: &CellConfig) -> Result<DrivenCellResult> {
    let nodes = a.grid.nodes();
    if f.len() != a.steps * nodes {
        return Err(Error::Sequencing(format!(
            "driven cell forcing has {} entries, expected {}",
            f.len(),
            a.steps * nodes
        )));
    }
    if a.grid.n == 1 && a.steps == 1 {
        let coef: Vec<f64> = a.a.iter().map(|m| m.e[0]).collect();
        return Ok(driven_steady_1d(&coef, f, a.grid.dy()));
    }
    let (fbar, phi) = long_time_slope(a, &SymMat::zero(a.grid.n), Some(f), cfg)?;
    Ok(DrivenCellResult { fbar, phi })
}

/// Effective matrix `Ā` and the correctors `χ_a` for each coordinate
/// direction `E_a` of the linearization `A = D_pF(0)` at one slow point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCorrector {
    pub x: f64,
    pub t: f64,
    pub abar: SymMat,
    /// `chi[a]` holds one block of lattice values per phase.
    pub chi: Vec<Vec<f64>>,
    pub linearization: Vec<SymMat>,
    pub steps: usize,
}

impl MatrixCorrector {
    /// `tr(χ Q)` at a lattice node and phase, with `Q` in coordinates.
    pub fn contract(&self, q: &SymMat, index: usize) -> f64 {
        let mut v = 0.0;
        for (a, chi) in self.chi.iter().enumerate() {
            v += chi[index] * q.e[a];
        }
        v
    }
}

/// Solves the linear cell problems `χ_s = tr(A(D²χ + E_a)) − Ā_a` at `(x, t)`.
pub fn matrix_corrector(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    x: f64,
    t: f64,
    cfg: &CellConfig,
) -> Result<MatrixCorrector> {
    grid.check_cfl(op.cap_lambda)?;
    let frozen = FrozenOp::new(op, x, t, grid);
    let n = op.n;
    let lin = LinearLattice::linearize(&frozen, |_, _| SymMat::zero(n))?;
    let dim = if n == 1 { 1 } else { 3 };
    let mut fb = [0.0; 3];
    let mut chi = Vec::with_capacity(dim);
    for (k, slot) in fb.iter_mut().enumerate().take(dim) {
        let e = if n == 1 { SymMat::scalar(1.0) } else { SymMat::basis(2, k) };
        let f: Vec<f64> = lin.a.iter().map(|m| m.frob(&e)).collect();
        let r = driven_cell(&lin, &f, cfg)?;
        *slot = r.fbar;
        chi.push(r.phi);
    }
    let abar = if n == 1 { SymMat::scalar(fb[0]) } else { SymMat::new2(fb[0], 0.5 * fb[1], fb[2]) };
    Ok(MatrixCorrector { x, t, abar, chi, steps: lin.steps, linearization: lin.a })
}

/// Matrix corrector cross-checked against `(F̄(hE) − F̄(−hE)) / 2h`.
pub fn matrix_corrector_checked(
    op: &FullyNonlinearOp,
    grid: &TorusGrid,
    x: f64,
    t: f64,
    h: f64,
    tol: f64,
    cfg: &CellConfig,
) -> Result<MatrixCorrector> {
    let mc = matrix_corrector(op, grid, x, t, cfg)?;
    let frozen = FrozenOp::new(op, x, t, grid);
    let dim = if op.n == 1 { 1 } else { 3 };
    for a in 0..dim {
        let e = if op.n == 1 { SymMat::scalar(1.0) } else { SymMat::basis(2, a) };
        let plus = ergodic_constant_lattice(&frozen, &(h * e), CellMethod::LongTimeSlope, cfg)?.gamma;
        let minus = ergodic_constant_lattice(&frozen, &(-h * e), CellMethod::LongTimeSlope, cfg)?.gamma;
        let fd = (plus - minus) / (2.0 * h);
        let want = if a == 1 { 2.0 * mc.abar.e[1] } else { mc.abar.e[a] };
        if (fd - want).abs() > tol {
            return Err(Error::Consistency(format!(
                "Ā coordinate {a}: corrector gives {want}, table difference gives {fd}"
            )));
        }
    }
    Ok(mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::SymField;
    use std::f64::consts::TAU;

    #[test]
    fn constant_forcing_is_its_own_mean() {
        let g = TorusGrid::for_ellipticity(1, 16, 1.0).unwrap();
        let lin = LinearLattice { grid: g.clone(), steps: 1, a: vec![SymMat::scalar(1.0); 16], cap_lambda: 1.0 };
        let r = driven_cell(&lin, &[0.7; 16], &CellConfig::default()).unwrap();
        assert!((r.fbar - 0.7).abs() < 1e-14);
        assert!(r.phi.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn cosine_forcing_heat() {
        let g = TorusGrid::for_ellipticity(1, 64, 1.0).unwrap();
        let lin = LinearLattice { grid: g.clone(), steps: 1, a: vec![SymMat::scalar(1.0); 64], cap_lambda: 1.0 };
        let f: Vec<f64> = (0..64).map(|i| (TAU * g.coords(i)[0]).cos()).collect();
        let r = driven_cell(&lin, &f, &CellConfig::default()).unwrap();
        assert!(r.fbar.abs() < 1e-14);
        let dy = g.dy();
        let symbol = (2.0 - 2.0 * (TAU * dy).cos()) / (dy * dy);
        for (i, p) in r.phi.iter().enumerate() {
            let want = (f[i] - 1.0) / symbol;
            assert!((p - want).abs() < 1e-12, "{p} vs {want}");
        }
    }

    #[test]
    fn direct_and_marched_driven_cells_agree() {
        let op = FullyNonlinearOp::harmonic_1d();
        let g = TorusGrid::for_ellipticity(1, 32, op.cap_lambda).unwrap();
        let frozen = FrozenOp::new(&op, 0.0, 0.0, &g);
        let lin = LinearLattice::linearize(&frozen, |_, _| SymMat::scalar(0.0)).unwrap();
        let f: Vec<f64> = (0..32).map(|i| (TAU * g.coords(i)[0]).sin() + 0.3).collect();
        let direct = driven_cell(&lin, &f, &CellConfig::default()).unwrap();
        let (fb, phi) = long_time_slope(&lin, &SymMat::scalar(0.0), Some(&f), &CellConfig::default()).unwrap();
        assert!((direct.fbar - fb).abs() < 1e-9);
        for (a, b) in direct.phi.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_matrix_corrector() {
        let op = FullyNonlinearOp::harmonic_1d();
        let g = TorusGrid::for_ellipticity(1, 32, op.cap_lambda).unwrap();
        let mc = matrix_corrector_checked(&op, &g, 0.0, 0.0, 1e-3, 1e-4, &CellConfig::default()).unwrap();
        assert!((mc.abar.e[0] - 0.5).abs() < 1e-12);
        assert_eq!(mc.chi[0][0], 0.0);
    }

    #[test]
    fn constant_coefficients_have_zero_corrector() {
        let a = SymField::constant(SymMat::new2(1.5, 0.2, 1.0));
        let op = FullyNonlinearOp::linear_tr(a).unwrap();
        let g = TorusGrid::for_ellipticity(2, 8, op.cap_lambda).unwrap();
        let mc = matrix_corrector(&op, &g, 0.0, 0.0, &CellConfig::default()).unwrap();
        assert!((mc.abar.e[0] - 1.5).abs() < 1e-10 && (mc.abar.e[1] - 0.2).abs() < 1e-10);
        assert!(mc.chi.iter().flatten().all(|v| v.abs() < 1e-10));
    }
}
