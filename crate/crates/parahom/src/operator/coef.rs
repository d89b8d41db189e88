//! Coefficient fields given as truncated Fourier series.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::symmat::SymMat;

/// One cosine/sine pair of a Fourier series.
///
/// The phase is `2π(kx·x/L + ky·y + ks·s)`; `kx` counts slow periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    #[serde(default)]
    pub kx: i32,
    #[serde(default)]
    pub ky: [i32; 2],
    #[serde(default)]
    pub ks: i32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl FourierMode {
    pub fn y(ky: i32, cos: f64, sin: f64) -> Self {
        FourierMode { kx: 0, ky: [ky, 0], ks: 0, cos, sin }
    }
}

/// Truncated Fourier series in `(x/L, y, s)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<FourierMode>,
}

impl FourierSeries {
    pub fn constant(c: f64) -> Self {
        FourierSeries { mean: c, modes: Vec::new() }
    }

    pub fn with_modes(mean: f64, modes: Vec<FourierMode>) -> Self {
        FourierSeries { mean, modes }
    }

    /// Value at normalized slow coordinate `xi = x/L`.
    pub fn eval(&self, xi: f64, y: [f64; 2], s: f64) -> f64 {
        let mut v = self.mean;
        for m in &self.modes {
            let th = TAU
                * (m.kx as f64 * xi + m.ky[0] as f64 * y[0] + m.ky[1] as f64 * y[1] + m.ks as f64 * s);
            if m.cos != 0.0 {
                v += m.cos * th.cos();
            }
            if m.sin != 0.0 {
                v += m.sin * th.sin();
            }
        }
        v
    }

    /// Lower bound `mean − Σ(|cos| + |sin|)`.
    pub fn lower_bound(&self) -> f64 {
        self.mean - self.amplitude()
    }

    pub fn upper_bound(&self) -> f64 {
        self.mean + self.amplitude()
    }

    fn amplitude(&self) -> f64 {
        self.modes.iter().map(|m| m.cos.abs() + m.sin.abs()).sum()
    }

    pub fn depends_on_x(&self) -> bool {
        self.modes.iter().any(|m| m.kx != 0 && (m.cos != 0.0 || m.sin != 0.0))
    }

    pub fn depends_on_y(&self) -> bool {
        self.modes.iter().any(|m| m.ky != [0, 0] && (m.cos != 0.0 || m.sin != 0.0))
    }

    pub fn depends_on_s(&self) -> bool {
        self.modes.iter().any(|m| m.ks != 0 && (m.cos != 0.0 || m.sin != 0.0))
    }
}

/// Scalar coefficient: a Fourier series or the reciprocal of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coef {
    Const(f64),
    Fourier(FourierSeries),
    Reciprocal(FourierSeries),
}

impl Coef {
    pub fn eval(&self, xi: f64, y: [f64; 2], s: f64) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Fourier(f) => f.eval(xi, y, s),
            Coef::Reciprocal(f) => 1.0 / f.eval(xi, y, s),
        }
    }

    /// Conservative `(min, max)` bounds, `None` if a reciprocal crosses zero.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Coef::Const(c) => Some((*c, *c)),
            Coef::Fourier(f) => Some((f.lower_bound(), f.upper_bound())),
            Coef::Reciprocal(f) => {
                let (lo, hi) = (f.lower_bound(), f.upper_bound());
                if lo > 0.0 {
                    Some((1.0 / hi, 1.0 / lo))
                } else if hi < 0.0 {
                    Some((1.0 / hi, 1.0 / lo))
                } else {
                    None
                }
            }
        }
    }

    fn series(&self) -> Option<&FourierSeries> {
        match self {
            Coef::Const(_) => None,
            Coef::Fourier(f) | Coef::Reciprocal(f) => Some(f),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        self.series().is_some_and(|f| f.depends_on_x())
    }

    pub fn depends_on_y(&self) -> bool {
        self.series().is_some_and(|f| f.depends_on_y())
    }

    pub fn depends_on_s(&self) -> bool {
        self.series().is_some_and(|f| f.depends_on_s())
    }
}

/// Symmetric-matrix-valued coefficient field with entries `(a11, a12, a22)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymField {
    pub n: usize,
    pub entries: Vec<Coef>,
}

impl SymField {
    pub fn scalar(c: Coef) -> Self {
        SymField { n: 1, entries: vec![c] }
    }

    pub fn constant(m: SymMat) -> Self {
        let k = m.dim();
        SymField { n: m.n, entries: (0..k).map(|a| Coef::Const(m.e[a])).collect() }
    }

    pub fn eval(&self, xi: f64, y: [f64; 2], s: f64) -> SymMat {
        let mut m = SymMat::zero(self.n);
        for (a, c) in self.entries.iter().enumerate() {
            m.e[a] = c.eval(xi, y, s);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_harmonic_coefficient() {
        let c = Coef::Reciprocal(FourierSeries::with_modes(2.0, vec![FourierMode::y(1, 0.0, 1.0)]));
        assert!((c.eval(0.0, [0.25, 0.0], 0.0) - 1.0 / 3.0).abs() < 1e-15);
        let (lo, hi) = c.bounds().unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_in_fast_variables() {
        let f = FourierSeries::with_modes(
            1.0,
            vec![FourierMode { kx: 1, ky: [2, 0], ks: 1, cos: 0.3, sin: -0.2 }],
        );
        let a = f.eval(0.3, [0.1, 0.0], 0.7);
        let b = f.eval(0.3, [1.1, 0.0], 1.7);
        assert!((a - b).abs() < 1e-13);
        assert!(f.depends_on_x() && f.depends_on_y() && f.depends_on_s());
    }
}
