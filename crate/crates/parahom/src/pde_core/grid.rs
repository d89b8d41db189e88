//! Periodic fast lattice and slow grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fast torus `[0,1)^n` with `ny` nodes per axis and `steps_per_unit` explicit
/// steps per unit of fast time, so that `Δs = 1 / steps_per_unit`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub n: usize,
    pub ny: usize,
    pub steps_per_unit: usize,
}

impl TorusGrid {
    pub fn new(n: usize, ny: usize, steps_per_unit: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::config("grids.n", "dimension must be 1 or 2"));
        }
        if ny < 4 || !ny.is_power_of_two() {
            return Err(Error::config("grids.n_y", format!("N_y must be a power of two ≥ 4, got {ny}")));
        }
        if steps_per_unit == 0 {
            return Err(Error::config("grids.steps_per_unit", "must be positive"));
        }
        Ok(TorusGrid { n, ny, steps_per_unit })
    }

    /// Grid whose step is the CFL step `0.9 Δy² / (2 n Λ)` rounded down to `1/M`.
    pub fn for_ellipticity(n: usize, ny: usize, cap_lambda: f64) -> Result<Self> {
        let m = (2.0 * n as f64 * cap_lambda * (ny * ny) as f64 / 0.9).ceil() as usize;
        Self::new(n, ny, m.max(1))
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn ds(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn nodes(&self) -> usize {
        self.ny.pow(self.n as u32)
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let dy = self.dy();
        if self.n == 1 {
            [node as f64 * dy, 0.0]
        } else {
            [(node % self.ny) as f64 * dy, (node / self.ny) as f64 * dy]
        }
    }

    /// Monotonicity bound `Δy² / (2 n Λ)`.
    pub fn cfl_bound(&self, cap_lambda: f64) -> f64 {
        self.dy() * self.dy() / (2.0 * self.n as f64 * cap_lambda)
    }

    pub fn check_cfl(&self, cap_lambda: f64) -> Result<()> {
        let b = self.cfl_bound(cap_lambda);
        if self.ds() > b * (1.0 + 1e-12) {
            return Err(Error::Cfl { step: self.ds(), bound: b });
        }
        Ok(())
    }
}

/// Uniform periodic slow grid on `[0, L)` with horizon `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowGrid {
    pub nx: usize,
    pub period: f64,
    pub horizon: f64,
}

impl SlowGrid {
    pub fn new(nx: usize, period: f64, horizon: f64) -> Result<Self> {
        if nx < 8 {
            return Err(Error::config("grids.n_x", "need at least 8 slow nodes"));
        }
        if !(period > 0.0) || !(horizon > 0.0) {
            return Err(Error::config("grids", "period and horizon must be positive"));
        }
        Ok(SlowGrid { nx, period, horizon })
    }

    pub fn dx(&self) -> f64 {
        self.period / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
}

/// Values on the fast lattice at fast time `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastField {
    pub s: f64,
    pub values: Vec<f64>,
}

/// Values on the slow grid at slow time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowField {
    pub t: f64,
    pub values: Vec<f64>,
}
