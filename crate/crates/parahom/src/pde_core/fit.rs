//! Oscillation measurement and exponential decay fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max − min` over all entries.
pub fn oscillation(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Fit `osc(s) ≈ C e^{−β s}` over the window `[s_a, s_b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `f64::INFINITY` when every sample has zero oscillation.
    pub rate: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of `log osc`.
    pub residual: f64,
    pub window: [f64; 2],
}

impl DecayFit {
    pub fn exact_zero() -> Self {
        DecayFit { rate: f64::INFINITY, prefactor: 0.0, residual: 0.0, window: [0.0, 0.0] }
    }
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let res = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, res)
}

/// Least-squares fit of `log osc` against `s`.
///
/// The window starts where the oscillation first falls to a tenth of its
/// peak after that peak and ends before it reaches the round-off floor.
pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.iter().all(|&(_, o)| o == 0.0) {
        return Ok(DecayFit::exact_zero());
    }
    let (peak, osc0) = samples
        .iter()
        .enumerate()
        .fold((0, 0.0), |(i, m), (j, p)| if p.1 > m { (j, p.1) } else { (i, m) });
    let floor = (10.0 * f64::EPSILON).max(1e-11 * osc0);
    let start = peak + samples[peak..].iter().position(|&(_, o)| o <= osc0 / 10.0).unwrap_or(0);
    let window: Vec<(f64, f64)> = samples[start..].iter().copied().take_while(|&(_, o)| o > floor).collect();
    if window.len() < 5 {
        return Err(Error::Tolerance(format!(
            "decay fit needs 5 samples above the floor, have {} of {}",
            window.len(),
            samples.len()
        )));
    }
    let s: Vec<f64> = window.iter().map(|p| p.0).collect();
    let l: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let (a, b, res) = linear_fit(&s, &l);
    Ok(DecayFit { rate: -b, prefactor: a.exp(), residual: res, window: [s[0], *s.last().unwrap()] })
}
