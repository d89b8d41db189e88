//! Error windows, rate fits and rate reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde_core::linear_fit;

/// Sup errors of one ε row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    /// Over every sampled time, layer terms included.
    pub err_full: f64,
    /// Over `t ≥ c ε² |log ε|`, layer terms dropped.
    pub err_interior: f64,
}

/// Least-squares order of `log err` against `log ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// Every error vanished.
    pub exact: bool,
    pub pass: bool,
}

/// Fits the order and passes when `slope ≥ target − margin`.
pub fn rate_fit(eps: &[f64], errs: &[f64], target: f64, margin: f64) -> Result<RateFit> {
    if eps.len() < 3 || eps.len() != errs.len() {
        return Err(Error::config("pipeline.epsilons", "rate fit needs at least three ε values"));
    }
    if errs.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Tolerance("non-finite error in rate fit".into()));
    }
    if errs.iter().all(|e| *e == 0.0) {
        return Ok(RateFit { slope: f64::INFINITY, exact: true, pass: true });
    }
    let floor = f64::MIN_POSITIVE;
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.max(floor).ln()).collect();
    let (_, slope, _) = linear_fit(&lx, &ly);
    Ok(RateFit { slope, exact: false, pass: slope >= target - margin })
}

/// Rate report of one ε sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub label: String,
    pub target: f64,
    pub margin: f64,
    pub c_window: f64,
    pub rows: Vec<RateRow>,
    pub fit_full: Option<RateFit>,
    pub fit_interior: RateFit,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn new(label: &str, target: f64, margin: f64, c_window: f64, rows: Vec<RateRow>, with_full: bool) -> Result<Self> {
        if rows.windows(2).any(|w| w[1].eps >= w[0].eps) {
            return Err(Error::config("pipeline.epsilons", "ε list must be strictly decreasing"));
        }
        if let Some(r) = rows.iter().find(|r| r.err_interior.is_nan()) {
            return Err(Error::config(
                "pipeline.c_window",
                format!("no output time in the interior window for ε = {}", r.eps),
            ));
        }
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let ei: Vec<f64> = rows.iter().map(|r| r.err_interior).collect();
        let fit_interior = rate_fit(&eps, &ei, target, margin)?;
        let fit_full = if with_full {
            let ef: Vec<f64> = rows.iter().map(|r| r.err_full).collect();
            Some(rate_fit(&eps, &ef, target, margin)?)
        } else {
            None
        };
        Ok(RateReport {
            label: label.into(),
            target,
            margin,
            c_window,
            rows,
            fit_full,
            fit_interior,
            notes: vec!["sup norms are maxima over the periodic slow grid".into()],
        })
    }

    pub fn pass(&self) -> bool {
        self.fit_interior.pass && self.fit_full.as_ref().is_none_or(|f| f.pass)
    }

    /// Columns `eps,err_full,err_interior,target,slope_full,slope_interior`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,err_full,err_interior,target,slope_full,slope_interior\n");
        let sf = self.fit_full.as_ref().map_or(f64::NAN, |f| f.slope);
        for r in &self.rows {
            s.push_str(&format!(
                "{:e},{:e},{:e},{},{},{}\n",
                r.eps, r.err_full, r.err_interior, self.target, sf, self.fit_interior.slope
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column `log ε, log err` data for the interior window.
    pub fn plot_data(&self) -> String {
        let mut s = String::from("# log_eps log_err_interior\n");
        for r in &self.rows {
            s.push_str(&format!("{} {}\n", r.eps.ln(), r.err_interior.ln()));
        }
        s
    }

    /// Parses the CSV written by [`RateReport::to_csv`] back into rows.
    pub fn rows_from_csv(csv: &str) -> Result<(Vec<RateRow>, f64)> {
        let mut rows = Vec::new();
        let mut target = f64::NAN;
        for (ln, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64> {
                f.get(k)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::config(format!("rates.csv:{}", ln + 1), "malformed row"))
            };
            rows.push(RateRow { eps: num(0)?, err_full: num(1)?, err_interior: num(2)? });
            target = num(3)?;
        }
        Ok((rows, target))
    }
}

/// Output steps for an ε run: every `layer_every`-th snapshot of the layer
/// phase up to `layer_steps`, then `count` roughly uniform times up to `horizon`,
/// all multiples of `stride`.
pub fn output_steps(dt: f64, stride: usize, horizon: f64, layer_steps: usize, layer_every: usize, count: usize) -> Vec<usize> {
    let max_chunks = ((horizon / dt) * (1.0 + 1e-12)).floor() as usize / stride;
    let mut out: Vec<usize> = (0..=layer_steps / stride)
        .step_by(layer_every.max(1))
        .filter(|&j| j <= max_chunks)
        .map(|j| j * stride)
        .collect();
    for q in 1..=count {
        let t = horizon * q as f64 / count as f64;
        let j = ((t / dt / stride as f64).round() as usize).min(max_chunks);
        out.push(j * stride);
    }
    out.sort_unstable();
    out.dedup();
    out
}
