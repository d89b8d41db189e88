//! Randomized validators for ellipticity, concavity, periodicity, `F(0) = 0`
//! and the recession gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::symmat::SymMat;
use super::{FullyNonlinearOp, Pt};
use crate::error::{Error, Result};

/// Sampling ranges for the validators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_check: usize,
    pub p_range: f64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_check: 10_000, p_range: 10.0, seed: 7, tol: 1e-9 }
    }
}

/// Outcome of [`check_assumptions`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub lambda_hat: f64,
    pub cap_lambda_hat: f64,
    pub ellipticity_pass: bool,
    pub concavity_checked: bool,
    pub concavity_pass: bool,
    pub worst_concavity_violation: f64,
    pub periodicity_pass: bool,
    pub zero_at_zero_pass: bool,
    pub worst_sample: Option<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.ellipticity_pass && self.concavity_pass && self.periodicity_pass && self.zero_at_zero_pass
    }
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, r: f64) -> SymMat {
    if n == 1 {
        SymMat::scalar(rng.gen_range(-r..r))
    } else {
        SymMat::new2(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
    }
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, r: f64) -> SymMat {
    if n == 1 {
        return SymMat::scalar(rng.gen_range(0.0..r));
    }
    let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    // B Bᵀ with B = [[a, 0], [b, c]].
    let m = SymMat::new2(a * a, a * b, b * b + c * c);
    let scale = rng.gen_range(0.0..r) / m.norm().max(1e-12);
    scale * m
}

fn random_point(rng: &mut ChaCha8Rng, period: f64) -> Pt {
    Pt::new(
        rng.gen_range(0.0..period),
        rng.gen_range(0.0..1.0),
        [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
        rng.gen_range(0.0..1.0),
    )
}

/// Samples `(P, Q ≥ 0, x, t, y, s, ρ)` and measures the standing assumptions.
pub fn check_assumptions(op: &FullyNonlinearOp, cfg: &SamplerConfig) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut worst_conc = 0.0f64;
    let mut per_ok = true;
    let mut zero_ok = true;
    let mut worst: Option<(f64, String)> = None;
    let mut note = |score: f64, msg: String| {
        if worst.as_ref().is_none_or(|(w, _)| score > *w) {
            worst = Some((score, msg));
        }
    };
    for _ in 0..cfg.n_check {
        let p = random_sym(&mut rng, op.n, cfg.p_range);
        let q = random_psd(&mut rng, op.n, cfg.p_range);
        let pt = random_point(&mut rng, op.period);
        let rho: f64 = rng.gen_range(0.0..1.0);
        let fp = op.eval_unchecked(&p, &pt);
        let qn = q.norm();
        if qn > 1e-8 {
            let ratio = (op.eval_unchecked(&(p + q), &pt) - fp) / qn;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            if ratio < op.lambda - cfg.tol || ratio > op.cap_lambda + cfg.tol {
                note(1.0, format!("ellipticity ratio {ratio} at P={:?}, Q={:?}, {:?}", p.e, q.e, pt));
            }
        }
        if op.concave {
            let p2 = random_sym(&mut rng, op.n, cfg.p_range);
            let mix = op.eval_unchecked(&(rho * p + (1.0 - rho) * p2), &pt);
            let chord = rho * fp + (1.0 - rho) * op.eval_unchecked(&p2, &pt);
            let v = chord - mix;
            if v > worst_conc {
                worst_conc = v;
                if v > cfg.tol {
                    note(v, format!("concavity violation {v:e} at P={:?}, P'={:?}", p.e, p2.e));
                }
            }
        }
        let shifted = Pt::new(pt.x, pt.t, [pt.y[0] + 1.0, pt.y[1] + 1.0], pt.s + 1.0);
        let fs = op.eval_unchecked(&p, &shifted);
        if (fs - fp).abs() > 1e-10 * fp.abs().max(1.0) {
            per_ok = false;
            note(2.0, format!("periodicity defect {:e} at {:?}", (fs - fp).abs(), pt));
        }
        let f0 = op.eval_unchecked(&SymMat::zero(op.n), &pt);
        if f0.abs() > cfg.tol {
            zero_ok = false;
            note(3.0, format!("F(0) = {f0} at {pt:?}"));
        }
    }
    AssumptionReport {
        lambda_hat: lo,
        cap_lambda_hat: hi,
        ellipticity_pass: lo >= op.lambda - cfg.tol && hi <= op.cap_lambda + cfg.tol,
        concavity_checked: op.concave,
        concavity_pass: !op.concave || worst_conc <= cfg.tol,
        worst_concavity_violation: worst_conc,
        periodicity_pass: per_ok,
        zero_at_zero_pass: zero_ok,
        worst_sample: worst.map(|(_, m)| m),
    }
}

/// Outcome of [`recession_gap`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub delta: f64,
    pub declared_gap: f64,
    /// `sup |F(P) − F_*(P)| / ‖P‖^δ` over samples with `‖P‖ ≥ 1`.
    pub measured_gap: f64,
    /// `sup |ε²F(ε⁻²P) − F_*(P)| / (ε^{2−2δ}‖P‖^δ)` at the probe ε.
    pub rescaled_gap: f64,
    pub probe_eps: f64,
    pub pass: bool,
}

/// Measures the gap between an operator and its recession partner.
pub fn recession_gap(op: &FullyNonlinearOp, cfg: &SamplerConfig, probe_eps: f64) -> Result<GapReport> {
    let rec = op
        .recession
        .as_ref()
        .ok_or_else(|| Error::OperatorDefinition(format!("operator `{}` has no recession partner", op.name)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut gap = 0.0f64;
    let mut rescaled = 0.0f64;
    let e2 = probe_eps * probe_eps;
    for _ in 0..cfg.n_check {
        let mut p = random_sym(&mut rng, op.n, cfg.p_range);
        if p.norm() < 1.0 {
            p = (1.0 / p.norm().max(1e-3)) * p;
        }
        let pt = random_point(&mut rng, op.period);
        let fstar = rec.op.eval_unchecked(&p, &pt);
        let denom = p.norm().powf(rec.delta);
        gap = gap.max((op.eval_unchecked(&p, &pt) - fstar).abs() / denom);
        let fe = e2 * op.eval_unchecked(&((1.0 / e2) * p), &pt);
        rescaled = rescaled.max((fe - fstar).abs() / (probe_eps.powf(2.0 - 2.0 * rec.delta) * denom));
    }
    let tol = cfg.tol.max(1e-9);
    Ok(GapReport {
        delta: rec.delta,
        declared_gap: rec.gap,
        measured_gap: gap,
        rescaled_gap: rescaled,
        probe_eps,
        pass: gap <= rec.gap + tol && rescaled <= rec.gap + tol,
    })
}
