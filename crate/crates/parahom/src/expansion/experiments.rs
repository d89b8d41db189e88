//! Rate sweeps and the Pucci example.

use serde::{Deserialize, Serialize};

use super::{
    bootstrap_run, error_report, output_steps, sample_slow_fast, solve_eps_problem, ExpansionAssembly, Evaluator,
    Grids, RateReport, RateRow, Variant,
};
use crate::cell::{effective_operator_table, stretched_axis, EffectiveOperatorTable};
use crate::error::{Error, Result};
use crate::initial_layer::{solve_base_layer, LayerSetup};
use crate::interior::{effective_zeroth, slow_interp, EffectiveMode, InteriorSetup};
use crate::operator::FullyNonlinearOp;
use crate::pde_core::{PeriodicDiff, SlowGrid, TorusGrid};

/// Scaled-problem rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremSpec {
    pub m: usize,
    pub d_max: usize,
    /// `1/ε` values, increasing.
    pub eps_inv: Vec<usize>,
    pub grids: Grids,
    pub c_window: f64,
    pub margin: f64,
    pub variant: Variant,
    pub budget: f64,
}

impl TheoremSpec {
    pub fn new(m: usize, eps_inv: Vec<usize>) -> Self {
        TheoremSpec {
            m,
            d_max: 1.min(m / 2),
            eps_inv,
            grids: Grids::default(),
            c_window: 2.0,
            margin: 0.3,
            variant: Variant::Scaled,
            budget: 1e10,
        }
    }
}

/// Error of the assembled expansion against direct solves for each ε;
/// the target order is `m − 1`.
pub fn theorem_rate(
    op: &FullyNonlinearOp,
    g: &(dyn Fn(f64, f64) -> f64 + Sync),
    spec: &TheoremSpec,
) -> Result<(RateReport, ExpansionAssembly)> {
    if spec.variant == Variant::Unscaled {
        return Err(Error::config("pipeline.variant", "the theorem sweep uses the scaled problem"));
    }
    let gbar;
    let data: &(dyn Fn(f64, f64) -> f64 + Sync) = if spec.variant == Variant::NonOscillatory {
        let ny = spec.grids.ny;
        gbar = move |x: f64, _y: f64| (0..ny).map(|y| g(x, y as f64 / ny as f64)).sum::<f64>() / ny as f64;
        &gbar
    } else {
        g
    };
    let asm = bootstrap_run(op, data, spec.m, spec.d_max, &spec.grids, EffectiveMode::Linearized)?;
    let mut rows = Vec::new();
    for &ei in &spec.eps_inv {
        let ev = Evaluator::new(&asm, ei);
        let steps = output_steps(ev.dt(), ev.stride(), spec.grids.horizon, ev.layer_steps(), 2, 20);
        let direct = solve_eps_problem(op, data, ei, &asm.layer.setup.fast, spec.variant, &steps, spec.budget)?;
        rows.push(error_report(&direct, &ev, spec.c_window)?);
    }
    let target = spec.m as f64 - 1.0;
    let label = match spec.variant {
        Variant::NonOscillatory => format!("nonosc_m{}", spec.m),
        _ => format!("theorem_m{}", spec.m),
    };
    let mut rep = RateReport::new(&label, target, spec.margin, spec.c_window, rows, true)?;
    rep.notes.extend(asm.notes.iter().cloned());
    rep.notes.push(format!("bootstrap depth d_max = {}", spec.d_max));
    Ok((rep, asm))
}

/// Unscaled-problem sweep against the effective solution of `F̄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecessionSpec {
    pub eps_inv: Vec<usize>,
    pub grids: Grids,
    pub table_points: usize,
    pub table_stretch: f64,
    pub c_window: f64,
    pub margin: f64,
    pub budget: f64,
}

impl RecessionSpec {
    pub fn new(eps_inv: Vec<usize>) -> Self {
        RecessionSpec {
            eps_inv,
            grids: Grids { ny: 32, ..Grids::default() },
            table_points: 1001,
            table_stretch: 4.0,
            c_window: 2.0,
            margin: 0.3,
            budget: 1e10,
        }
    }
}

/// `sup |u^ε − ū|` over `t ≥ c ε² |log ε|` for the unscaled problem; the layer
/// runs with the recession operator and `ū` with the tabulated `F̄` of `F`.
/// The target order is `min(1, 2 − 2δ)`.
pub fn recession_experiment(
    op: &FullyNonlinearOp,
    g: &(dyn Fn(f64, f64) -> f64 + Sync),
    spec: &RecessionSpec,
) -> Result<(RateReport, EffectiveOperatorTable)> {
    let partner = op
        .recession
        .as_ref()
        .ok_or_else(|| Error::config("operator.recession", "operator has no recession partner"))?;
    let fstar = &*partner.op;
    let gr = &spec.grids;
    let slow = SlowGrid::new(gr.nx, op.period, gr.horizon)?;
    let lsetup = LayerSetup::new(fstar, gr.ny, slow.clone(), vec![0.0])?;
    let base = solve_base_layer(fstar, &lsetup, sample_slow_fast(g, &slow, gr.ny))?;
    let gb = base.gbreve[0][..gr.nx].to_vec();
    let curv = PeriodicDiff::new(2, 8, slow.dx()).apply(&gb);
    let pmax = 1.5 * curv.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let fast = TorusGrid::for_ellipticity(1, gr.ny, op.cap_lambda)?;
    let dep = op.dependence();
    let x_nodes = if dep.x { slow.xs() } else { vec![0.0] };
    let isetup = InteriorSetup::new(fast.clone(), slow.clone(), gr.nt, gr.n_fine)?;
    let t_nodes = if dep.t { isetup.t_grid.clone() } else { vec![0.0] };
    let axis = stretched_axis(pmax, spec.table_points, spec.table_stretch);
    let table = effective_operator_table(op, &fast, vec![axis], x_nodes, t_nodes, &isetup.cell)?;
    if !table.failures.is_empty() {
        return Err(Error::solver("cell table", table.failures.join("; ")));
    }
    let ubar = effective_zeroth(op, &isetup, EffectiveMode::Nonlinear(&table), &gb)?;
    let mut rows = Vec::new();
    for &ei in &spec.eps_inv {
        let eps = 1.0 / ei as f64;
        let dt = eps * eps * fast.ds();
        let steps = output_steps(dt, 1, gr.horizon, 0, 1, 20);
        let direct = solve_eps_problem(op, g, ei, &fast, Variant::Unscaled, &steps, spec.budget)?;
        let t0 = spec.c_window * eps * eps * eps.ln().abs();
        let (mut full, mut inner) = (0.0f64, f64::NAN);
        for (n, u) in &direct.rows {
            let t = *n as f64 * dt;
            let mut e = 0.0f64;
            for (p, v) in u.iter().enumerate() {
                let x = p as f64 * slow.period / direct.nx_fine as f64;
                e = e.max((v - slow_interp(&ubar, &isetup, x, t.min(gr.horizon))).abs());
            }
            full = full.max(e);
            if t >= t0 {
                inner = if inner.is_nan() { e } else { inner.max(e) };
            }
        }
        rows.push(RateRow { eps, err_full: full, err_interior: inner });
    }
    let delta = partner.delta;
    let target = 1f64.min(2.0 - 2.0 * delta);
    let mut rep = RateReport::new(&format!("recession_delta{delta}"), target, spec.margin, spec.c_window, rows, false)?;
    rep.notes.push(format!("layer operator: {}; F̄ table over [−{pmax:.3}, {pmax:.3}]", fstar.name));
    Ok((rep, table))
}

/// One sign change of `ψ` and the slope jump of `v̄` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinkReport {
    pub x: f64,
    pub measured_jump: f64,
    pub predicted_jump: f64,
    pub relative_error: f64,
}

/// Scalar-flow constants of Pucci's minimal operator and the kink of the
/// effective datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PucciReport {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// `max |ğ₀ − γ₋ψ|` for the positive profile.
    pub positive_error: f64,
    /// `max |ğ₀ − v̄|` for the sign-changing profile.
    pub reconstruction_error: f64,
    pub kinks: Vec<KinkReport>,
    pub gbreve: Vec<f64>,
    pub vbar: Vec<f64>,
}

fn layer_limit(op: &FullyNonlinearOp, slow: &SlowGrid, ny: usize, g: &dyn Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let setup = LayerSetup::new(op, ny, slow.clone(), vec![0.0])?;
    let st = solve_base_layer(op, &setup, sample_slow_fast(g, slow, ny))?;
    Ok(st.gbreve[0][..slow.nx].to_vec())
}

/// `γ_±` from the flows of `M^±` started at `φ`, the effective datum for a
/// positive `ψ` and for a sign-changing `ψ`, and the slope jumps at the zeros.
pub fn pucci_gamma_example(
    lo: f64,
    hi: f64,
    phi: &dyn Fn(f64) -> f64,
    psi_positive: &dyn Fn(f64) -> f64,
    psi_signed: &dyn Fn(f64) -> f64,
    ny: usize,
    nx: usize,
) -> Result<PucciReport> {
    let minus = FullyNonlinearOp::pucci_minus(1, lo, hi)?;
    let plus = FullyNonlinearOp::pucci_plus(1, lo, hi)?;
    let slow = SlowGrid::new(nx, 1.0, 1.0)?;
    let flat = |_: f64, y: f64| phi(y);
    let gamma_minus = layer_limit(&minus, &slow, ny, &flat)?[0];
    let gamma_plus = layer_limit(&plus, &slow, ny, &flat)?[0];
    if gamma_plus < gamma_minus - 1e-12 {
        return Err(Error::Consistency(format!("γ₊ = {gamma_plus} below γ₋ = {gamma_minus}")));
    }
    let pos = layer_limit(&minus, &slow, ny, &|x, y| psi_positive(x) * phi(y))?;
    let positive_error =
        (0..nx).map(|i| (pos[i] - gamma_minus * psi_positive(slow.x(i))).abs()).fold(0.0, f64::max);
    let gbreve = layer_limit(&minus, &slow, ny, &|x, y| psi_signed(x) * phi(y))?;
    let vbar: Vec<f64> = (0..nx)
        .map(|i| {
            let p = psi_signed(slow.x(i));
            if p >= 0.0 {
                gamma_minus * p
            } else {
                gamma_plus * p
            }
        })
        .collect();
    let reconstruction_error = gbreve.iter().zip(&vbar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let h = slow.dx();
    let at = |i: i64| gbreve[i.rem_euclid(nx as i64) as usize];
    let mut kinks = Vec::new();
    for i in 0..nx {
        let x = slow.x(i);
        if psi_signed(x).abs() > 1e-12 {
            continue;
        }
        let i = i as i64;
        let right = (-3.0 * at(i) + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * h);
        let left = (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h);
        let dpsi = (psi_signed(x + 1e-6) - psi_signed(x - 1e-6)) / 2e-6;
        let measured = (right - left).abs();
        let predicted = (gamma_plus - gamma_minus) * dpsi.abs();
        let relative_error = if predicted > 0.0 { (measured - predicted).abs() / predicted } else { measured };
        kinks.push(KinkReport { x, measured_jump: measured, predicted_jump: predicted, relative_error });
    }
    Ok(PucciReport { gamma_plus, gamma_minus, positive_error, reconstruction_error, kinks, gbreve, vbar })
}
