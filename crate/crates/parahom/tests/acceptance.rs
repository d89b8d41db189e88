//! Acceptance criteria 1 to 11; one line per criterion, non-zero exit on failure.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use parahom::cell::{
    effective_operator_table, ergodic_constant, ergodic_constant_lattice, matrix_corrector,
    uniform_axis, CellConfig, CellMethod,
};
use parahom::expansion::{
    bootstrap_run, pucci_gamma_example, recession_experiment, sample_slow_fast, theorem_rate, RateReport,
    RecessionSpec, TheoremSpec, Variant,
};
use parahom::harness::{run, ExperimentConfig};
use parahom::initial_layer::{solve_base_layer, LayerSetup};
use parahom::interior::EffectiveMode;
use parahom::operator::{Coef, FourierMode, FourierSeries, FrozenOp, FullyNonlinearOp, SymField, SymMat};
use parahom::pde_core::{decay_fit, monotone_step, FastField, SlowGrid, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn harmonic_g(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * (1.0 + (TAU * y).cos())
}

fn c1_oracle() -> Outcome {
    let op = FullyNonlinearOp::harmonic_1d();
    let grid = TorusGrid::for_ellipticity(1, 64, op.cap_lambda).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for p in [-2.0, -1.0, 1.0, 2.0] {
        let s = ergodic_constant(&op, &grid, &SymMat::scalar(p), 0.0, 0.0, CellMethod::LongTimeSlope, &CellConfig::default())
            .map_err(|e| e.to_string())?;
        worst = worst.max((s.gamma - p / 2.0).abs());
    }
    Ok((worst <= 1e-3, format!("max |F̄(p) − p/2| = {worst:.2e}")))
}

fn random_coef(rng: &mut ChaCha8Rng) -> Coef {
    let mean = rng.gen_range(1.0..2.0);
    let modes = (1..=2)
        .map(|k| FourierMode::y(k, rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25)))
        .collect();
    Coef::Fourier(FourierSeries::with_modes(mean, modes))
}

fn random_concave(rng: &mut ChaCha8Rng) -> FullyNonlinearOp {
    let members = (0..rng.gen_range(2..=3)).map(|_| SymField::scalar(random_coef(rng))).collect();
    let mu = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.05..0.3) };
    FullyNonlinearOp::hjb_min(members, mu).expect("positive members")
}

fn c2_methods() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = CellConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let op = random_concave(&mut rng);
        let grid = TorusGrid::for_ellipticity(1, 16, op.cap_lambda).map_err(|e| e.to_string())?;
        let frozen = FrozenOp::new(&op, 0.0, 0.0, &grid);
        for _ in 0..5 {
            let p = SymMat::scalar(rng.gen_range(-3.0..3.0));
            let a = ergodic_constant_lattice(&frozen, &p, CellMethod::LongTimeSlope, &cfg).map_err(|e| e.to_string())?;
            let b = ergodic_constant_lattice(&frozen, &p, CellMethod::Penalization, &cfg).map_err(|e| e.to_string())?;
            worst = worst.max((a.gamma - b.gamma).abs());
        }
    }
    Ok((worst <= 1e-4, format!("max |γ_slope − γ_penal| = {worst:.2e} over 100 samples")))
}

fn c3_structure() -> Outcome {
    let cfg = CellConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ops = vec![
        FullyNonlinearOp::harmonic_1d(),
        random_concave(&mut rng),
        FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap(),
        FullyNonlinearOp::pucci_minus(2, 1.0, 2.0).unwrap(),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for op in &ops {
        let (ny, axes) = if op.n == 1 {
            (16, vec![uniform_axis(3.0, 25)])
        } else {
            let a = uniform_axis(1.0, 5);
            (4, vec![a.clone(), a.clone(), a])
        };
        let grid = TorusGrid::for_ellipticity(op.n, ny, op.cap_lambda).map_err(|e| e.to_string())?;
        let mut t = effective_operator_table(op, &grid, axes, vec![0.0], vec![0.0], &cfg).map_err(|e| e.to_string())?;
        let r = t.validate(1e-3, 1e-6, 1000, 11);
        ok &= t.failures.is_empty() && r.ellipticity_ok && r.concavity_ok;
        parts.push(format!("{}: slopes [{:.3}, {:.3}], concavity {:.1e}", op.name, r.min_slope, r.max_slope, r.max_concavity_violation));
    }
    Ok((ok, parts.join("; ")))
}

fn base_decay(op: &FullyNonlinearOp) -> Result<parahom::pde_core::DecayFit, String> {
    let slow = SlowGrid::new(8, 1.0, 1.0).map_err(|e| e.to_string())?;
    let setup = LayerSetup::new(op, 64, slow.clone(), vec![0.0]).map_err(|e| e.to_string())?;
    let g = |_: f64, y: f64| (TAU * y).cos();
    let st = solve_base_layer(op, &setup, sample_slow_fast(&g, &slow, 64)).map_err(|e| e.to_string())?;
    st.fits[0].clone().ok_or_else(|| "no decay fit".to_string())
}

fn c4_decay() -> Outcome {
    let heat = base_decay(&FullyNonlinearOp::heat(1))?;
    let pucci = base_decay(&FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap())?;
    let b = 4.0 * PI * PI;
    let ok = (heat.rate / b - 1.0).abs() <= 0.05
        && pucci.rate >= b * (1.0 - 1e-3)
        && pucci.rate <= 2.0 * b * (1.0 + 1e-3)
        && heat.residual <= 0.05
        && pucci.residual <= 0.05;
    Ok((
        ok,
        format!(
            "heat β̂ = {:.3} (4π² = {b:.3}, residual {:.1e}); pucci_minus(1,2) β̂ = {:.3} (residual {:.1e})",
            heat.rate, heat.residual, pucci.rate, pucci.residual
        ),
    ))
}

fn rate_line(rep: &RateReport, floor: f64) -> (bool, String) {
    let full = rep.fit_full.as_ref().map(|f| f.slope);
    let ok = rep.fit_interior.slope >= floor && full.is_none_or(|s| s >= floor);
    let errs: Vec<String> = rep.rows.iter().map(|r| format!("{:.2e}", r.err_interior)).collect();
    let full = full.map_or(String::new(), |s| format!(", full slope {s:.3}"));
    (ok, format!("interior slope {:.3}{full}; interior errors [{}]", rep.fit_interior.slope, errs.join(", ")))
}

fn theorem(m: usize, variant: Variant) -> Result<RateReport, String> {
    let op = FullyNonlinearOp::harmonic_1d();
    let mut spec = TheoremSpec::new(m, vec![8, 16, 32]);
    spec.variant = variant;
    theorem_rate(&op, &harmonic_g, &spec).map(|r| r.0).map_err(|e| e.to_string())
}

fn c5_rate_m2() -> Outcome {
    Ok(rate_line(&theorem(2, Variant::Scaled)?, 0.7))
}

fn c6_rate_m3() -> Outcome {
    let rep = theorem(3, Variant::Scaled)?;
    Ok(rate_line(&RateReport { fit_full: None, ..rep }, 1.5))
}

fn hjb_pair() -> FullyNonlinearOp {
    let a1 = Coef::Fourier(FourierSeries::with_modes(1.0, vec![FourierMode::y(1, 0.3, 0.0)]));
    FullyNonlinearOp::hjb_min(vec![SymField::scalar(a1), SymField::scalar(Coef::Const(1.5))], 0.2).unwrap()
}

fn c7_coupling() -> Outcome {
    let grids = parahom::expansion::Grids { ny: 32, nx: 32, nt: 11, n_fine: 128, horizon: 0.1 };
    let asm = bootstrap_run(&hjb_pair(), &harmonic_g, 2, 1, &grids, EffectiveMode::Linearized).map_err(|e| e.to_string())?;
    let st = asm.layer.stages.get(1).ok_or("no stage-1 layer")?;
    let mut peak = 0.0f64;
    let mut min_rate = f64::INFINITY;
    for lvl in &st.coupling {
        peak = lvl.iter().fold(peak, |m, &(_, v)| m.max(v));
        let fit = decay_fit(lvl).map_err(|e| e.to_string())?;
        min_rate = min_rate.min(fit.rate);
    }
    let lin = bootstrap_run(&FullyNonlinearOp::harmonic_1d(), &harmonic_g, 2, 1, &grids, EffectiveMode::Linearized)
        .map_err(|e| e.to_string())?;
    let lin_max = lin.layer.stages[1].coupling.iter().flatten().fold(0.0f64, |m, &(_, v)| m.max(v));
    let ok = peak > 1e-6 && min_rate > 0.0 && lin_max == 0.0;
    Ok((ok, format!("hjb_min peak sup|f₁| = {peak:.3e}, slowest fitted decay {min_rate:.3}; linear max {lin_max:e}")))
}

fn c8_nonosc() -> Outcome {
    Ok(rate_line(&theorem(2, Variant::NonOscillatory)?, 0.7))
}

fn c9_recession() -> Outcome {
    let mut slopes = Vec::new();
    let mut ok = true;
    for delta in [0.0, 0.75] {
        let op = FullyNonlinearOp::recession_perturbed(FullyNonlinearOp::harmonic_1d(), Coef::Const(0.3), delta, 1.0)
            .map_err(|e| e.to_string())?;
        let spec = RecessionSpec::new(vec![8, 16, 32]);
        let (rep, _) = recession_experiment(&op, &harmonic_g, &spec).map_err(|e| e.to_string())?;
        ok &= (rep.fit_interior.slope - rep.target).abs() <= 0.3;
        slopes.push((delta, rep.fit_interior.slope, rep.target));
    }
    ok &= slopes[1].1 < slopes[0].1;
    let s: Vec<String> = slopes.iter().map(|(d, s, t)| format!("δ = {d}: slope {s:.3} (target {t})")).collect();
    Ok((ok, s.join("; ")))
}

fn c10_pucci() -> Outcome {
    let phi = |y: f64| (TAU * y).cos();
    let pos = |x: f64| 1.5 + (TAU * x).cos();
    let sgn = |x: f64| (TAU * x).sin();
    let r = pucci_gamma_example(1.0, 2.0, &phi, &pos, &sgn, 64, 64).map_err(|e| e.to_string())?;
    let worst_kink = r.kinks.iter().map(|k| k.relative_error).fold(0.0, f64::max);
    let ok = r.gamma_plus - r.gamma_minus > 1e-3 && r.positive_error <= 1e-3 && !r.kinks.is_empty() && worst_kink <= 0.2;
    Ok((
        ok,
        format!(
            "γ₊ − γ₋ = {:.4}; ψ ≥ 0 error {:.1e}; kink jump relative error {:.3} at {} zero(s)",
            r.gamma_plus - r.gamma_minus,
            r.positive_error,
            worst_kink,
            r.kinks.len()
        ),
    ))
}

fn c11_invariants() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let grids = parahom::expansion::Grids { ny: 32, nx: 32, nt: 11, n_fine: 128, horizon: 0.1 };
    let asm = bootstrap_run(&hjb_pair(), &harmonic_g, 2, 1, &grids, EffectiveMode::Linearized).map_err(|e| e.to_string())?;
    let st = &asm.interior[0];
    let lay = asm.interior_setup.layout(st.phases);
    let osc = st.fast_oscillation(&lay, 0).max(st.fast_oscillation(&lay, 1));
    ok &= osc == 0.0;
    let mut pin = 0.0f64;
    for (k, gb) in asm.layer.stages[0].gbreve.iter().enumerate().take(st.levels) {
        if !gb.is_empty() {
            pin = pin.max(st.pinning_error(&lay, k, &gb[..grids.nx]));
        }
    }
    ok &= pin <= 1e-10;
    notes.push(format!("w̃₀/w̃₁ oscillation {osc:e}, pinning {pin:.1e}"));

    let cfg = CellConfig::default();
    let op = FullyNonlinearOp::harmonic_1d();
    let grid = TorusGrid::for_ellipticity(1, 32, op.cap_lambda).unwrap();
    let w = ergodic_constant(&op, &grid, &SymMat::scalar(1.0), 0.0, 0.0, CellMethod::Penalization, &cfg)
        .map_err(|e| e.to_string())?;
    let mc = matrix_corrector(&op, &grid, 0.0, 0.0, &cfg).map_err(|e| e.to_string())?;
    let norm_ok = w.corrector[0].values[0] == 0.0 && mc.chi.iter().all(|c| c[0] == 0.0);
    ok &= norm_ok;
    notes.push(format!("w(0,0) = χ(0,0) = 0: {norm_ok}"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for pair in 0..100 {
        let op = if pair % 2 == 0 { random_concave(&mut rng) } else { FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap() };
        let grid = TorusGrid::for_ellipticity(1, 16, op.cap_lambda).unwrap();
        let u: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();
        let a = monotone_step(&op, &grid, &FastField { s: 0.0, values: u }, 0.0, 0.0, None).map_err(|e| e.to_string())?;
        let b = monotone_step(&op, &grid, &FastField { s: 0.0, values: v }, 0.0, 0.0, None).map_err(|e| e.to_string())?;
        violations += a.values.iter().zip(&b.values).filter(|(x, y)| x > y).count();
    }
    ok &= violations == 0;
    notes.push(format!("comparison violations {violations}/100 pairs"));

    let doc = r#"{"operator": {"base": {"family": "pucci_minus", "lo": 1.0, "hi": 2.0}},
                  "grids": {"ny": 16, "nx": 16}, "pipeline": {"kind": "layer_only"}}"#;
    let c = ExperimentConfig::from_json(doc).map_err(|e| e.to_string())?;
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = run(&c, d1.path()).map_err(|e| e.to_string())?;
    let m2 = run(&c, d2.path()).map_err(|e| e.to_string())?;
    let same = m1.artifacts == m2.artifacts && m1.pass == m2.pass;
    ok &= same;
    notes.push(format!("re-run artifacts identical: {same}"));
    Ok((ok, notes.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("effective-operator oracle", c1_oracle),
        ("method agreement", c2_methods),
        ("F̄ structure", c3_structure),
        ("oscillation decay", c4_decay),
        ("rate at m = 2", c5_rate_m2),
        ("rate at m = 3", c6_rate_m3),
        ("nonlinear coupling", c7_coupling),
        ("non-oscillatory variant", c8_nonosc),
        ("recession rate", c9_recession),
        ("Pucci example", c10_pucci),
        ("structural invariants", c11_invariants),
    ];
    let only: Vec<usize> = std::env::var("PARAHOM_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} [{}] {name}: {detail} ({:.1} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
