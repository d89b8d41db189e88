use std::f64::consts::TAU;

use super::*;

fn small() -> Grids {
    Grids { ny: 16, nx: 16, nt: 11, n_fine: 64, horizon: 0.1 }
}

fn g(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * (1.0 + (TAU * y).cos())
}

#[test]
fn fast_independent_operator_converges_at_second_order() {
    let op = FullyNonlinearOp::heat(1);
    let flat = |x: f64, _: f64| (TAU * x).cos();
    let asm = bootstrap_run(&op, &flat, 2, 0, &small(), EffectiveMode::Linearized).unwrap();
    let mut errs = Vec::new();
    for ei in [4usize, 8] {
        let ev = Evaluator::new(&asm, ei);
        let steps = output_steps(ev.dt(), ev.stride(), 0.1, ev.layer_steps(), 4, 5);
        let direct = solve_eps_problem(&op, &flat, ei, &asm.layer.setup.fast, Variant::Scaled, &steps, 1e9).unwrap();
        errs.push(error_report(&direct, &ev, 0.5).unwrap());
    }
    assert!(errs[0].err_full < 2e-3, "{errs:?}");
    assert!(errs[0].err_full > 3.0 * errs[1].err_full, "{errs:?}");
}

#[test]
fn expansion_error_decreases_with_eps() {
    let op = FullyNonlinearOp::harmonic_1d();
    let asm = bootstrap_run(&op, &g, 2, 1, &small(), EffectiveMode::Linearized).unwrap();
    let mut errs = Vec::new();
    for ei in [4usize, 8] {
        let ev = Evaluator::new(&asm, ei);
        let steps = output_steps(ev.dt(), ev.stride(), 0.1, ev.layer_steps(), 4, 5);
        let direct = solve_eps_problem(&op, &g, ei, &asm.layer.setup.fast, Variant::Scaled, &steps, 1e9).unwrap();
        errs.push(error_report(&direct, &ev, 0.5).unwrap());
    }
    assert!(errs[1].err_interior < errs[0].err_interior, "{errs:?}");
    assert!(errs[1].err_full < errs[0].err_full, "{errs:?}");
}

#[test]
fn stage_one_data_follows_the_transfer_rule() {
    let op = FullyNonlinearOp::harmonic_1d();
    let asm = bootstrap_run(&op, &g, 2, 1, &small(), EffectiveMode::Linearized).unwrap();
    let lay = asm.interior_setup.layout(1);
    let st0 = &asm.interior[0];
    let gb = &asm.layer.stages[0].gbreve;
    // The stage-1 layer starts from g_{1,0}; its limit plus the snapshot at s = 0 reproduce it.
    let s1 = &asm.layer.stages[1];
    for i in 0..16 {
        for y in 0..16 {
            let want = gb[2][i] - st0.wtilde(&lay, 2, 0, i, 0, y);
            let got = s1.snapshots[0][0][i * 16 + y] + s1.gbreve[0][i];
            assert!((got - want).abs() < 1e-12);
        }
    }
}

#[test]
fn pucci_linear_degenerate_case() {
    let phi = |y: f64| 0.2 + (TAU * y).cos();
    let psi = |x: f64| 1.5 + (TAU * x).cos();
    let sgn = |x: f64| (TAU * x).sin();
    let r = pucci_gamma_example(1.0, 1.0, &phi, &psi, &sgn, 16, 16).unwrap();
    assert!((r.gamma_plus - 0.2).abs() < 1e-9 && (r.gamma_minus - 0.2).abs() < 1e-9);
    assert!(r.kinks.iter().all(|k| k.measured_jump < 1e-6));
}
