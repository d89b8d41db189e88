use std::f64::consts::TAU;

use super::*;
use crate::operator::{Coef, FourierMode, FourierSeries, SymField};

fn setup(op: &FullyNonlinearOp, nx: usize, ny: usize) -> LayerSetup {
    let slow = SlowGrid::new(nx, 1.0, 0.1).unwrap();
    LayerSetup::new(op, ny, slow, vec![0.0]).unwrap()
}

fn field(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for y in 0..ny {
            out.push(f(i as f64 / nx as f64, y as f64 / ny as f64));
        }
    }
    out
}

#[test]
fn zero_mean_mode_has_zero_limit_and_heat_rate() {
    let op = FullyNonlinearOp::heat(1);
    let (nx, ny) = (8, 16);
    let st = setup(&op, nx, ny);
    let g = field(nx, ny, |x, y| (1.5 + (TAU * x).cos()) * (TAU * y).cos());
    let base = solve_base_layer(&op, &st, g).unwrap();
    assert!(base.gbreve[0].iter().all(|v| v.abs() < 1e-9));
    let dy = 1.0 / ny as f64;
    let mu = 4.0 * (std::f64::consts::PI * dy).sin().powi(2) / (dy * dy);
    let ds = st.fast.ds();
    let discrete = -(1.0 - ds * mu).ln() / ds;
    let fit = base.fits[0].as_ref().unwrap();
    assert!((fit.rate - discrete).abs() < 1e-3 * discrete, "{} vs {discrete}", fit.rate);
    assert!(fit.residual < 0.05);
}

#[test]
fn heat_preserves_the_mean() {
    let op = FullyNonlinearOp::heat(1);
    let (nx, ny) = (8, 16);
    let st = setup(&op, nx, ny);
    let g = field(nx, ny, |x, y| (TAU * x).sin() + (TAU * y).cos());
    let base = solve_base_layer(&op, &st, g).unwrap();
    for i in 0..nx {
        let want = (TAU * i as f64 / nx as f64).sin();
        assert!((base.gbreve[0][i] - want).abs() < 1e-9);
        assert!((base.gbreve[0][i] - base.gbreve_y0[0][i]).abs() < 1e-6);
    }
    let last = base.snapshots.last().unwrap();
    assert!(last[0].iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn first_level_matches_closed_form() {
    let op = FullyNonlinearOp::heat(1);
    let (nx, ny) = (16, 16);
    let st = setup(&op, nx, ny);
    let g = field(nx, ny, |x, y| (TAU * x).sin() * (1.0 + (TAU * y).cos()));
    let data = vec![StageData::base(g)];
    let stage = build_stage(&op, &st, &data, &[], 2).unwrap();
    assert!(stage.gbreve[1].iter().all(|v| v.abs() < 1e-9));
    let dy = 1.0 / ny as f64;
    let mu = 4.0 * (std::f64::consts::PI * dy).sin().powi(2) / (dy * dy);
    let c = 2.0 * (TAU * dy).sin() / dy;
    let lay = st.layout();
    let ds = st.fast.ds();
    for j in [4usize, 16, 32] {
        let s = (j * stage.stride) as f64 * ds;
        let amp = -c * s * (-mu * s).exp();
        for i in [0usize, 3] {
            let dpsi = TAU * (TAU * i as f64 / nx as f64).cos();
            for y in [1usize, 5] {
                let want = dpsi * amp * (TAU * y as f64 * dy).sin();
                let got = stage.value(j, 1, &lay, 0, i, y);
                assert!((got - want).abs() < 2e-2 * c * dpsi.abs().max(1.0) * 0.4, "s={s} got {got} want {want}");
            }
        }
    }
}

#[test]
fn taylor_source_second_order_matches_path_derivative() {
    let f = |p: f64| -(-p).exp() + 0.3 * p;
    let v = [0.4, -0.7, 1.3];
    let d = [f(v[0]), -(-v[0]).exp() * -1.0 + 0.3, -(-v[0]).exp()];
    let derivs = [f(v[0]), (-v[0]).exp() + 0.3, -(-v[0]).exp()];
    assert!((d[1] - derivs[1]).abs() < 1e-15);
    let phi2 = taylor_source_phi(&derivs, f(0.0), &v, 2).unwrap();
    let h = 1e-3;
    let path = |s: f64| f(v[0] + s * v[1] + s * s * v[2]);
    let fd = (path(h) - 2.0 * path(0.0) + path(-h)) / (2.0 * h * h);
    assert!((phi2 - fd).abs() < 1e-5, "{phi2} vs {fd}");
    assert_eq!(taylor_source_phi(&derivs, f(0.0), &[v[0]], 0).unwrap(), f(v[0]) - f(0.0));
    assert!(taylor_source_phi(&derivs, 0.0, &v, 3).is_err());
}

#[test]
fn x_independent_data_gives_zero_first_level() {
    let op = FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap();
    let (nx, ny) = (8, 16);
    let st = setup(&op, nx, ny);
    let g = field(nx, ny, |_, y| (TAU * y).cos());
    let stage = build_stage(&op, &st, &[StageData::base(g)], &[], 2).unwrap();
    assert!(stage.gbreve[1].iter().all(|v| v.abs() < 1e-14));
    assert!(stage.snapshots.iter().all(|s| s[1].iter().all(|v| v.abs() < 1e-12)));
}

fn two_member_hjb() -> FullyNonlinearOp {
    let a1 = SymField::scalar(Coef::Fourier(FourierSeries::with_modes(1.0, vec![FourierMode::y(1, 0.3, 0.0)])));
    let a2 = SymField::scalar(Coef::Fourier(FourierSeries::constant(1.5)));
    FullyNonlinearOp::hjb_min(vec![a1, a2], 0.2).unwrap()
}

fn stage_one_coupling(op: &FullyNonlinearOp) -> LayerStage {
    let (nx, ny) = (8, 16);
    let st = setup(op, nx, ny);
    let g = field(nx, ny, |x, y| (TAU * x).cos() * (1.0 + (TAU * y).cos()));
    let base = build_stage(op, &st, &[StageData::base(g.clone())], &[], 3).unwrap();
    let xf = field(nx, ny, |x, y| (TAU * x).cos() * (1.0 + 0.5 * (TAU * y).cos()));
    let s1 = StageData { d: 1, g: vec![vec![0.0; nx * ny]], x: vec![Vec::new(), Vec::new(), xf], phases: 1 };
    build_stage(op, &st, &[StageData::base(g), s1], &[base], 1).unwrap()
}

#[test]
fn coupling_sources_vanish_for_linear_operators() {
    let st = stage_one_coupling(&FullyNonlinearOp::harmonic_1d());
    assert!(st.coupling[0].iter().all(|&(_, f)| f == 0.0));
}

#[test]
fn coupling_sources_decay_for_hjb() {
    let st = stage_one_coupling(&two_member_hjb());
    let hist = &st.coupling[0];
    assert!(hist[0].1 > 1e-3, "{:?}", &hist[..3]);
    let fit = decay_fit(hist).unwrap();
    assert!(fit.rate > 0.0);
}
