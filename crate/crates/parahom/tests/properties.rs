//! Property tests of operator, stepper and cell-problem invariants.

use parahom::cell::{ergodic_constant, CellConfig, CellMethod};
use parahom::operator::{Coef, FourierMode, FourierSeries, FullyNonlinearOp, Pt, SymField, SymMat};
use parahom::pde_core::{monotone_step, oscillation, solve_fast_cauchy, FastField, TorusGrid};
use proptest::prelude::*;

fn builtins() -> Vec<FullyNonlinearOp> {
    let a1 = Coef::Fourier(FourierSeries::with_modes(
        1.0,
        vec![FourierMode::y(1, 0.3, 0.1), FourierMode { kx: 0, ky: [1, 0], ks: 1, cos: 0.0, sin: 0.2 }],
    ));
    let a2 = Coef::Reciprocal(FourierSeries::with_modes(1.0, vec![FourierMode::y(2, 0.0, 0.4)]));
    vec![
        FullyNonlinearOp::heat(1),
        FullyNonlinearOp::heat(2),
        FullyNonlinearOp::harmonic_1d(),
        FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap(),
        FullyNonlinearOp::pucci_minus(2, 1.0, 2.0).unwrap(),
        FullyNonlinearOp::pucci_plus(2, 0.5, 1.5).unwrap(),
        FullyNonlinearOp::hjb_min(vec![SymField::scalar(a1.clone()), SymField::scalar(a2.clone())], 0.0).unwrap(),
        FullyNonlinearOp::hjb_min(vec![SymField::scalar(a1), SymField::scalar(a2)], 0.2).unwrap(),
        FullyNonlinearOp::recession_perturbed(FullyNonlinearOp::harmonic_1d(), Coef::Const(0.3), 0.75, 1.0).unwrap(),
    ]
}

fn matrix(n: usize, v: &[f64]) -> SymMat {
    if n == 1 {
        SymMat::scalar(v[0])
    } else {
        SymMat::new2(v[0], v[1], v[2])
    }
}

fn psd(n: usize, v: &[f64]) -> SymMat {
    if n == 1 {
        SymMat::scalar(v[0].abs())
    } else {
        SymMat::new2(v[0] * v[0], v[0] * v[1], v[1] * v[1] + v[2] * v[2])
    }
}

fn tol(p: &SymMat) -> f64 {
    1e-9 * (1.0 + p.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ellipticity_bounds(
        i in 0usize..9,
        p in prop::collection::vec(-10.0f64..10.0, 3),
        q in prop::collection::vec(-2.0f64..2.0, 3),
        y in 0.0f64..1.0,
        s in 0.0f64..1.0,
    ) {
        let op = &builtins()[i];
        let (p, q) = (matrix(op.n, &p), psd(op.n, &q));
        let pt = Pt::new(0.3, 0.2, [y, 0.7], s);
        let d = op.eval(&(p + q), &pt).unwrap() - op.eval(&p, &pt).unwrap();
        prop_assert!(d >= op.lambda * q.norm() - tol(&p), "{}: {d} < λ‖Q‖", op.name);
        prop_assert!(d <= op.cap_lambda * q.norm() + tol(&p), "{}: {d} > Λ‖Q‖", op.name);
    }

    #[test]
    fn periodic_in_fast_variables(
        i in 0usize..9,
        p in prop::collection::vec(-5.0f64..5.0, 3),
        y in 0.0f64..1.0,
        s in 0.0f64..1.0,
    ) {
        let op = &builtins()[i];
        let p = matrix(op.n, &p);
        let a = op.eval(&p, &Pt::new(0.1, 0.0, [y, 0.0], s)).unwrap();
        let b = op.eval(&p, &Pt::new(0.1, 0.0, [y + 1.0, 1.0], s + 1.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn concave_builtins_are_concave(
        i in 0usize..8,
        p in prop::collection::vec(-5.0f64..5.0, 3),
        q in prop::collection::vec(-5.0f64..5.0, 3),
        rho in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let op = &builtins()[i];
        prop_assume!(op.concave);
        let (p, q) = (matrix(op.n, &p), matrix(op.n, &q));
        let pt = Pt::new(0.0, 0.0, [y, 0.4], 0.3);
        let mid = op.eval(&(rho * p + (1.0 - rho) * q), &pt).unwrap();
        let chord = rho * op.eval(&p, &pt).unwrap() + (1.0 - rho) * op.eval(&q, &pt).unwrap();
        prop_assert!(chord <= mid + tol(&p) + tol(&q));
    }

    #[test]
    fn first_derivative_matches_differences(
        i in prop::sample::select(vec![2usize, 7, 8]),
        p in -4.0f64..4.0,
        y in 0.0f64..1.0,
    ) {
        let op = &builtins()[i];
        let pt = Pt::new(0.0, 0.0, [y, 0.0], 0.25);
        let exact = op.frechet_derivative(1, &SymMat::scalar(p), &pt).unwrap().as_matrix().e[0];
        let fd = |h: f64| (op.eval(&SymMat::scalar(p + h), &pt).unwrap() - op.eval(&SymMat::scalar(p - h), &pt).unwrap()) / (2.0 * h);
        let (e1, e2) = ((fd(2e-2) - exact).abs(), (fd(1e-2) - exact).abs());
        prop_assert!(e2 < 1e-9 || e1 / e2 >= 2f64.powf(1.8), "errors {e1:e} {e2:e}");
    }

    #[test]
    fn comparison_and_oscillation_contraction(
        i in 0usize..9,
        u in prop::collection::vec(-1.0f64..1.0, 64),
        gap in prop::collection::vec(0.0f64..0.5, 64),
    ) {
        let op = &builtins()[i];
        let ny = if op.n == 1 { 64 } else { 8 };
        let grid = TorusGrid::for_ellipticity(op.n, ny, op.cap_lambda).unwrap();
        let v: Vec<f64> = u.iter().zip(&gap).map(|(a, b)| a + b).collect();
        let a = monotone_step(op, &grid, &FastField { s: 0.0, values: u.clone() }, 0.0, 0.0, None).unwrap();
        let b = monotone_step(op, &grid, &FastField { s: 0.0, values: v }, 0.0, 0.0, None).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| x <= y));
        prop_assert!(oscillation(&a.values) <= oscillation(&u) + 1e-12);
    }

    #[test]
    fn constants_are_preserved(i in 0usize..9, c in -3.0f64..3.0) {
        let op = &builtins()[i];
        let ny = if op.n == 1 { 16 } else { 4 };
        let grid = TorusGrid::for_ellipticity(op.n, ny, op.cap_lambda).unwrap();
        let traj = solve_fast_cauchy(op, &grid, 0.0, 0.0, &vec![c; grid.nodes()], None, 0.05, 1).unwrap();
        prop_assert!(traj.iter().all(|f| f.values.iter().all(|v| *v == c)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn effective_operator_is_elliptic_and_unique(
        i in prop::sample::select(vec![2usize, 3, 6, 7]),
        p in -3.0f64..3.0,
        q in 0.0f64..2.0,
    ) {
        let op = &builtins()[i];
        let grid = TorusGrid::for_ellipticity(1, 16, op.cap_lambda).unwrap();
        let cfg = CellConfig::default();
        let at = |v: f64, m| ergodic_constant(op, &grid, &SymMat::scalar(v), 0.0, 0.0, m, &cfg).unwrap();
        let (a, b) = (at(p, CellMethod::LongTimeSlope), at(p + q, CellMethod::LongTimeSlope));
        let d = b.gamma - a.gamma;
        prop_assert!(d >= op.lambda * q - 1e-8 && d <= op.cap_lambda * q + 1e-8);
        let pen = at(p, CellMethod::Penalization);
        prop_assert!((pen.gamma - a.gamma).abs() <= cfg.cross_tol);
        prop_assert_eq!(a.corrector[0].values[0], 0.0);
        prop_assert_eq!(pen.corrector[0].values[0], 0.0);
    }
}
