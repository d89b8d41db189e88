//! Fully nonlinear operators `F(P, x, t, y, s)`, their matrix-slot derivatives,
//! recession partners and validators for the standing assumptions.

mod checks;
mod coef;
mod frozen;
mod symmat;
pub mod taylor;
mod tensor;

pub use checks::{check_assumptions, recession_gap, AssumptionReport, GapReport, SamplerConfig};
pub use coef::{Coef, FourierMode, FourierSeries, SymField};
pub use frozen::FrozenOp;
pub use symmat::{coord_dim, SymMat};
pub use tensor::DerivativeTensor;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Evaluation point `(x, t, y, s)`; `y` uses the first `n` entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pt {
    pub x: f64,
    pub t: f64,
    pub y: [f64; 2],
    pub s: f64,
}

impl Pt {
    pub fn new(x: f64, t: f64, y: [f64; 2], s: f64) -> Self {
        Pt { x, t, y, s }
    }

    pub fn y1(x: f64, t: f64, y: f64, s: f64) -> Self {
        Pt { x, t, y: [y, 0.0], s }
    }
}

/// User-supplied evaluator `(P, point) → F`.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(&SymMat, &Pt) -> f64 + Send + Sync>);

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn")
    }
}

/// Structural form of an operator.
#[derive(Clone, Debug)]
pub enum OpKind {
    /// `tr(A(x,y,s) P)`.
    LinearTr { a: SymField },
    /// Pucci minimal operator `λ' tr(P⁺) − Λ' tr(P⁻)`.
    PucciMinus { lo: f64, hi: f64 },
    /// Pucci maximal operator `−M⁻(−P)`.
    PucciPlus { lo: f64, hi: f64 },
    /// Soft minimum `−μ log(N⁻¹ Σ exp(−tr(A_i P)/μ))` of linear operators; exact minimum when `μ = 0`.
    HjbMin { family: Vec<SymField>, mu: f64 },
    /// `base(P) + b(y) [(μ² + ‖P‖²)^{δ/2} − μ^δ]`.
    Recession { base: Box<OpKind>, b: Coef, delta: f64, mu: f64, nbase: usize },
    /// `base(P) + c`; violates `F(0) = 0` when `c ≠ 0`.
    Shifted { base: Box<OpKind>, c: f64 },
    Custom(CustomFn),
}

/// Recession partner `F_*` with exponent δ and gap constant.
#[derive(Clone, Debug)]
pub struct RecessionPartner {
    pub op: Box<FullyNonlinearOp>,
    pub delta: f64,
    pub gap: f64,
}

/// Dependence of an operator on its non-matrix arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dependence {
    pub x: bool,
    pub t: bool,
    pub y: bool,
    pub s: bool,
}

/// The operator `F` with ellipticity and regularity metadata.
#[derive(Clone, Debug)]
pub struct FullyNonlinearOp {
    pub name: String,
    pub n: usize,
    pub kind: OpKind,
    pub lambda: f64,
    pub cap_lambda: f64,
    pub concave: bool,
    pub k_const: f64,
    pub alpha: f64,
    pub period: f64,
    pub recession: Option<RecessionPartner>,
}

/// Maximum number of cached coefficients per evaluation point.
pub const MAX_COEFS: usize = 32;

impl OpKind {
    fn coefs<'a>(&'a self, out: &mut Vec<&'a Coef>) {
        match self {
            OpKind::LinearTr { a } => out.extend(a.entries.iter()),
            OpKind::HjbMin { family, .. } => {
                for f in family {
                    out.extend(f.entries.iter());
                }
            }
            OpKind::Recession { base, b, .. } => {
                base.coefs(out);
                out.push(b);
            }
            OpKind::Shifted { base, .. } => base.coefs(out),
            OpKind::PucciMinus { .. } | OpKind::PucciPlus { .. } | OpKind::Custom(_) => {}
        }
    }

    fn ncoef(&self) -> usize {
        let mut v = Vec::new();
        self.coefs(&mut v);
        v.len()
    }

    /// Evaluates the kernel with coefficients already sampled at `pt`.
    pub fn kernel_eval(&self, p: &SymMat, c: &[f64], pt: &Pt) -> f64 {
        match self {
            OpKind::LinearTr { .. } => sym_from(p.n, c).frob(p),
            OpKind::PucciMinus { lo, hi } => pucci_minus(p, *lo, *hi),
            OpKind::PucciPlus { lo, hi } => -pucci_minus(&(-*p), *lo, *hi),
            OpKind::HjbMin { family, mu } => {
                let d = p.dim();
                let mut a = [0.0; 8];
                for i in 0..family.len() {
                    a[i] = sym_from(p.n, &c[i * d..(i + 1) * d]).frob(p);
                }
                softmin(&a[..family.len()], *mu)
            }
            OpKind::Recession { base, delta, mu, nbase: nb, .. } => {
                let nb = *nb;
                base.kernel_eval(p, &c[..nb], pt) + c[nb] * recession_bump(p.norm(), *delta, *mu)
            }
            OpKind::Shifted { base, c: shift } => base.kernel_eval(p, c, pt) + shift,
            OpKind::Custom(f) => (f.0)(p, pt),
        }
    }

    /// Analytic coordinate derivative tensor of order `k ≥ 1`, with kink flag.
    fn analytic_tensor(&self, k: usize, p: &SymMat, c: &[f64]) -> Option<(Vec<f64>, bool)> {
        let d = p.dim();
        let len = d.pow(k as u32);
        match self {
            OpKind::LinearTr { .. } => {
                let mut t = vec![0.0; len];
                if k == 1 {
                    t.copy_from_slice(&grad_coords(&sym_from(p.n, c))[..d]);
                }
                Some((t, false))
            }
            OpKind::PucciMinus { lo, hi } | OpKind::PucciPlus { lo, hi } => {
                let plus = matches!(self, OpKind::PucciPlus { .. });
                let (g, kink) = pucci_gradient(p, *lo, *hi, plus);
                let mut t = vec![0.0; len];
                if k == 1 {
                    t.copy_from_slice(&grad_coords(&g)[..d]);
                }
                Some((t, kink))
            }
            OpKind::HjbMin { family, mu } => {
                if k > 4 {
                    return None;
                }
                let grads: Vec<[f64; 3]> = (0..family.len())
                    .map(|i| grad_coords(&sym_from(p.n, &c[i * d..(i + 1) * d])))
                    .collect();
                let vals: Vec<f64> = (0..family.len())
                    .map(|i| sym_from(p.n, &c[i * d..(i + 1) * d]).frob(p))
                    .collect();
                Some(softmin_tensor(&vals, &grads, d, k, *mu))
            }
            OpKind::Recession { base, delta, mu, nbase: nb, .. } => {
                if p.n != 1 || k > 4 {
                    return None;
                }
                let nb = *nb;
                let (mut t, kink) = base.analytic_tensor(k, p, &c[..nb])?;
                let h = bump_derivs(p.e[0], *delta, *mu, k);
                t[0] += c[nb] * h[k];
                Some((t, kink))
            }
            OpKind::Shifted { base, .. } => base.analytic_tensor(k, p, c),
            OpKind::Custom(_) => None,
        }
    }

    /// Scalar derivatives `F, F', …, F^{(kmax)}` in dimension one.
    pub fn derivs_1d(&self, p: f64, c: &[f64], pt: &Pt, kmax: usize, out: &mut [f64]) {
        match self {
            OpKind::LinearTr { .. } => {
                out[0] = c[0] * p;
                if kmax >= 1 {
                    out[1] = c[0];
                }
                for v in out.iter_mut().take(kmax + 1).skip(2) {
                    *v = 0.0;
                }
            }
            OpKind::PucciMinus { lo, hi } | OpKind::PucciPlus { lo, hi } => {
                let plus = matches!(self, OpKind::PucciPlus { .. });
                let (slope_pos, slope_neg) = if plus { (*hi, *lo) } else { (*lo, *hi) };
                let g = if p >= 0.0 { slope_pos } else { slope_neg };
                out[0] = g * p;
                if kmax >= 1 {
                    out[1] = g;
                }
                for v in out.iter_mut().take(kmax + 1).skip(2) {
                    *v = 0.0;
                }
            }
            OpKind::HjbMin { family, mu } if kmax <= 4 => {
                let mut a = [0.0; 8];
                let nf = family.len();
                for i in 0..nf {
                    a[i] = c[i];
                }
                softmin_derivs_1d(&a[..nf], p, *mu, kmax, out);
            }
            OpKind::Recession { base, delta, mu, nbase: nb, .. } if kmax <= 4 => {
                let nb = *nb;
                base.derivs_1d(p, &c[..nb], pt, kmax, out);
                let h = bump_derivs(p, *delta, *mu, kmax);
                for j in 0..=kmax {
                    out[j] += c[nb] * h[j];
                }
            }
            OpKind::Shifted { base, c: shift } => {
                base.derivs_1d(p, c, pt, kmax, out);
                out[0] += shift;
            }
            _ => {
                let f = |q: f64| self.kernel_eval(&SymMat::scalar(q), c, pt);
                out[0] = f(p);
                for k in 1..=kmax {
                    out[k] = central_difference(&f, p, k, fd_step(p.abs(), k));
                }
            }
        }
    }
}

/// Finite-difference step for order-`k` matrix-slot derivatives.
pub fn fd_step(pnorm: f64, k: usize) -> f64 {
    (1e-4f64).max(1e-4 * pnorm) * 10f64.powi(k as i32 - 1)
}

/// Second-order central difference for the `k`-th derivative.
pub fn central_difference(f: &dyn Fn(f64) -> f64, p: f64, k: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(p + (k as f64 / 2.0 - j as f64) * h);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(k as i32)
}

fn sym_from(n: usize, c: &[f64]) -> SymMat {
    if n == 1 {
        SymMat::scalar(c[0])
    } else {
        SymMat::new2(c[0], c[1], c[2])
    }
}

/// Coordinates of the gradient of `P ↦ tr(G P)`.
fn grad_coords(g: &SymMat) -> [f64; 3] {
    if g.n == 1 {
        [g.e[0], 0.0, 0.0]
    } else {
        [g.e[0], 2.0 * g.e[1], g.e[2]]
    }
}

fn pucci_minus(p: &SymMat, lo: f64, hi: f64) -> f64 {
    let ev = p.eigenvalues();
    let m = if p.n == 1 { 1 } else { 2 };
    ev[..m].iter().map(|&e| if e > 0.0 { lo * e } else { hi * e }).sum()
}

/// Gradient matrix of the Pucci operator; flags a zero eigenvalue.
fn pucci_gradient(p: &SymMat, lo: f64, hi: f64, plus: bool) -> (SymMat, bool) {
    let coef = |e: f64| match (plus, e >= 0.0) {
        (false, true) => lo,
        (false, false) => hi,
        (true, true) => hi,
        (true, false) => lo,
    };
    let scale = p.norm().max(1.0);
    if p.n == 1 {
        let e = p.e[0];
        return (SymMat::scalar(coef(e)), e.abs() <= 1e-14 * scale);
    }
    let ev = p.eigenvalues();
    let kink = ev.iter().any(|e| e.abs() <= 1e-14 * scale);
    if (ev[1] - ev[0]).abs() <= 1e-14 * scale {
        let c = coef(ev[0]);
        return (c * SymMat::identity(2), kink);
    }
    let mut g = SymMat::zero(2);
    for &lam in &ev {
        let (a, b, d) = (p.e[0] - lam, p.e[1], p.e[2] - lam);
        let v = if a.abs() + b.abs() > d.abs() + b.abs() { [-b, a] } else { [d, -b] };
        let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let v = [v[0] / nv, v[1] / nv];
        let c = coef(lam);
        g = g + c * SymMat::new2(v[0] * v[0], v[0] * v[1], v[1] * v[1]);
    }
    (g, kink)
}

fn softmin(a: &[f64], mu: f64) -> f64 {
    let m = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if mu <= 0.0 {
        return m;
    }
    let s: f64 = a.iter().map(|&v| (-(v - m) / mu).exp()).sum();
    m - mu * (s / a.len() as f64).ln()
}

fn softmin_weights(a: &[f64], mu: f64, w: &mut [f64]) {
    let m = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if mu <= 0.0 {
        let i = a.iter().position(|&v| v == m).unwrap_or(0);
        for (j, wj) in w.iter_mut().enumerate().take(a.len()) {
            *wj = if j == i { 1.0 } else { 0.0 };
        }
        return;
    }
    let mut s = 0.0;
    for (j, &v) in a.iter().enumerate() {
        w[j] = (-(v - m) / mu).exp();
        s += w[j];
    }
    for wj in w.iter_mut().take(a.len()) {
        *wj /= s;
    }
}

/// Derivatives of the soft minimum along `p ↦ Σ a_i p` through tilted cumulants.
fn softmin_derivs_1d(a: &[f64], p: f64, mu: f64, kmax: usize, out: &mut [f64]) {
    let mut vals = [0.0; 8];
    for (i, &ai) in a.iter().enumerate() {
        vals[i] = ai * p;
    }
    let nf = a.len();
    out[0] = softmin(&vals[..nf], mu);
    if kmax == 0 {
        return;
    }
    let mut w = [0.0; 8];
    softmin_weights(&vals[..nf], mu, &mut w);
    let mean: f64 = (0..nf).map(|i| w[i] * a[i]).sum();
    out[1] = mean;
    if kmax < 2 {
        return;
    }
    if mu <= 0.0 {
        for v in out.iter_mut().take(kmax + 1).skip(2) {
            *v = 0.0;
        }
        return;
    }
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for i in 0..nf {
        let d = a[i] - mean;
        m2 += w[i] * d * d;
        m3 += w[i] * d * d * d;
        m4 += w[i] * d * d * d * d;
    }
    out[2] = -m2 / mu;
    if kmax >= 3 {
        out[3] = m3 / (mu * mu);
    }
    if kmax >= 4 {
        out[4] = -(m4 - 3.0 * m2 * m2) / (mu * mu * mu);
    }
}

/// Coordinate tensor of the soft minimum from joint tilted cumulants.
fn softmin_tensor(vals: &[f64], grads: &[[f64; 3]], d: usize, k: usize, mu: f64) -> (Vec<f64>, bool) {
    let nf = vals.len();
    let mut w = vec![0.0; nf];
    softmin_weights(vals, mu, &mut w);
    let len = d.pow(k as u32);
    let mut t = vec![0.0; len];
    let mut mean = [0.0; 3];
    for i in 0..nf {
        for a in 0..d {
            mean[a] += w[i] * grads[i][a];
        }
    }
    let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let ties = vals.iter().filter(|&&v| (v - m).abs() <= 1e-14 * m.abs().max(1.0)).count();
    if k == 1 {
        t.copy_from_slice(&mean[..d]);
        return (t, mu <= 0.0 && ties > 1);
    }
    if mu <= 0.0 {
        return (t, ties > 1);
    }
    let cen: Vec<[f64; 3]> = grads
        .iter()
        .map(|g| [g[0] - mean[0], g[1] - mean[1], g[2] - mean[2]])
        .collect();
    let moment = |idx: &[usize]| -> f64 {
        (0..nf).map(|i| w[i] * idx.iter().map(|&a| cen[i][a]).product::<f64>()).sum()
    };
    let mut idx = vec![0usize; k];
    for (flat, v) in t.iter_mut().enumerate() {
        let mut r = flat;
        for slot in idx.iter_mut() {
            *slot = r % d;
            r /= d;
        }
        let kappa = match k {
            2 | 3 => moment(&idx),
            _ => {
                moment(&idx)
                    - moment(&[idx[0], idx[1]]) * moment(&[idx[2], idx[3]])
                    - moment(&[idx[0], idx[2]]) * moment(&[idx[1], idx[3]])
                    - moment(&[idx[0], idx[3]]) * moment(&[idx[1], idx[2]])
            }
        };
        *v = -mu * (-1.0 / mu).powi(k as i32) * kappa;
    }
    (t, false)
}

/// `(μ² + r²)^{δ/2} − μ^δ`.
fn recession_bump(r: f64, delta: f64, mu: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    (mu * mu + r * r).powf(0.5 * delta) - mu.powf(delta)
}

/// Derivatives of `p ↦ (μ² + p²)^{δ/2} − μ^δ` up to order `kmax ≤ 4`.
fn bump_derivs(p: f64, delta: f64, mu: f64, kmax: usize) -> [f64; 5] {
    let mut out = [0.0; 5];
    if delta == 0.0 {
        return out;
    }
    // (c + 2pη + η²)^α = c^α (1 + u)^α with u = (2pη + η²)/c, expanded in η.
    let c = mu * mu + p * p;
    let alpha = 0.5 * delta;
    let u = [0.0, 2.0 * p / c, 1.0 / c, 0.0, 0.0];
    let mut series = [0.0; 5];
    let mut upow = [1.0, 0.0, 0.0, 0.0, 0.0];
    let mut binom = 1.0;
    for j in 0..=4usize {
        for k in 0..=4 {
            series[k] += binom * upow[k];
        }
        binom *= (alpha - j as f64) / (j as f64 + 1.0);
        upow = taylor::mul_series5(&upow, &u);
    }
    let ca = c.powf(alpha);
    let mut fact = 1.0;
    for k in 0..=kmax.min(4) {
        if k > 0 {
            fact *= k as f64;
        }
        out[k] = ca * series[k] * fact;
    }
    out[0] -= mu.powf(delta);
    out
}

/// Supremum of `|d/dr [(μ² + r²)^{δ/2}]|` over `r`.
fn bump_slope_bound(delta: f64, mu: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let t2 = 1.0 / (1.0 - delta);
    delta * mu.powf(delta - 1.0) * t2.sqrt() * (1.0 + t2).powf(0.5 * delta - 1.0)
}

impl FullyNonlinearOp {
    fn with_kind(name: &str, n: usize, kind: OpKind, lambda: f64, cap_lambda: f64, concave: bool) -> Self {
        FullyNonlinearOp {
            name: name.to_string(),
            n,
            kind,
            lambda,
            cap_lambda,
            concave,
            k_const: 1.0,
            alpha: 0.5,
            period: 1.0,
            recession: None,
        }
    }

    /// `tr(A P)` with ellipticity bounds inferred from coefficient bounds.
    pub fn linear_tr(a: SymField) -> Result<Self> {
        let (lo, hi) = symfield_eig_bounds(&a)?;
        if lo <= 0.0 {
            return Err(Error::OperatorDefinition(format!(
                "linear coefficient not uniformly positive (lower bound {lo})"
            )));
        }
        let n = a.n;
        Ok(Self::with_kind("linear_tr", n, OpKind::LinearTr { a }, lo, hi * (n as f64).sqrt(), true))
    }

    /// Heat operator `tr(P)`.
    pub fn heat(n: usize) -> Self {
        Self::linear_tr(SymField::constant(SymMat::identity(n))).expect("identity is elliptic")
    }

    /// One-dimensional `a(y) p` with `a(y) = 1/(2 + sin 2πy)`.
    pub fn harmonic_1d() -> Self {
        let a = Coef::Reciprocal(FourierSeries::with_modes(2.0, vec![FourierMode::y(1, 0.0, 1.0)]));
        let mut op = Self::linear_tr(SymField::scalar(a)).expect("positive coefficient");
        op.name = "harmonic_1d".into();
        op
    }

    pub fn pucci_minus(n: usize, lo: f64, hi: f64) -> Result<Self> {
        check_pucci(lo, hi)?;
        Ok(Self::with_kind("pucci_minus", n, OpKind::PucciMinus { lo, hi }, lo, hi * (n as f64).sqrt(), true))
    }

    pub fn pucci_plus(n: usize, lo: f64, hi: f64) -> Result<Self> {
        check_pucci(lo, hi)?;
        Ok(Self::with_kind("pucci_plus", n, OpKind::PucciPlus { lo, hi }, lo, hi * (n as f64).sqrt(), false))
    }

    /// Smoothed minimum of a family of linear operators (`μ = 0` gives the exact minimum).
    pub fn hjb_min(family: Vec<SymField>, mu: f64) -> Result<Self> {
        if family.is_empty() || family.len() > 8 {
            return Err(Error::OperatorDefinition("hjb_min needs 1..=8 members".into()));
        }
        let n = family[0].n;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for f in &family {
            if f.n != n {
                return Err(Error::OperatorDefinition("hjb_min members differ in dimension".into()));
            }
            let (l, h) = symfield_eig_bounds(f)?;
            lo = lo.min(l);
            hi = hi.max(h);
        }
        if lo <= 0.0 || mu < 0.0 {
            return Err(Error::OperatorDefinition("hjb_min members must be uniformly elliptic".into()));
        }
        let kind = OpKind::HjbMin { family, mu };
        if kind.ncoef() > MAX_COEFS {
            return Err(Error::OperatorDefinition("too many coefficients".into()));
        }
        Ok(Self::with_kind("hjb_min", n, kind, lo, hi * (n as f64).sqrt(), true))
    }

    /// `F = F_* + b(y)[(μ² + ‖P‖²)^{δ/2} − μ^δ]` with recession partner `F_*`.
    pub fn recession_perturbed(base: FullyNonlinearOp, b: Coef, delta: f64, mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) || mu <= 0.0 {
            return Err(Error::OperatorDefinition("need δ ∈ [0,1) and μ > 0".into()));
        }
        let (blo, bhi) = b
            .bounds()
            .ok_or_else(|| Error::OperatorDefinition("unbounded recession coefficient".into()))?;
        let bmax = blo.abs().max(bhi.abs());
        let slope = bmax * bump_slope_bound(delta, mu);
        let lambda = base.lambda - slope;
        if lambda <= 0.0 {
            return Err(Error::OperatorDefinition(format!(
                "perturbation slope {slope} destroys ellipticity (λ_* = {})",
                base.lambda
            )));
        }
        let kind = OpKind::Recession { base: Box::new(base.kind.clone()), b, delta, mu, nbase: base.ncoef() };
        let mut op = Self::with_kind("recession", base.n, kind, lambda, base.cap_lambda + slope, delta == 0.0 && base.concave);
        op.recession = Some(RecessionPartner { op: Box::new(base), delta, gap: bmax });
        Ok(op)
    }

    /// Operator `F + c`; used as a negative control for `F(0) = 0`.
    pub fn shifted(base: &FullyNonlinearOp, c: f64) -> Self {
        let mut op = base.clone();
        op.kind = OpKind::Shifted { base: Box::new(base.kind.clone()), c };
        op.name = format!("{}+{}", base.name, c);
        op
    }

    pub fn custom(
        n: usize,
        f: impl Fn(&SymMat, &Pt) -> f64 + Send + Sync + 'static,
        lambda: f64,
        cap_lambda: f64,
        concave: bool,
    ) -> Self {
        Self::with_kind("custom", n, OpKind::Custom(CustomFn(Arc::new(f))), lambda, cap_lambda, concave)
    }

    /// Attaches a recession partner to an operator.
    pub fn with_recession(mut self, partner: FullyNonlinearOp, delta: f64, gap: f64) -> Self {
        self.recession = Some(RecessionPartner { op: Box::new(partner), delta, gap });
        self
    }

    pub fn ncoef(&self) -> usize {
        self.kind.ncoef()
    }

    /// Samples every coefficient at `pt` into `out`.
    pub fn sample_coefs(&self, pt: &Pt, out: &mut [f64]) {
        let mut v = Vec::new();
        self.kind.coefs(&mut v);
        let xi = pt.x / self.period;
        for (o, c) in out.iter_mut().zip(v) {
            *o = c.eval(xi, pt.y, pt.s);
        }
    }

    /// Which arguments the operator depends on.
    pub fn dependence(&self) -> Dependence {
        if matches!(self.kind, OpKind::Custom(_)) || contains_custom(&self.kind) {
            return Dependence { x: true, t: true, y: true, s: true };
        }
        let mut v = Vec::new();
        self.kind.coefs(&mut v);
        Dependence {
            x: v.iter().any(|c| c.depends_on_x()),
            t: false,
            y: v.iter().any(|c| c.depends_on_y()),
            s: v.iter().any(|c| c.depends_on_s()),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, OpKind::LinearTr { .. })
            || matches!(&self.kind, OpKind::HjbMin { family, .. } if family.len() == 1)
    }

    /// `F(P, x, t, y, s)`; errors on a non-finite value.
    pub fn eval(&self, p: &SymMat, pt: &Pt) -> Result<f64> {
        let v = self.eval_unchecked(p, pt);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OperatorDefinition(format!("non-finite F at P={:?}, {:?}", p.e, pt)))
        }
    }

    pub fn eval_unchecked(&self, p: &SymMat, pt: &Pt) -> f64 {
        let mut c = [0.0; MAX_COEFS];
        self.sample_coefs(pt, &mut c);
        self.kind.kernel_eval(p, &c, pt)
    }

    /// Scalar derivatives `F^{(j)}(p)` for `j ≤ kmax` in dimension one.
    pub fn derivs_1d(&self, p: f64, pt: &Pt, kmax: usize) -> Vec<f64> {
        let mut c = [0.0; MAX_COEFS];
        self.sample_coefs(pt, &mut c);
        let mut out = vec![0.0; kmax + 1];
        self.kind.derivs_1d(p, &c, pt, kmax, &mut out);
        out
    }

    /// Ellipticity-based stable explicit step `0.9 Δ² / (2 n Λ)`.
    pub fn cfl_step(&self, spacing: f64) -> f64 {
        0.9 * spacing * spacing / (2.0 * self.n as f64 * self.cap_lambda)
    }
}

fn contains_custom(k: &OpKind) -> bool {
    match k {
        OpKind::Custom(_) => true,
        OpKind::Recession { base, .. } | OpKind::Shifted { base, .. } => contains_custom(base),
        _ => false,
    }
}

fn check_pucci(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::OperatorDefinition(format!("Pucci needs 0 < λ' ≤ Λ', got ({lo}, {hi})")));
    }
    Ok(())
}

/// Conservative eigenvalue bounds of a symmetric coefficient field.
fn symfield_eig_bounds(a: &SymField) -> Result<(f64, f64)> {
    let b: Vec<(f64, f64)> = a
        .entries
        .iter()
        .map(|c| c.bounds().ok_or_else(|| Error::OperatorDefinition("unbounded coefficient".into())))
        .collect::<Result<_>>()?;
    if a.n == 1 {
        return Ok(b[0]);
    }
    let off = b[1].0.abs().max(b[1].1.abs());
    Ok((b[0].0.min(b[2].0) - off, b[0].1.max(b[2].1) + off))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_identity() {
        let op = FullyNonlinearOp::heat(1);
        assert_eq!(op.eval(&SymMat::scalar(2.0), &Pt::y1(0.0, 0.0, 0.3, 0.0)).unwrap(), 2.0);
    }

    #[test]
    fn pucci_minus_negative_branch() {
        let op = FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap();
        assert_eq!(op.eval(&SymMat::scalar(-3.0), &Pt::y1(0.0, 0.0, 0.0, 0.0)).unwrap(), -6.0);
        assert_eq!(op.eval(&SymMat::scalar(3.0), &Pt::y1(0.0, 0.0, 0.0, 0.0)).unwrap(), 3.0);
    }

    #[test]
    fn zero_at_zero_for_builtins() {
        let pt = Pt::y1(0.2, 0.0, 0.37, 0.11);
        let a = SymField::scalar(Coef::Fourier(FourierSeries::with_modes(1.0, vec![FourierMode::y(1, 0.3, 0.0)])));
        let ops = vec![
            FullyNonlinearOp::harmonic_1d(),
            FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap(),
            FullyNonlinearOp::hjb_min(vec![a.clone(), SymField::scalar(Coef::Const(0.5))], 0.2).unwrap(),
            FullyNonlinearOp::recession_perturbed(
                FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap(),
                Coef::Const(0.5),
                0.75,
                1.0,
            )
            .unwrap(),
        ];
        for op in ops {
            assert_eq!(op.eval(&SymMat::zero(1), &pt).unwrap().abs(), 0.0, "{}", op.name);
        }
    }

    #[test]
    fn softmin_derivatives_match_finite_differences() {
        let a1 = SymField::scalar(Coef::Const(1.0));
        let a2 = SymField::scalar(Coef::Const(0.4));
        let op = FullyNonlinearOp::hjb_min(vec![a1, a2], 0.3).unwrap();
        let pt = Pt::y1(0.0, 0.0, 0.0, 0.0);
        let d = op.derivs_1d(0.2, &pt, 4);
        let f = |q: f64| op.eval_unchecked(&SymMat::scalar(q), &pt);
        for k in 1..=3 {
            let fd = central_difference(&f, 0.2, k, 1e-2);
            assert!((fd - d[k]).abs() < 1e-3 * d[k].abs().max(1.0), "k={k}: {fd} vs {}", d[k]);
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let h = bump_derivs(0.7, 0.75, 1.0, 4);
        let f = |q: f64| recession_bump(q.abs(), 0.75, 1.0);
        assert!((f(0.7) - h[0]).abs() < 1e-14);
        for k in 1..=3 {
            let fd = central_difference(&f, 0.7, k, 1e-2);
            assert!((fd - h[k]).abs() < 1e-3, "k={k}: {fd} vs {}", h[k]);
        }
    }

    #[test]
    fn recession_ellipticity_window() {
        let base = FullyNonlinearOp::pucci_minus(1, 1.0, 2.0).unwrap();
        let op = FullyNonlinearOp::recession_perturbed(base, Coef::Const(0.75), 0.75, 1.0).unwrap();
        assert!(op.lambda > 0.4 && op.lambda < 1.0);
        assert!(op.cap_lambda > 2.0);
    }
}
