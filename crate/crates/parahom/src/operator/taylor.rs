//! Taylor coefficients of `σ ↦ F(P₀ + Σ_{i≥1} σ^i Q_i)`.
//!
//! The coefficient of `σ^k` is `Σ_{l=1}^{k} (1/l!) Σ D^l F(P₀)(Q_{i₁},…,Q_{i_l})`
//! over compositions `i₁+⋯+i_l = k` with every `i_j ≥ 1`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::symmat::SymMat;
use super::tensor::DerivativeTensor;

/// Product of two truncated series of length five.
pub fn mul_series5(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
    let mut c = [0.0; 5];
    for i in 0..5 {
        for j in 0..5 - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

/// Compositions of `k` into `l` positive parts, cached per `(k, l)`.
pub fn compositions(k: usize, l: usize) -> Vec<Vec<usize>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Vec<Vec<usize>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&(k, l)) {
        return v.clone();
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    fn rec(rem: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 0 {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for part in 1..=rem.saturating_sub(slots - 1) {
            cur.push(part);
            rec(rem - part, slots - 1, cur, out);
            cur.pop();
        }
    }
    if l >= 1 && k >= l {
        rec(k, l, &mut cur, &mut out);
    }
    cache.lock().expect("cache lock").insert((k, l), out.clone());
    out
}

/// Coefficient of `σ^k` in the scalar case.
///
/// `derivs[l] = F^{(l)}(P₀)`; `q[i] = Q_i` with `q[0]` ignored.
pub fn coef_1d(derivs: &[f64], q: &[f64], k: usize) -> f64 {
    if k == 0 {
        return derivs[0];
    }
    // pow[j] holds the coefficients of (Σ_{i≥1} q_i σ^i)^l up to order k.
    let mut pow = vec![0.0; k + 1];
    pow[0] = 1.0;
    let mut acc = 0.0;
    let mut fact = 1.0;
    for l in 1..=k {
        let mut next = vec![0.0; k + 1];
        for (j, &pj) in pow.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for i in 1..=k - j {
                next[i + j] += pj * q.get(i).copied().unwrap_or(0.0);
            }
        }
        pow = next;
        fact *= l as f64;
        if l < derivs.len() {
            acc += derivs[l] / fact * pow[k];
        }
    }
    acc
}

/// All coefficients `0..=kmax` in the scalar case.
pub fn coefs_1d(derivs: &[f64], q: &[f64], kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    out[0] = derivs[0];
    let mut pow = vec![0.0; kmax + 1];
    pow[0] = 1.0;
    let mut fact = 1.0;
    for l in 1..=kmax {
        let mut next = vec![0.0; kmax + 1];
        for (j, &pj) in pow.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for i in 1..=kmax - j {
                next[i + j] += pj * q.get(i).copied().unwrap_or(0.0);
            }
        }
        pow = next;
        fact *= l as f64;
        if l < derivs.len() {
            let c = derivs[l] / fact;
            for k in l..=kmax {
                out[k] += c * pow[k];
            }
        }
    }
    out
}

/// Allocation-free variant of [`coefs_1d`] for `kmax < 8`; `q[i] = Q_i` with `q[0]` ignored.
pub fn coefs_1d_into(derivs: &[f64], q: &[f64], kmax: usize, out: &mut [f64]) {
    debug_assert!(kmax < 8);
    out[..=kmax].iter_mut().for_each(|v| *v = 0.0);
    out[0] = derivs[0];
    let mut pow = [0.0; 8];
    pow[0] = 1.0;
    let mut fact = 1.0;
    for l in 1..=kmax.min(derivs.len() - 1) {
        let mut next = [0.0; 8];
        for j in 0..=kmax {
            let pj = pow[j];
            if pj == 0.0 {
                continue;
            }
            for i in 1..=kmax - j {
                if let Some(&qi) = q.get(i) {
                    next[i + j] += pj * qi;
                }
            }
        }
        pow = next;
        fact *= l as f64;
        let c = derivs[l] / fact;
        if c != 0.0 {
            for k in l..=kmax {
                out[k] += c * pow[k];
            }
        }
    }
}

/// Coefficient of `σ^k` for general dimension using derivative tensors.
///
/// `tensors[l-1]` is `D^l F(P₀)`; `q[i] = Q_i` with `q[0]` ignored.
pub fn coef_tensor(tensors: &[DerivativeTensor], q: &[SymMat], k: usize) -> f64 {
    let mut acc = 0.0;
    let mut fact = 1.0;
    for l in 1..=k.min(tensors.len()) {
        fact *= l as f64;
        let t = &tensors[l - 1];
        let mut sum = 0.0;
        for comp in compositions(k, l) {
            if comp.iter().any(|&i| i >= q.len()) {
                continue;
            }
            let args: Vec<SymMat> = comp.iter().map(|&i| q[i]).collect();
            sum += t.apply(&args);
        }
        acc += sum / fact;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn into_variant_matches() {
        let d = [0.3, 1.1, -0.4, 0.25, 0.1];
        let q = [0.0, 0.7, -1.2, 0.5, 2.0];
        let a = coefs_1d(&d, &q, 4);
        let mut b = [0.0; 5];
        coefs_1d_into(&d, &q, 4, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(4, 2).len(), 3);
        assert_eq!(compositions(5, 3).len(), 6);
        assert!(compositions(2, 3).is_empty());
    }

    #[test]
    fn scalar_series_matches_exponential() {
        // F = exp, P₀ = 0, Q₁ = 1: F(σ) = e^σ so the k-th coefficient is 1/k!.
        let d = vec![1.0; 6];
        let q = vec![0.0, 1.0];
        let c = coefs_1d(&d, &q, 5);
        let mut f = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            assert!((ck - 1.0 / f).abs() < 1e-14);
            assert!((coef_1d(&d, &q, k) - ck).abs() < 1e-14);
        }
    }

    #[test]
    fn second_coefficient_formula() {
        let d = [0.0, 2.0, -3.0, 5.0];
        let q = [0.0, 0.7, 1.1, -0.4];
        let c2 = coef_1d(&d, &q, 2);
        assert!((c2 - (2.0 * 1.1 + 0.5 * -3.0 * 0.7 * 0.7)).abs() < 1e-14);
        let c3 = coef_1d(&d, &q, 3);
        let want = 2.0 * -0.4 + -3.0 * 0.7 * 1.1 + 5.0 / 6.0 * 0.7f64.powi(3);
        assert!((c3 - want).abs() < 1e-14);
    }
}
