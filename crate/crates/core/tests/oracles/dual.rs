//! Reference solver for the soft-margin SVM dual, sharing no code with the
//! SMO implementation: plain projected gradient ascent with a fixed step,
//! projecting onto the box and the equality constraint by bisection.

#![allow(dead_code)]

pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in out.iter_mut() {
            r[j] = (r[j] - mean) / std;
        }
    }
    out
}

pub fn gram(rows: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| {
            rows.iter().map(|b| (-gamma * a.iter().zip(b).map(|(x, z)| (x - z).powi(2)).sum::<f64>()).exp()).collect()
        })
        .collect()
}

pub fn objective(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, y·a = 0}`: `a_i = clip(v_i - lambda y_i)`,
/// with `lambda` found by bisection on the monotone residual.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let residual = |lambda: f64| -> f64 { v.iter().zip(y).map(|(vi, yi)| yi * (vi - lambda * yi).clamp(0.0, c)).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)).collect()
}

pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Fixed-step projected gradient ascent; stops early once an iteration moves
/// no multiplier by more than 1e-15.
pub fn projected_gradient_ascent(k: &[Vec<f64>], y: &[f64], c: f64, step: f64, max_iter: usize) -> OracleSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let grad: Vec<f64> =
            (0..n).map(|i| 1.0 - y[i] * (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum::<f64>()).collect();
        let v: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
        let next = project(&v, y, c);
        let moved = next.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        alpha = next;
        if moved < 1e-15 {
            break;
        }
    }
    let bias = bias_from(&alpha, y, k, c);
    OracleSolution { objective: objective(&alpha, y, k), alpha, bias, iterations }
}

/// Average of `y_i - sum_j a_j y_j K_ij` over multipliers strictly inside the box.
pub fn bias_from(alpha: &[f64], y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let n = y.len();
    let tol = 1e-9 * c;
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > tol && alpha[i] < c - tol).collect();
    let margin = |i: usize| y[i] - (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum::<f64>();
    if !free.is_empty() {
        free.iter().map(|&i| margin(i)).sum::<f64>() / free.len() as f64
    } else {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let m = margin(i);
            let at_zero = alpha[i] <= tol;
            if at_zero == (y[i] > 0.0) {
                lo = lo.max(m);
            } else {
                hi = hi.min(m);
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn decision(alpha: &[f64], y: &[f64], k_row: &[f64], bias: f64) -> f64 {
    alpha.iter().zip(y).zip(k_row).map(|((a, yi), kv)| a * yi * kv).sum::<f64>() + bias
}
