//! Optimality checks on a solved dual, recomputing decision values from scratch.

#![allow(dead_code)]

pub struct KktReport {
    pub equality_residual: f64,
    pub worst_box_excess: f64,
    pub worst_violation: f64,
}

/// `z` standardized rows, `y` in {+1, -1}, `alpha` the multipliers of every row.
pub fn check(z: &[Vec<f64>], y: &[f64], alpha: &[f64], bias: f64, gamma: f64, c: f64) -> KktReport {
    let n = z.len();
    let equality_residual = alpha.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs();
    let worst_box_excess = alpha.iter().map(|&a| (-a).max(a - c).max(0.0)).fold(0.0, f64::max);
    let mut worst_violation: f64 = 0.0;
    for i in 0..n {
        let mut f = bias;
        for j in 0..n {
            if alpha[j] != 0.0 {
                let d2: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                f += alpha[j] * y[j] * (-gamma * d2).exp();
            }
        }
        let m = y[i] * f;
        let v = if alpha[i] <= 0.0 {
            1.0 - m
        } else if alpha[i] >= c {
            m - 1.0
        } else {
            (m - 1.0).abs()
        };
        worst_violation = worst_violation.max(v);
    }
    KktReport { equality_residual, worst_box_excess, worst_violation }
}
