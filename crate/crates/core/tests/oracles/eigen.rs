//! Smallest eigenvalue of a symmetric matrix through nalgebra.

#![allow(dead_code)]

pub fn min_eigenvalue(k: &[Vec<f64>]) -> f64 {
    let n = k.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| k[i][j]);
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
