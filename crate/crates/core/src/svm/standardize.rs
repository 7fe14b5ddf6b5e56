use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::svm::FeatureMatrix;

/// Per-dimension centering and scaling fitted on training data.
/// Zero-variance dimensions keep `std = 1` and are only centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    pub fn new(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(Error::shape(means.len(), stds.len()));
        }
        if stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("standardizer statistics must be finite with stds > 0".into()));
        }
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(self.dim(), x.len()));
        }
        Ok(x.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect())
    }

    pub fn apply_f32(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(self.dim(), x.len()));
        }
        Ok(x.iter().zip(&self.means).zip(&self.stds).map(|((&v, m), s)| (v as f64 - m) / s).collect())
    }

    pub fn apply_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::shape(self.dim(), x.cols()));
        }
        Ok(x.map_rows(|src, dst| {
            for (((d, v), m), s) in dst.iter_mut().zip(src).zip(&self.means).zip(&self.stds) {
                *d = (v - m) / s;
            }
        }))
    }
}

/// Biased (population) mean and standard deviation per column.
pub fn fit_standardizer(x: &FeatureMatrix) -> Result<Standardizer> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("cannot fit a standardizer on zero rows".into()));
    }
    let n = x.rows() as f64;
    let d = x.cols();
    let mut means = alloc::vec![0.0f64; d];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);

    let mut var = alloc::vec![0.0f64; d];
    for row in x.iter_rows() {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&means) {
            *acc += (v - m) * (v - m);
        }
    }
    let stds = var
        .into_iter()
        .map(|v| {
            let s = libm::sqrt(v / n);
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::Numerics("feature matrix"));
    }
    Standardizer::new(means, stds)
}
