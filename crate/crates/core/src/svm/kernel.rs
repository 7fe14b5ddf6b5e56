use crate::error::{Error, Result};
use crate::svm::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidParameter(alloc::format!("gamma {gamma} must be positive and finite")))
        }
    }

    pub fn gamma(self) -> f64 {
        self.gamma
    }
}

/// `exp(-gamma * ||x - z||^2)`
pub fn rbf(x: &[f64], z: &[f64], k: KernelParams) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::shape(x.len(), z.len()));
    }
    Ok(rbf_unchecked(x, z, k.gamma))
}

#[inline]
pub fn rbf_unchecked(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::exp(-gamma * d2)
}

/// The "scale" heuristic: `1 / (d * pooled_variance)`, where the pooled
/// variance is the mean of the per-dimension biased variances. Falls back to
/// `1 / d` when every dimension is constant.
pub fn default_gamma(x: &FeatureMatrix) -> Result<KernelParams> {
    if x.is_empty() || x.cols() == 0 {
        return Err(Error::InvalidParameter("default gamma needs a nonempty matrix".into()));
    }
    let n = x.rows() as f64;
    let d = x.cols();
    let mut sum = alloc::vec![0.0f64; d];
    for row in x.iter_rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let means: alloc::vec::Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut var = alloc::vec![0.0f64; d];
    for row in x.iter_rows() {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&means) {
            *acc += (v - m) * (v - m);
        }
    }
    let pooled = var.iter().map(|v| v / n).sum::<f64>() / d as f64;
    let gamma = if pooled > 0.0 { 1.0 / (d as f64 * pooled) } else { 1.0 / d as f64 };
    KernelParams::new(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rbf_values() {
        let k = KernelParams::new(0.5).unwrap();
        assert_eq!(rbf(&[0.3, -2.0], &[0.3, -2.0], k).unwrap(), 1.0);
        let v = rbf(&[0.0, 0.0], &[1.0, 0.0], k).unwrap();
        assert!((v - 0.6065306597126334).abs() < 1e-15);
        let far = rbf(&[0.0], &[1.0], KernelParams::new(100.0).unwrap()).unwrap();
        assert!((far / 3.720075976020836e-44 - 1.0).abs() < 1e-12);
        assert!(matches!(rbf(&[0.0], &[0.0, 1.0], k), Err(Error::Shape { .. })));
    }

    #[test]
    fn gamma_validation() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(f64::INFINITY).is_err());
        assert!(KernelParams::new(-1.0).is_err());
    }

    #[test]
    fn default_gamma_cases() {
        // unit pooled variance in 4-d: each column is {-1, +1}
        let x = FeatureMatrix::from_rows(&[vec![1.0, -1.0, 1.0, -1.0], vec![-1.0, 1.0, -1.0, 1.0]]).unwrap();
        assert!((default_gamma(&x).unwrap().gamma() - 0.25).abs() < 1e-15);

        let constant = FeatureMatrix::from_rows(&[vec![3.0; 10], vec![3.0; 10], vec![3.0; 10]]).unwrap();
        assert!((default_gamma(&constant).unwrap().gamma() - 0.1).abs() < 1e-15);

        // biased variances (1, 0) -> pooled 0.5, d = 2 -> gamma 1
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!((default_gamma(&x).unwrap().gamma() - 1.0).abs() < 1e-15);
    }
}
