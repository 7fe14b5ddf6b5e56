use alloc::format;
use alloc::vec::Vec;

use crate::compose::{CompositeFeature, ProvenanceEntry};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::svm::kernel::{default_gamma, rbf_unchecked, KernelParams};
use crate::svm::smo::{solve_dual, SmoConfig};
use crate::svm::standardize::{fit_standardizer, Standardizer};
use crate::svm::FeatureMatrix;

/// Trained classifier. Support vectors are stored already standardized;
/// `dual_coeffs[i] = alpha_i * y_i` with `+1 = High`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_vectors: FeatureMatrix,
    dual_coeffs: Vec<f64>,
    bias: f64,
    kernel: KernelParams,
    c: f64,
    standardizer: Standardizer,
    provenance: Vec<ProvenanceEntry>,
    converged: bool,
}

impl SvmModel {
    /// Reassembles a model from stored parts, checking the structural invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        support_vectors: FeatureMatrix,
        dual_coeffs: Vec<f64>,
        bias: f64,
        kernel: KernelParams,
        c: f64,
        standardizer: Standardizer,
        provenance: Vec<ProvenanceEntry>,
        converged: bool,
    ) -> Result<Self> {
        if support_vectors.rows() != dual_coeffs.len() {
            return Err(Error::shape(support_vectors.rows(), dual_coeffs.len()));
        }
        if !support_vectors.is_empty() && support_vectors.cols() != standardizer.dim() {
            return Err(Error::shape(standardizer.dim(), support_vectors.cols()));
        }
        let prov_dim: usize = provenance.iter().map(|p| p.dim).sum();
        if !provenance.is_empty() && prov_dim != standardizer.dim() {
            return Err(Error::shape(standardizer.dim(), prov_dim));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if !bias.is_finite() || dual_coeffs.iter().any(|a| !a.is_finite() || *a == 0.0 || a.abs() > c) {
            return Err(Error::InvalidParameter("dual coefficients must be nonzero, finite and within C".into()));
        }
        Ok(Self { support_vectors, dual_coeffs, bias, kernel, c, standardizer, provenance, converged })
    }

    pub fn with_provenance(mut self, provenance: Vec<ProvenanceEntry>) -> Result<Self> {
        let dim: usize = provenance.iter().map(|p| p.dim).sum();
        if dim != self.standardizer.dim() {
            return Err(Error::ModelMismatch(format!(
                "provenance covers {dim} dims, model expects {}",
                self.standardizer.dim()
            )));
        }
        self.provenance = provenance;
        Ok(self)
    }

    pub fn support_vectors(&self) -> &FeatureMatrix {
        &self.support_vectors
    }

    pub fn dual_coeffs(&self) -> &[f64] {
        &self.dual_coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelParams {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn provenance(&self) -> &[ProvenanceEntry] {
        &self.provenance
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    fn decision_standardized(&self, z: &[f64]) -> f64 {
        let gamma = self.kernel.gamma();
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coeffs)
            .map(|(sv, a)| a * rbf_unchecked(sv, z, gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Decision value for a raw (unstandardized) feature row.
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardizer.apply(x)?;
        Ok(self.decision_standardized(&z))
    }

    /// Decision value for a composite feature whose provenance must match the training provenance.
    pub fn decision_value(&self, x: &CompositeFeature) -> Result<f64> {
        if x.provenance() != self.provenance.as_slice() {
            return Err(Error::ModelMismatch(format!(
                "feature provenance {:?} does not match model provenance {:?}",
                x.provenance(),
                self.provenance
            )));
        }
        let z = self.standardizer.apply_f32(x.values())?;
        Ok(self.decision_standardized(&z))
    }

    pub fn predict(&self, x: &CompositeFeature) -> Result<Label> {
        self.decision_value(x).map(Label::from_decision)
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<Label> {
        self.decision_function(x).map(Label::from_decision)
    }
}

fn signed_labels(y: &[Label]) -> Vec<f64> {
    y.iter().map(|l| l.sign()).collect()
}

/// Standardizes `x`, solves the dual with kernel `k` and keeps the nonzero multipliers.
pub fn train_smo(x: &FeatureMatrix, y: &[Label], k: KernelParams, cfg: &SmoConfig) -> Result<SvmModel> {
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.apply_matrix(x)?;
    fit_standardized(&z, y, k, cfg, standardizer)
}

/// Like [`train_smo`] with gamma chosen by [`default_gamma`] on the standardized rows.
pub fn train_default(x: &FeatureMatrix, y: &[Label], cfg: &SmoConfig) -> Result<SvmModel> {
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.apply_matrix(x)?;
    let k = default_gamma(&z)?;
    fit_standardized(&z, y, k, cfg, standardizer)
}

fn fit_standardized(
    z: &FeatureMatrix,
    y: &[Label],
    k: KernelParams,
    cfg: &SmoConfig,
    standardizer: Standardizer,
) -> Result<SvmModel> {
    let ys = signed_labels(y);
    let sol = solve_dual(z, &ys, k.gamma(), cfg)?;
    let mut sv = Vec::new();
    let mut coeffs = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            sv.extend_from_slice(z.row(i));
            coeffs.push(a * ys[i]);
        }
    }
    let support_vectors = FeatureMatrix::new(coeffs.len(), z.cols(), sv)?;
    Ok(SvmModel {
        support_vectors,
        dual_coeffs: coeffs,
        bias: sol.bias,
        kernel: k,
        c: cfg.c,
        standardizer,
        provenance: Vec::new(),
        converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn xor() -> (FeatureMatrix, Vec<Label>) {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        (x, vec![Label::Low, Label::Low, Label::High, Label::High])
    }

    #[test]
    fn two_point_symmetry() {
        let x = FeatureMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let y = [Label::Low, Label::High];
        let cfg = SmoConfig { c: 10.0, ..SmoConfig::default() };
        let m = train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &cfg).unwrap();
        assert_eq!(m.dual_coeffs().len(), 2);
        let a = m.dual_coeffs();
        assert!((a[0] + a[1]).abs() < 1e-12, "{a:?}");
        assert!(m.decision_function(&[0.0]).unwrap().abs() < 1e-9);
        assert_eq!(m.predict_raw(&[-1.0]).unwrap(), Label::Low);
        assert_eq!(m.predict_raw(&[1.0]).unwrap(), Label::High);
    }

    #[test]
    fn xor_is_separable() {
        let (x, y) = xor();
        let cfg = SmoConfig { c: 10.0, ..SmoConfig::default() };
        let m = train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &cfg).unwrap();
        assert!(m.converged());
        for (i, l) in y.iter().enumerate() {
            assert_eq!(m.predict_raw(x.row(i)).unwrap(), *l);
        }
    }

    #[test]
    fn unbounded_support_vector_sits_on_margin() {
        let (x, y) = xor();
        let cfg = SmoConfig { c: 10.0, ..SmoConfig::default() };
        let m = train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &cfg).unwrap();
        for (i, l) in y.iter().enumerate() {
            let f = m.decision_function(x.row(i)).unwrap();
            assert!((f - l.sign()).abs() <= cfg.kkt_tol, "{f}");
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let (x, _) = xor();
        let y = [Label::High; 4];
        assert_eq!(
            train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &SmoConfig::default()),
            Err(Error::DegenerateLabels)
        );
    }

    #[test]
    fn non_finite_features_rejected() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, f64::NAN], vec![1.0, 1.0]]).unwrap();
        let err = train_smo(&x, &[Label::High, Label::Low], KernelParams::new(1.0).unwrap(), &SmoConfig::default());
        assert!(matches!(err, Err(Error::Numerics(_))));
    }

    #[test]
    fn exhausted_passes_flag_non_convergence() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()]).collect();
        let y: Vec<Label> = (0..30).map(|i| if i % 3 == 0 { Label::High } else { Label::Low }).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let cfg = SmoConfig { max_passes: 1, c: 100.0, ..SmoConfig::default() };
        let m = train_smo(&x, &y, KernelParams::new(5.0).unwrap(), &cfg).unwrap();
        assert!(!m.converged());
    }

    #[test]
    fn lru_and_full_cache_train_the_same_model() {
        let rows: Vec<Vec<f64>> =
            (0..40).map(|i| vec![(i as f64 * 0.71).sin(), (i as f64 * 0.23).cos(), i as f64 / 40.0]).collect();
        let y: Vec<Label> = rows.iter().map(|r| Label::from_decision(r[0] * r[1] - 0.1)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let k = KernelParams::new(0.5).unwrap();
        let full = train_smo(&x, &y, k, &SmoConfig::default()).unwrap();
        let lru_cfg =
            SmoConfig { cache: crate::svm::KernelCachePolicy { full_limit: 10, lru_rows: 4 }, ..SmoConfig::default() };
        let lru = train_smo(&x, &y, k, &lru_cfg).unwrap();
        assert_eq!(full, lru);
    }

    #[test]
    fn provenance_must_match() {
        let (x, y) = xor();
        let m = train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &SmoConfig::default()).unwrap();
        let prov = vec![ProvenanceEntry { backbone_id: "a".into(), view: crate::ViewKind::Global, dim: 2 }];
        let m = m.with_provenance(prov).unwrap();
        let fv = crate::FeatureVector::new("b", crate::ViewKind::Global, vec![0.0, 1.0]).unwrap();
        let c = crate::compose(&[fv], crate::ViewSet::GLOBAL).unwrap();
        assert!(matches!(m.decision_value(&c), Err(Error::ModelMismatch(_))));
    }
}
