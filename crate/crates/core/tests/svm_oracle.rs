//! SMO against an independent projected-gradient solver of the same dual.

#[path = "oracles/dual.rs"]
mod dual;

use aescomp_core::svm::{train_smo, FeatureMatrix, KernelParams, SmoConfig, SvmModel};
use aescomp_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points in `[-1, 1]^d` labelled by a random affine rule, both classes present.
fn linear_rule_dataset(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: f64 = rng.random_range(-0.3..0.3);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| if r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        if y.contains(&1.0) && y.contains(&-1.0) {
            return (x, y);
        }
    }
}

fn labels(y: &[f64]) -> Vec<Label> {
    y.iter().map(|&v| if v > 0.0 { Label::High } else { Label::Low }).collect()
}

/// Dual objective of a stored model, recomputed from its support vectors.
fn model_objective(m: &SvmModel) -> f64 {
    let sv: Vec<Vec<f64>> = m.support_vectors().iter_rows().map(<[f64]>::to_vec).collect();
    let k = dual::gram(&sv, m.kernel().gamma());
    let c = m.dual_coeffs();
    let mut quad = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            quad += c[i] * c[j] * k[i][j];
        }
    }
    c.iter().map(|a| a.abs()).sum::<f64>() - 0.5 * quad
}

/// Objective gaps below 1e-6 need a tighter KKT tolerance than the 1e-3
/// default, which on these sets leaves up to a few 1e-6 on the table.
const ORACLE_KKT_TOL: f64 = 1e-5;

fn compare(cfg: &SmoConfig, min_gap: f64) {
    let gamma = 1.0 / 3.0;
    for seed in 0..20 {
        let (x, y) = linear_rule_dataset(seed, 12, 3);
        let z = dual::standardize(&x);
        let k = dual::gram(&z, gamma);
        let oracle = dual::projected_gradient_ascent(&k, &y, cfg.c, 1e-3, 1_000_000);

        let m = train_smo(&FeatureMatrix::from_rows(&z).unwrap(), &labels(&y), KernelParams::new(gamma).unwrap(), cfg)
            .unwrap();
        let smo_obj = model_objective(&m);
        assert!(
            smo_obj >= oracle.objective - min_gap,
            "seed {seed}: smo {smo_obj} < oracle {} (iters {})",
            oracle.objective,
            oracle.iterations
        );
        for (i, row) in z.iter().enumerate() {
            let f_oracle = dual::decision(&oracle.alpha, &y, &k[i], oracle.bias);
            let f_smo = m.decision_function(row).unwrap();
            assert_eq!(f_oracle >= 0.0, f_smo >= 0.0, "seed {seed} point {i}: {f_oracle} vs {f_smo}");
        }
    }
}

#[test]
fn smo_matches_projected_gradient_on_random_sets() {
    compare(&SmoConfig { kkt_tol: ORACLE_KKT_TOL, ..SmoConfig::default() }, 1e-6);
}

#[test]
fn default_tolerance_stays_close_to_oracle() {
    compare(&SmoConfig::default(), 1e-5);
}
