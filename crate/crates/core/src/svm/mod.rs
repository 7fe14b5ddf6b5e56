//! RBF-kernel soft-margin SVM trained by sequential minimal optimization.
//!
//! Raw composite features are standardized per dimension, the dual
//! problem is solved with a Platt-style SMO loop over a cached kernel
//! matrix, and only the support vectors are kept in the resulting
//! [`SvmModel`].

mod cache;
mod kernel;
mod matrix;
mod model;
mod smo;
mod standardize;

pub use cache::{KernelCache, KernelCachePolicy};
pub use kernel::{default_gamma, rbf, rbf_unchecked, KernelParams};
pub use matrix::FeatureMatrix;
pub use model::{train_default, train_smo, SvmModel};
pub use smo::{dual_objective, solve_dual, DualSolution, SmoConfig};
pub use standardize::{fit_standardizer, Standardizer};
