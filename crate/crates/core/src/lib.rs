//! Numerical core of the aesthetics pipeline.
//!
//! Everything here is pure computation over in-memory buffers: view
//! preprocessing (center crop, bilinear resize, normalization), the
//! deterministic stub backbone, composite-feature assembly, the RBF-kernel
//! SVM trained with SMO, dataset label/split rules and evaluation metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, decoding,
//! ONNX inference, caching and the command line live in the `aescomp`
//! companion crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod backbone;
pub mod compose;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod svm;

pub use backbone::{make_stub_backbone, Backbone, FeatureLayer, FeatureVector, StubBackbone};
pub use compose::{compose, CompositeFeature, ProvenanceEntry, ViewSet};
pub use dataset::{binarize_score, dataset_stats, split_balanced, DatasetManifest, DatasetStats, Label, Sample, Split};
pub use error::{Error, Result};
pub use eval::{evaluate, Confusion, EvalReport};
pub use image::{
    center_crop, prepare_view, resize_bilinear, to_tensor, CropSpec, PreprocessConfig, PreprocessedTensor, RawImage,
    ViewKind,
};
pub use svm::{default_gamma, rbf, train_smo, FeatureMatrix, KernelParams, SmoConfig, Standardizer, SvmModel};
