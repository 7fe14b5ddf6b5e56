//! Composite-feature image aesthetics classification.
//!
//! The numerical pipeline lives in [`aescomp_core`]; this crate adds image
//! decoding, ONNX backbones, the on-disk feature cache, model files, manifest
//! parsing, the evaluation harness and the `aescomp` command line.

pub mod backbones;
pub mod cache;
pub mod cli;
pub mod error;
pub mod harness;
pub mod imageio;
pub mod manifest;
pub mod modelio;

pub use aescomp_core as core;
pub use backbones::{resolve_backbone, BackboneDescriptor, CountingBackbone, OnnxBackbone, Registry};
pub use cache::{CacheKey, FeatureCache};
pub use error::{Error, Result};
pub use harness::{ablation_run, cross_dataset, render_report, ExperimentConfig, Featurizer, ReportRow};
pub use imageio::load_image;
pub use manifest::load_manifest;
pub use modelio::{load_model, save_model};
