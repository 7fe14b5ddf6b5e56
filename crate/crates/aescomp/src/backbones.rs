//! Backbone descriptors, the ONNX adapter and id resolution.
//!
//! CLI commands name backbones by id. An id is either `stub:<seed>[:<dim>[:<input_size>]]`
//! or a key of the descriptor registry, a JSON array of descriptor objects.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use aescomp_core::backbone::InputSpec;
use aescomp_core::{make_stub_backbone, Backbone, FeatureLayer, FeatureVector, PreprocessedTensor, ViewKind};
use serde::{Deserialize, Serialize};
use tract_onnx::prelude::*;

use crate::error::{Error, Result};

pub const STUB_DEFAULT_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum LayerName {
    FirstFullyConnected,
    GlobalAveragePool,
}

impl From<LayerName> for FeatureLayer {
    fn from(l: LayerName) -> Self {
        match l {
            LayerName::FirstFullyConnected => FeatureLayer::FirstFullyConnected,
            LayerName::GlobalAveragePool => FeatureLayer::GlobalAveragePool,
        }
    }
}

impl From<FeatureLayer> for LayerName {
    fn from(l: FeatureLayer) -> Self {
        match l {
            FeatureLayer::FirstFullyConnected => LayerName::FirstFullyConnected,
            FeatureLayer::GlobalAveragePool => LayerName::GlobalAveragePool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawDescriptor {
    id: String,
    graph_path: PathBuf,
    feature_layer: LayerName,
    feature_dim: usize,
    input_size: u32,
    channel_means: [f64; 3],
    channel_stds: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opset: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneDescriptor {
    pub id: String,
    pub graph_path: PathBuf,
    pub feature_layer: FeatureLayer,
    pub feature_dim: usize,
    pub input_size: u32,
    pub channel_means: [f64; 3],
    pub channel_stds: [f64; 3],
    /// Highest default-domain opset the graph may import.
    pub opset: Option<i64>,
}

impl BackboneDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.starts_with("stub:") {
            return Err(Error::Config(format!("invalid descriptor id {:?}", self.id)));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config(format!("{}: feature_dim must be positive", self.id)));
        }
        self.input_spec().preprocess_config(Default::default())?;
        Ok(())
    }

    pub fn input_spec(&self) -> InputSpec {
        InputSpec { input_size: self.input_size, channel_means: self.channel_means, channel_stds: self.channel_stds }
    }
}

impl From<RawDescriptor> for BackboneDescriptor {
    fn from(r: RawDescriptor) -> Self {
        Self {
            id: r.id,
            graph_path: r.graph_path,
            feature_layer: r.feature_layer.into(),
            feature_dim: r.feature_dim,
            input_size: r.input_size,
            channel_means: r.channel_means,
            channel_stds: r.channel_stds,
            opset: r.opset,
        }
    }
}

impl From<&BackboneDescriptor> for RawDescriptor {
    fn from(d: &BackboneDescriptor) -> Self {
        Self {
            id: d.id.clone(),
            graph_path: d.graph_path.clone(),
            feature_layer: d.feature_layer.into(),
            feature_dim: d.feature_dim,
            input_size: d.input_size,
            channel_means: d.channel_means,
            channel_stds: d.channel_stds,
            opset: d.opset,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    entries: BTreeMap<String, BackboneDescriptor>,
}

impl Registry {
    /// Reads a registry file. Relative graph paths are taken relative to the registry's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let raw: Vec<RawDescriptor> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("descriptor registry: {e}")))?;
        let mut entries = BTreeMap::new();
        for r in raw {
            let mut d = BackboneDescriptor::from(r);
            if d.graph_path.is_relative() {
                d.graph_path = base.join(&d.graph_path);
            }
            d.validate()?;
            if entries.contains_key(&d.id) {
                return Err(Error::Config(format!("duplicate backbone id {}", d.id)));
            }
            entries.insert(d.id.clone(), d);
        }
        Ok(Self { entries })
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<RawDescriptor> = self.entries.values().map(RawDescriptor::from).collect();
        serde_json::to_string_pretty(&raw).expect("descriptors serialize")
    }

    pub fn insert(&mut self, d: BackboneDescriptor) -> Result<()> {
        d.validate()?;
        if self.entries.contains_key(&d.id) {
            return Err(Error::Config(format!("duplicate backbone id {}", d.id)));
        }
        self.entries.insert(d.id.clone(), d);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&BackboneDescriptor> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Parses `stub:<seed>[:<dim>[:<input_size>]]`; `None` if `id` is not a stub id.
pub fn parse_stub_id(id: &str) -> Option<Result<(u64, usize, u32)>> {
    let rest = id.strip_prefix("stub:")?;
    let bad = || Error::Config(format!("malformed stub backbone id {id:?}"));
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.is_empty() || parts.len() > 3 {
        return Some(Err(bad()));
    }
    let parsed = (|| {
        let seed = parts[0].parse().ok()?;
        let dim = parts.get(1).map_or(Some(STUB_DEFAULT_DIM), |s| s.parse().ok())?;
        let size = parts.get(2).map_or(Some(aescomp_core::image::DEFAULT_INPUT_SIZE), |s| s.parse().ok())?;
        Some((seed, dim, size))
    })();
    Some(parsed.ok_or_else(bad))
}

/// Builds a backbone from an id: stub ids directly, anything else through the registry.
pub fn resolve_backbone(id: &str, registry: Option<&Registry>) -> Result<Arc<dyn Backbone>> {
    if let Some(stub) = parse_stub_id(id) {
        let (seed, dim, size) = stub?;
        return Ok(Arc::new(make_stub_backbone(seed, dim, size)?));
    }
    let desc = registry
        .and_then(|r| r.get(id))
        .ok_or_else(|| Error::Config(format!("unknown backbone id {id:?} (no registry entry)")))?;
    Ok(Arc::new(OnnxBackbone::load(desc)?))
}

type Plan = Arc<TypedRunnableModel>;

/// An ONNX graph taking a `[1, 3, S, S]` float tensor and emitting the feature layer.
pub struct OnnxBackbone {
    desc: BackboneDescriptor,
    plan: Plan,
}

impl std::fmt::Debug for OnnxBackbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackbone").field("desc", &self.desc).finish_non_exhaustive()
    }
}

fn onnx_err(e: impl std::fmt::Display) -> Error {
    Error::Onnx(e.to_string())
}

impl OnnxBackbone {
    pub fn load(desc: &BackboneDescriptor) -> Result<Self> {
        desc.validate()?;
        let path = &desc.graph_path;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let onnx = tract_onnx::onnx();
        let proto = onnx.proto_model_for_read(&mut bytes.as_slice()).map_err(onnx_err)?;
        if let Some(pin) = desc.opset {
            let imported = proto
                .opset_import
                .iter()
                .filter(|o| o.domain.is_empty() || o.domain == "ai.onnx")
                .map(|o| o.version)
                .max();
            if let Some(v) = imported.filter(|&v| v > pin) {
                return Err(Error::DescriptorMismatch(format!(
                    "{}: graph imports opset {v}, descriptor pins {pin}",
                    desc.id
                )));
            }
        }
        let s = desc.input_size as usize;
        let model = onnx
            .model_for_proto_model(&proto)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, s, s]).into()))
            .and_then(|m| m.into_optimized())
            .map_err(onnx_err)?;
        let out = model.output_fact(0).map_err(onnx_err)?;
        let shape =
            out.shape.as_concrete().ok_or_else(|| Error::Onnx(format!("{}: output shape is not concrete", desc.id)))?;
        let produced: usize = shape.iter().product();
        if produced != desc.feature_dim {
            return Err(Error::DescriptorMismatch(format!(
                "{}: graph emits {produced} values ({shape:?}), descriptor says {}",
                desc.id, desc.feature_dim
            )));
        }
        let plan = model.into_runnable().map_err(onnx_err)?;
        Ok(Self { desc: desc.clone(), plan })
    }

    pub fn descriptor(&self) -> &BackboneDescriptor {
        &self.desc
    }

    fn run(&self, tensor: &PreprocessedTensor) -> Result<Vec<f32>> {
        let s = tensor.side();
        let input = Tensor::from_shape(&[1, 3, s, s], tensor.values()).map_err(onnx_err)?;
        let out = self.plan.run(tvec!(input.into_tvalue())).map_err(onnx_err)?;
        let view = out[0].to_plain_array_view::<f32>().map_err(onnx_err)?;
        Ok(view.iter().copied().collect())
    }
}

impl Backbone for OnnxBackbone {
    fn id(&self) -> &str {
        &self.desc.id
    }

    fn feature_dim(&self) -> usize {
        self.desc.feature_dim
    }

    fn input_spec(&self) -> InputSpec {
        self.desc.input_spec()
    }

    fn extract(&self, tensor: &PreprocessedTensor, view: ViewKind) -> aescomp_core::Result<FeatureVector> {
        let want = self.desc.input_size as usize;
        if tensor.side() != want {
            return Err(aescomp_core::Error::Shape { expected: want, actual: tensor.side() });
        }
        let values = self.run(tensor).map_err(|e| aescomp_core::Error::Backbone(e.to_string()))?;
        if values.len() != self.desc.feature_dim {
            return Err(aescomp_core::Error::Shape { expected: self.desc.feature_dim, actual: values.len() });
        }
        FeatureVector::new(self.desc.id.clone(), view, values)
    }
}

/// Wraps a backbone and counts `extract` calls.
pub struct CountingBackbone {
    inner: Arc<dyn Backbone>,
    calls: AtomicUsize,
}

impl CountingBackbone {
    pub fn new(inner: Arc<dyn Backbone>) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Backbone for CountingBackbone {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn input_spec(&self) -> InputSpec {
        self.inner.input_spec()
    }

    fn extract(&self, tensor: &PreprocessedTensor, view: ViewKind) -> aescomp_core::Result<FeatureVector> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.extract(tensor, view)
    }
}
