//! Feature extractors.
//!
//! A [`Backbone`] turns one preprocessed tensor into one feature vector. Real
//! networks are provided by the `aescomp` crate through ONNX; this module holds
//! the trait, the vector type and [`StubBackbone`], a seeded random ±1
//! projection that stands in for a pretrained network in tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{CropSpec, PreprocessConfig, PreprocessedTensor, ViewKind, IMAGENET_MEANS, IMAGENET_STDS};

/// Where activations are read from inside a pretrained network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureLayer {
    /// Output of the first fully connected layer, after its nonlinearity (4096-d on AlexNet/VGG-16).
    FirstFullyConnected,
    /// Penultimate global average pool (2048-d on ResNet-50).
    GlobalAveragePool,
}

impl FeatureLayer {
    pub fn name(self) -> &'static str {
        match self {
            FeatureLayer::FirstFullyConnected => "FirstFullyConnected",
            FeatureLayer::GlobalAveragePool => "GlobalAveragePool",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    backbone_id: String,
    view: ViewKind,
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(backbone_id: impl Into<String>, view: ViewKind, values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("feature vector must be nonempty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("feature vector"));
        }
        Ok(Self { backbone_id: backbone_id.into(), view, values })
    }

    pub fn backbone_id(&self) -> &str {
        &self.backbone_id
    }

    pub fn view(&self) -> ViewKind {
        self.view
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// Input contract of a backbone: square side and per-channel normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSpec {
    pub input_size: u32,
    pub channel_means: [f64; 3],
    pub channel_stds: [f64; 3],
}

impl InputSpec {
    pub fn preprocess_config(&self, crop: CropSpec) -> Result<PreprocessConfig> {
        PreprocessConfig::new(self.input_size, self.channel_means, self.channel_stds, crop)
    }
}

/// A pretrained feature extractor. Implementations must be pure: the same
/// tensor always produces a bit-identical vector, and concurrent calls are safe.
pub trait Backbone: Send + Sync {
    fn id(&self) -> &str;

    fn feature_dim(&self) -> usize;

    fn input_spec(&self) -> InputSpec;

    fn extract(&self, tensor: &PreprocessedTensor, view: ViewKind) -> Result<FeatureVector>;
}

/// xorshift64* generator; a zero seed is replaced by a fixed odd constant
/// since the all-zero state is a fixed point.
#[derive(Debug, Clone)]
pub struct XorShift64Star(u64);

impl XorShift64Star {
    const ZERO_SEED_REPLACEMENT: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self(if seed == 0 { Self::ZERO_SEED_REPLACEMENT } else { seed })
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
}

/// Linear stand-in backbone: `M · flatten(tensor) / sqrt(n)` with `M` a
/// `dim × n` matrix of ±1 signs drawn row-major from xorshift64*, one draw
/// per entry, top bit set meaning −1.
pub struct StubBackbone {
    id: String,
    seed: u64,
    dim: usize,
    input_size: u32,
    n: usize,
    words_per_row: usize,
    // bit set = -1
    signs: Vec<u64>,
}

impl core::fmt::Debug for StubBackbone {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("StubBackbone")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("input_size", &self.input_size)
            .finish_non_exhaustive()
    }
}

pub fn make_stub_backbone(seed: u64, dim: usize, input_size: u32) -> Result<StubBackbone> {
    if dim == 0 {
        return Err(Error::InvalidParameter("stub backbone dim must be at least 1".into()));
    }
    if input_size == 0 {
        return Err(Error::InvalidParameter("stub backbone input size must be at least 1".into()));
    }
    let side = input_size as usize;
    let n = 3 * side * side;
    let words_per_row = n.div_ceil(64);
    let mut signs = alloc::vec![0u64; dim * words_per_row];
    let mut rng = XorShift64Star::new(seed);
    for row in signs.chunks_exact_mut(words_per_row) {
        for j in 0..n {
            if rng.next_u64() >> 63 == 1 {
                row[j / 64] |= 1 << (j % 64);
            }
        }
    }
    Ok(StubBackbone { id: format!("stub:{seed}:{dim}:{input_size}"), seed, dim, input_size, n, words_per_row, signs })
}

impl StubBackbone {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry `(row, col)` of the projection matrix, as ±1.
    pub fn sign(&self, row: usize, col: usize) -> i8 {
        let word = self.signs[row * self.words_per_row + col / 64];
        if (word >> (col % 64)) & 1 == 1 {
            -1
        } else {
            1
        }
    }
}

impl Backbone for StubBackbone {
    fn id(&self) -> &str {
        &self.id
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn input_spec(&self) -> InputSpec {
        InputSpec { input_size: self.input_size, channel_means: IMAGENET_MEANS, channel_stds: IMAGENET_STDS }
    }

    fn extract(&self, tensor: &PreprocessedTensor, view: ViewKind) -> Result<FeatureVector> {
        if tensor.side() != self.input_size as usize {
            return Err(Error::shape(self.input_size as usize, tensor.side()));
        }
        let x = tensor.values();
        let scale = 1.0 / libm::sqrt(self.n as f64);
        let mut out = Vec::with_capacity(self.dim);
        for row in self.signs.chunks_exact(self.words_per_row) {
            let mut acc = 0.0f64;
            for (w, chunk) in row.iter().zip(x.chunks(64)) {
                for (b, &v) in chunk.iter().enumerate() {
                    let v = v as f64;
                    if (w >> b) & 1 == 1 {
                        acc -= v;
                    } else {
                        acc += v;
                    }
                }
            }
            out.push((acc * scale) as f32);
        }
        FeatureVector::new(self.id.clone(), view, out)
    }
}
