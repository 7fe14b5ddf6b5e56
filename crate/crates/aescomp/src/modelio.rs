//! JSON model files.
//!
//! Every real is written in scientific notation with 17 significant digits,
//! enough for any f64 to read back to the same bits.

use std::io::{self, Write};
use std::path::Path;

use aescomp_core::svm::{FeatureMatrix, KernelParams, Standardizer, SvmModel};
use aescomp_core::{ProvenanceEntry, ViewKind};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct StandardizerJson {
    means: Vec<f64>,
    stds: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProvenanceJson {
    backbone_id: String,
    view: String,
    dim: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct LabelMap {
    #[serde(rename = "+1")]
    pos: String,
    #[serde(rename = "-1")]
    neg: String,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self { pos: "high".into(), neg: "low".into() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelJson {
    format_version: u32,
    gamma: f64,
    bias: f64,
    #[serde(rename = "C")]
    c: f64,
    dual_coeffs: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    standardizer: StandardizerJson,
    provenance: Vec<ProvenanceJson>,
    label_map: LabelMap,
    converged: bool,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

/// Compact JSON with 17-significant-digit reals.
struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn model_to_json(m: &SvmModel) -> String {
    let j = ModelJson {
        format_version: FORMAT_VERSION,
        gamma: m.kernel().gamma(),
        bias: m.bias(),
        c: m.c(),
        dual_coeffs: m.dual_coeffs().to_vec(),
        support_vectors: m.support_vectors().iter_rows().map(<[f64]>::to_vec).collect(),
        standardizer: StandardizerJson {
            means: m.standardizer().means().to_vec(),
            stds: m.standardizer().stds().to_vec(),
        },
        provenance: m
            .provenance()
            .iter()
            .map(|p| ProvenanceJson { backbone_id: p.backbone_id.clone(), view: p.view.name().into(), dim: p.dim })
            .collect(),
        label_map: LabelMap::default(),
        converged: m.converged(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    j.serialize(&mut ser).expect("model serializes");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn model_from_json(text: &str) -> Result<SvmModel> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if probe.format_version != u64::from(FORMAT_VERSION) {
        return Err(Error::Format(format!(
            "model format_version {} is not supported (expected {FORMAT_VERSION})",
            probe.format_version
        )));
    }
    let j: ModelJson = serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if j.label_map != LabelMap::default() {
        return Err(Error::Format(r#"label_map must be {"+1": "high", "-1": "low"}"#.into()));
    }
    let bad = |e: aescomp_core::Error| Error::Format(format!("model file: {e}"));
    let provenance = j
        .provenance
        .into_iter()
        .map(|p| {
            let view =
                ViewKind::from_name(&p.view).ok_or_else(|| Error::Format(format!("unknown view {:?}", p.view)))?;
            Ok(ProvenanceEntry { backbone_id: p.backbone_id, view, dim: p.dim })
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = j.standardizer.means.len();
    let rows = j.support_vectors.len();
    if let Some(r) = j.support_vectors.iter().find(|r| r.len() != dim) {
        return Err(Error::Format(format!("support vector of length {} in a {dim}-d model", r.len())));
    }
    let flat: Vec<f64> = j.support_vectors.into_iter().flatten().collect();
    let sv = FeatureMatrix::new(rows, dim, flat).map_err(bad)?;
    let standardizer = Standardizer::new(j.standardizer.means, j.standardizer.stds).map_err(bad)?;
    let kernel = KernelParams::new(j.gamma).map_err(bad)?;
    SvmModel::from_parts(sv, j.dual_coeffs, j.bias, kernel, j.c, standardizer, provenance, j.converged).map_err(bad)
}

pub fn save_model(m: &SvmModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
