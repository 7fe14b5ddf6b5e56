//! Manifest CSV files.
//!
//! Header `image_path,label,split` (label `high`/`low`) or `image_path,score,split`
//! (mean score in [1, 10], binarized around 5 with the margin from an optional
//! `# delta=<x>` comment line). The split column may be empty or absent.
//! Image paths are kept exactly as written.

use std::fmt::Write as _;
use std::path::Path;

use aescomp_core::dataset::check_score;
use aescomp_core::{binarize_score, DatasetManifest, Label, Sample, Split};

use crate::error::{Error, Result};

fn merr(src: &str, msg: impl std::fmt::Display) -> Error {
    Error::Manifest(format!("{src}: {msg}"))
}

/// Reads a manifest; the dataset name is the file stem. Any IO failure is a ManifestError.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let src = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| merr(&src, e))?;
    let name = path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_manifest(&name, &text, &src)
}

fn delta_from_comments(text: &str, src: &str) -> Result<f64> {
    let mut delta = 0.0;
    for line in text.lines() {
        let Some(comment) = line.trim_start().strip_prefix('#') else { continue };
        if let Some(v) = comment.trim().strip_prefix("delta=") {
            delta = v.trim().parse::<f64>().map_err(|e| merr(src, format!("bad delta {v:?}: {e}")))?;
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(merr(src, format!("delta {delta} must be finite and nonnegative")));
            }
        }
    }
    Ok(delta)
}

enum LabelColumn {
    Label,
    Score,
}

pub fn parse_manifest(name: &str, text: &str, src: &str) -> Result<DatasetManifest> {
    let delta = delta_from_comments(text, src)?;
    let mut rdr =
        csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(false).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| merr(src, e))?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let path_col = col("image_path").ok_or_else(|| merr(src, "missing image_path column"))?;
    let (kind, value_col) = match (col("label"), col("score")) {
        (Some(i), None) => (LabelColumn::Label, i),
        (None, Some(i)) => (LabelColumn::Score, i),
        (Some(_), Some(_)) => return Err(merr(src, "both label and score columns present")),
        (None, None) => return Err(merr(src, "missing label or score column")),
    };
    let split_col = col("split");

    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| merr(src, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| merr(src, format!("line {line}: {msg}"));
        let path = rec.get(path_col).unwrap_or("");
        if path.is_empty() {
            return Err(at("empty image_path".into()));
        }
        let raw = rec.get(value_col).unwrap_or("");
        let (label, score) = match kind {
            LabelColumn::Label => {
                (Label::parse(raw).ok_or_else(|| at(format!("label {raw:?} is not high or low")))?, None)
            }
            LabelColumn::Score => {
                let s: f64 = raw.parse().map_err(|_| at(format!("score {raw:?} is not a number")))?;
                check_score(s).map_err(|e| at(e.to_string()))?;
                match binarize_score(s, delta) {
                    Some(l) => (l, Some(s)),
                    None => continue,
                }
            }
        };
        let split = match split_col.and_then(|i| rec.get(i)).unwrap_or("") {
            "" => None,
            s => Some(Split::parse(s).ok_or_else(|| at(format!("split {s:?} is not train or test")))?),
        };
        samples.push(Sample { image_path: path.to_string(), label, mean_score: score, split });
    }
    DatasetManifest::new(name, samples).map_err(|e| merr(src, e))
}

/// Label-form CSV for a manifest; scores are not written.
pub fn manifest_to_csv(m: &DatasetManifest) -> String {
    let mut out = String::from("image_path,label,split\n");
    for s in m.samples() {
        let split = s.split.map_or("", Split::name);
        let _ = writeln!(out, "{},{},{split}", csv_field(&s.image_path), s.label);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.starts_with('#') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn save_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    std::fs::write(path, manifest_to_csv(m)).map_err(|e| Error::io(path, e))
}

/// Training rows of a manifest: the Train subset when every sample has a
/// split, or a fresh balanced split when none has.
pub fn resolve_splits(m: &DatasetManifest, train_fraction: f64, seed: u64) -> Result<DatasetManifest> {
    let assigned = m.samples().iter().filter(|s| s.split.is_some()).count();
    if assigned == m.len() {
        Ok(m.clone())
    } else if assigned == 0 {
        Ok(aescomp_core::split_balanced(m, train_fraction, seed)?)
    } else {
        Err(Error::Manifest(format!("{}: split column filled for only {assigned} of {} rows", m.name(), m.len())))
    }
}
