//! Composite features: ordered concatenation of per-view vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::backbone::FeatureVector;
use crate::error::{Error, Result};
use crate::image::ViewKind;

/// Nonempty set of views, always iterated in canonical G, L, S order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewSet(u8);

impl ViewSet {
    pub const GLOBAL: ViewSet = ViewSet(0b001);
    pub const ALL: ViewSet = ViewSet(0b111);

    /// Rejects empty input and duplicates; any input order is accepted and canonicalized.
    pub fn new(views: &[ViewKind]) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Composition("view set must be nonempty".into()));
        }
        let mut bits = 0u8;
        for v in views {
            let bit = 1 << v.index();
            if bits & bit != 0 {
                return Err(Error::Composition(format!("duplicate view {v}")));
            }
            bits |= bit;
        }
        Ok(Self(bits))
    }

    /// Parses letter codes such as `"GLS"`, `"G+S"` or `"gl"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut views = Vec::new();
        for c in s.chars().filter(|c| *c != '+') {
            views.push(
                ViewKind::from_letter(c)
                    .ok_or_else(|| Error::Composition(format!("unknown view letter {c:?} in {s:?}")))?,
            );
        }
        Self::new(&views)
    }

    pub fn contains(self, v: ViewKind) -> bool {
        self.0 & (1 << v.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ViewKind> {
        ViewKind::ALL.into_iter().filter(move |v| self.contains(*v))
    }

    pub fn union(self, other: ViewSet) -> ViewSet {
        ViewSet(self.0 | other.0)
    }

    /// Compact code, e.g. `GLS`.
    pub fn code(self) -> String {
        self.iter().map(ViewKind::letter).collect()
    }
}

/// Renders as `G+L+S`.
impl fmt::Display for ViewSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}", v.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ViewSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ViewSet({self})")
    }
}

/// One concatenated block of a composite feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProvenanceEntry {
    pub backbone_id: String,
    pub view: ViewKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFeature {
    view_set: ViewSet,
    values: Vec<f32>,
    provenance: Vec<ProvenanceEntry>,
}

impl CompositeFeature {
    pub fn view_set(&self) -> ViewSet {
        self.view_set
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn provenance(&self) -> &[ProvenanceEntry] {
        &self.provenance
    }

    /// The block contributed by `view`, if present.
    pub fn slice(&self, view: ViewKind) -> Option<&[f32]> {
        let mut start = 0;
        for p in &self.provenance {
            if p.view == view {
                return Some(&self.values[start..start + p.dim]);
            }
            start += p.dim;
        }
        None
    }

    /// Splits back into the constituent per-view vectors.
    pub fn parts(&self) -> Vec<FeatureVector> {
        let mut start = 0;
        self.provenance
            .iter()
            .map(|p| {
                let v = self.values[start..start + p.dim].to_vec();
                start += p.dim;
                FeatureVector::new(p.backbone_id.clone(), p.view, v).expect("composite blocks are valid vectors")
            })
            .collect()
    }
}

/// Concatenates `parts`, which must match `views` one-to-one in canonical order.
pub fn compose<P: AsRef<FeatureVector>>(parts: &[P], views: ViewSet) -> Result<CompositeFeature> {
    if parts.len() != views.len() {
        return Err(Error::Composition(format!("{} feature vectors supplied for view set {views}", parts.len())));
    }
    let dim = parts.iter().map(|p| p.as_ref().dim()).sum();
    let mut values = Vec::with_capacity(dim);
    let mut provenance = Vec::with_capacity(parts.len());
    for (part, view) in parts.iter().map(AsRef::as_ref).zip(views.iter()) {
        if part.view() != view {
            return Err(Error::Composition(format!(
                "expected {view} features in position {}, got {}",
                provenance.len(),
                part.view()
            )));
        }
        values.extend_from_slice(part.values());
        provenance.push(ProvenanceEntry { backbone_id: part.backbone_id().into(), view, dim: part.dim() });
    }
    Ok(CompositeFeature { view_set: views, values, provenance })
}

impl AsRef<FeatureVector> for FeatureVector {
    fn as_ref(&self) -> &FeatureVector {
        self
    }
}
