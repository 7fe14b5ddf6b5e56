//! Labels, samples, score binarization and train/test splitting.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    High,
    Low,
}

impl Label {
    /// `High = +1`, `Low = -1`.
    pub fn sign(self) -> f64 {
        match self {
            Label::High => 1.0,
            Label::Low => -1.0,
        }
    }

    /// Nonnegative decision values (including exactly zero) map to High.
    pub fn from_decision(f: f64) -> Self {
        if f >= 0.0 {
            Label::High
        } else {
            Label::Low
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::High => "high",
            Label::Low => "low",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "high" => Some(Label::High),
            "low" => Some(Label::Low),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image_path: String,
    pub label: Label,
    pub mean_score: Option<f64>,
    /// `None` until assigned by [`split_balanced`].
    pub split: Option<Split>,
}

impl Sample {
    pub fn new(image_path: impl Into<String>, label: Label) -> Self {
        Self { image_path: image_path.into(), label, mean_score: None, split: None }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }
}

pub fn check_score(score: f64) -> Result<f64> {
    if score.is_finite() && (1.0..=10.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::Manifest(format!("score {score} outside [1, 10]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    name: String,
    samples: Vec<Sample>,
}

impl DatasetManifest {
    /// Rejects repeated image paths and out-of-range scores.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.image_path.as_str()) {
                return Err(Error::Manifest(format!("duplicate image path {}", s.image_path)));
            }
            if let Some(score) = s.mean_score {
                check_score(score)?;
            }
        }
        Ok(Self { name: name.into(), samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples assigned to `split`.
    pub fn subset(&self, split: Split) -> DatasetManifest {
        DatasetManifest {
            name: self.name.clone(),
            samples: self.samples.iter().filter(|s| s.split == Some(split)).cloned().collect(),
        }
    }

    pub fn is_fully_split(&self) -> bool {
        self.samples.iter().all(|s| s.split.is_some())
    }
}

/// `score > 5 + delta` is High, `score < 5 - delta` is Low, anything else is
/// discarded (`None`). With `delta = 0` a score of exactly 5 counts as Low.
pub fn binarize_score(mean_score: f64, delta: f64) -> Option<Label> {
    if mean_score > 5.0 + delta {
        Some(Label::High)
    } else if mean_score < 5.0 - delta || (delta == 0.0 && mean_score == 5.0) {
        Some(Label::Low)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub high: usize,
    pub low: usize,
    pub train: usize,
    pub test: usize,
}

pub fn dataset_stats(m: &DatasetManifest) -> DatasetStats {
    let mut st = DatasetStats::default();
    for s in &m.samples {
        match s.label {
            Label::High => st.high += 1,
            Label::Low => st.low += 1,
        }
        match s.split {
            Some(Split::Train) => st.train += 1,
            Some(Split::Test) => st.test += 1,
            None => {}
        }
    }
    st
}

/// Per-class seeded shuffle; the first `round(train_fraction * class_size)`
/// members of each class go to Train, the rest to Test. Sample order is kept.
pub fn split_balanced(m: &DatasetManifest, train_fraction: f64, seed: u64) -> Result<DatasetManifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = m.samples.clone();
    for label in [Label::High, Label::Low] {
        let mut members: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Split(format!("class {label} has fewer than 2 samples")));
        }
        members.shuffle(&mut rng);
        let n_train = libm::round(train_fraction * members.len() as f64) as usize;
        for (rank, &i) in members.iter().enumerate() {
            samples[i].split = Some(if rank < n_train { Split::Train } else { Split::Test });
        }
    }
    Ok(DatasetManifest { name: m.name.clone(), samples })
}

/// Score-thresholded subset: every scored image outside the `5 ± delta` band.
pub fn build_thresholded<I, P>(name: &str, scored: I, delta: f64) -> Result<DatasetManifest>
where
    I: IntoIterator<Item = (P, f64)>,
    P: Into<String>,
{
    let mut samples = Vec::new();
    for (path, score) in scored {
        check_score(score)?;
        if let Some(label) = binarize_score(score, delta) {
            samples.push(Sample { image_path: path.into(), label, mean_score: Some(score), split: None });
        }
    }
    DatasetManifest::new(name, samples)
}

/// Balanced extremes subset: the top `fraction` of images by mean score as
/// High and the bottom `fraction` as Low. Ties are broken by path.
pub fn build_extremes<I, P>(name: &str, scored: I, fraction: f64) -> Result<DatasetManifest>
where
    I: IntoIterator<Item = (P, f64)>,
    P: Into<String>,
{
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::Manifest(format!("extreme fraction {fraction} outside (0, 0.5]")));
    }
    let mut all: Vec<(String, f64)> = Vec::new();
    for (p, s) in scored {
        all.push((p.into(), check_score(s)?));
    }
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let k = libm::round(fraction * all.len() as f64) as usize;
    let n = all.len();
    let mut samples = Vec::with_capacity(2 * k);
    for (i, (path, score)) in all.into_iter().enumerate() {
        let label = if i < k {
            Label::High
        } else if i >= n - k {
            Label::Low
        } else {
            continue;
        };
        samples.push(Sample { image_path: path, label, mean_score: Some(score), split: None });
    }
    DatasetManifest::new(name, samples)
}
