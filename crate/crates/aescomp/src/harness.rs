//! Featurization over manifests, training, evaluation and ablations.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use aescomp_core::svm::{train_default, FeatureMatrix, SmoConfig, SvmModel};
use aescomp_core::{
    compose, evaluate, prepare_view, Backbone, CompositeFeature, CropSpec, DatasetManifest, EvalReport, FeatureVector,
    Label, RawImage, ViewKind, ViewSet,
};
use rayon::prelude::*;

use crate::cache::{preprocess_hash, sha256, CacheKey, FeatureCache, Hash32};
use crate::error::{Error, Result};
use crate::imageio::decode_image;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeaturizeStats {
    pub images: usize,
    pub vectors: usize,
    pub cache_hits: usize,
    pub extracted: usize,
}

/// Turns images into per-view feature vectors: content backbone for the global
/// and local views, scene backbone for the scene view.
pub struct Featurizer {
    content: Arc<dyn Backbone>,
    scene: Option<Arc<dyn Backbone>>,
    crop: CropSpec,
    cache: Option<Arc<FeatureCache>>,
    pool: rayon::ThreadPool,
    hits: AtomicUsize,
    extracted: AtomicUsize,
}

impl Featurizer {
    /// `jobs = 0` uses one worker per core.
    pub fn new(
        content: Arc<dyn Backbone>,
        scene: Option<Arc<dyn Backbone>>,
        crop: CropSpec,
        cache: Option<Arc<FeatureCache>>,
        jobs: usize,
    ) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Self { content, scene, crop, cache, pool, hits: AtomicUsize::new(0), extracted: AtomicUsize::new(0) })
    }

    pub fn cache(&self) -> Option<&FeatureCache> {
        self.cache.as_deref()
    }

    pub fn backbone_for(&self, view: ViewKind) -> Result<&Arc<dyn Backbone>> {
        match view {
            ViewKind::Global | ViewKind::Local => Ok(&self.content),
            ViewKind::Scene => {
                self.scene.as_ref().ok_or_else(|| Error::Config("scene view requested without a scene backbone".into()))
            }
        }
    }

    /// Cache hits and backbone extractions since construction.
    pub fn counts(&self) -> (usize, usize) {
        (self.hits.load(Ordering::Relaxed), self.extracted.load(Ordering::Relaxed))
    }

    fn extract_view(&self, img: &RawImage, view: ViewKind) -> Result<FeatureVector> {
        let bb = self.backbone_for(view)?;
        let cfg = bb.input_spec().preprocess_config(self.crop)?;
        let t = prepare_view(img, view, &cfg)?;
        let v = bb.extract(&t, view)?;
        if v.dim() != bb.feature_dim() {
            return Err(Error::DescriptorMismatch(format!(
                "{} returned {} values, declared {}",
                bb.id(),
                v.dim(),
                bb.feature_dim()
            )));
        }
        self.extracted.fetch_add(1, Ordering::Relaxed);
        Ok(v)
    }

    fn key(&self, image_hash: Hash32, view: ViewKind) -> Result<CacheKey> {
        let bb = self.backbone_for(view)?;
        let cfg = bb.input_spec().preprocess_config(self.crop)?;
        Ok(CacheKey::new(image_hash, bb.id(), view, preprocess_hash(&cfg, view)))
    }

    /// Features of one image file. The file is decoded only if some view misses the cache.
    pub fn featurize_file(&self, path: &Path, views: ViewSet) -> Result<Vec<FeatureVector>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let image_hash = sha256(&bytes);
        let mut decoded: Option<RawImage> = None;
        let mut out = Vec::with_capacity(views.len());
        for view in views.iter() {
            let key = self.key(image_hash, view)?;
            if let Some(v) = self.cache.as_ref().and_then(|c| c.get(&key)) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                out.push(v);
                continue;
            }
            if decoded.is_none() {
                let img = decode_image(&bytes).map_err(|e| match e {
                    Error::Decode(m) => Error::Decode(format!("{}: {m}", path.display())),
                    other => other,
                })?;
                decoded = Some(img);
            }
            let v = self.extract_view(decoded.as_ref().unwrap(), view)?;
            if let Some(c) = &self.cache {
                // A failed write only costs a recompute next time.
                if let Err(e) = c.put(&key, &v) {
                    log::warn!("feature cache write failed: {e}");
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Features of an in-memory image; identity is a hash of its pixels.
    pub fn featurize_image(&self, img: &RawImage, views: ViewSet) -> Result<Vec<FeatureVector>> {
        let mut bytes = Vec::with_capacity(8 + img.data().len());
        bytes.extend_from_slice(&img.width().to_le_bytes());
        bytes.extend_from_slice(&img.height().to_le_bytes());
        bytes.extend_from_slice(img.data());
        let image_hash = sha256(&bytes);
        let mut out = Vec::with_capacity(views.len());
        for view in views.iter() {
            let key = self.key(image_hash, view)?;
            if let Some(v) = self.cache.as_ref().and_then(|c| c.get(&key)) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                out.push(v);
                continue;
            }
            let v = self.extract_view(img, view)?;
            if let Some(c) = &self.cache {
                if let Err(e) = c.put(&key, &v) {
                    log::warn!("feature cache write failed: {e}");
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Features for every sample, in manifest order, one vector per view of `views`.
    pub fn featurize_manifest(&self, m: &DatasetManifest, views: ViewSet) -> Result<Vec<Vec<FeatureVector>>> {
        let (h0, e0) = self.counts();
        let out = self.pool.install(|| {
            m.samples()
                .par_iter()
                .map(|s| self.featurize_file(Path::new(&s.image_path), views))
                .collect::<Result<Vec<_>>>()
        })?;
        let (h1, e1) = self.counts();
        log::debug!("{}: {} images, {} cache hits, {} extracted", m.name(), m.len(), h1 - h0, e1 - e0);
        Ok(out)
    }

    pub fn stats_since(&self, before: (usize, usize), images: usize, views: ViewSet) -> FeaturizeStats {
        let (h, e) = self.counts();
        FeaturizeStats { images, vectors: images * views.len(), cache_hits: h - before.0, extracted: e - before.1 }
    }
}

/// Picks the vectors of `views` out of per-image vectors covering a superset.
pub fn compose_rows(rows: &[Vec<FeatureVector>], views: ViewSet) -> Result<Vec<CompositeFeature>> {
    rows.iter()
        .map(|parts| {
            let picked: Vec<&FeatureVector> = parts.iter().filter(|v| views.contains(v.view())).collect();
            Ok(compose(&picked, views)?)
        })
        .collect()
}

fn labels(m: &DatasetManifest) -> Vec<Label> {
    m.samples().iter().map(|s| s.label).collect()
}

/// Trains on precomputed composites with the default gamma and records their provenance.
pub fn train_on(x: &[CompositeFeature], y: &[Label], smo: &SmoConfig) -> Result<SvmModel> {
    let first = x.first().ok_or_else(|| Error::Config("no training samples".into()))?;
    let rows: Vec<&[f32]> = x.iter().map(CompositeFeature::values).collect();
    let fm = FeatureMatrix::from_f32_rows(&rows)?;
    let model = train_default(&fm, y, smo)?;
    Ok(model.with_provenance(first.provenance().to_vec())?)
}

pub fn train_model(f: &Featurizer, m: &DatasetManifest, views: ViewSet, smo: &SmoConfig) -> Result<SvmModel> {
    let rows = f.featurize_manifest(m, views)?;
    train_on(&compose_rows(&rows, views)?, &labels(m), smo)
}

/// View set a model was trained on, from its provenance.
pub fn model_views(model: &SvmModel) -> Result<ViewSet> {
    let views: Vec<ViewKind> = model.provenance().iter().map(|p| p.view).collect();
    ViewSet::new(&views).map_err(|e| Error::Format(format!("model provenance: {e}")))
}

pub fn evaluate_model(f: &Featurizer, model: &SvmModel, m: &DatasetManifest) -> Result<EvalReport> {
    let views = model_views(model)?;
    let rows = f.featurize_manifest(m, views)?;
    let x = compose_rows(&rows, views)?;
    let test: Vec<(CompositeFeature, Label)> = x.into_iter().zip(labels(m)).collect();
    Ok(evaluate(model, &test)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    pub view_sets: Vec<ViewSet>,
    pub smo: SmoConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Config("train and test manifests must be nonempty".into()));
        }
        if self.view_sets.is_empty() {
            return Err(Error::Config("at least one view set is required".into()));
        }
        self.smo.validate()?;
        Ok(())
    }
}

/// One train and evaluate cycle per view set, in configuration order. Each
/// image is featurized once for the union of all views.
pub fn ablation_run(f: &Featurizer, cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let all = cfg.view_sets.iter().copied().reduce(ViewSet::union).expect("nonempty");
    let train_rows = f.featurize_manifest(&cfg.train, all)?;
    let test_rows = f.featurize_manifest(&cfg.test, all)?;
    let (ytrain, ytest) = (labels(&cfg.train), labels(&cfg.test));
    let mut reports = Vec::with_capacity(cfg.view_sets.len());
    for &views in &cfg.view_sets {
        let model = train_on(&compose_rows(&train_rows, views)?, &ytrain, &cfg.smo)?;
        let test: Vec<(CompositeFeature, Label)> =
            compose_rows(&test_rows, views)?.into_iter().zip(ytest.iter().copied()).collect();
        reports.push(evaluate(&model, &test)?);
    }
    Ok(reports)
}

/// Trains on all of `train` and evaluates on all of `test`.
pub fn cross_dataset(
    f: &Featurizer,
    train: &DatasetManifest,
    test: &DatasetManifest,
    views: ViewSet,
    smo: &SmoConfig,
) -> Result<EvalReport> {
    let model = train_model(f, train, views, smo)?;
    evaluate_model(f, &model, test)
}

/// A report row with the labels shown in rendered output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub dataset: String,
    pub report: EvalReport,
}

/// Accuracy in percent with two decimals.
pub fn percent(accuracy: f64) -> String {
    format!("{:.2}", accuracy * 100.0)
}

pub const CSV_HEADER: &str = "model,view_set,dataset,accuracy,n_test,tp,fp,tn,fn,converged";

/// Text table and CSV, one row per report in input order. Rows from models
/// whose training did not converge are flagged with `*` in the text table.
pub fn render_report(rows: &[ReportRow]) -> (String, String) {
    use std::fmt::Write;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        let e = &r.report;
        let c = &e.confusion;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_cell(&r.model),
            e.view_set,
            csv_cell(&r.dataset),
            percent(e.accuracy),
            e.n_test,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            e.converged
        );
    }

    let head = ["model", "views", "dataset", "accuracy", "n_test"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let flag = if r.report.converged { "" } else { "*" };
            [
                r.model.clone(),
                r.report.view_set.to_string(),
                r.dataset.clone(),
                format!("{}{flag}", percent(r.report.accuracy)),
                r.report.n_test.to_string(),
            ]
        })
        .collect();
    let mut width = head.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let line = |text: &mut String, row: [&str; 5]| {
        let _ = writeln!(
            text,
            "{:<w0$}  {:<w1$}  {:<w2$}  {:>w3$}  {:>w4$}",
            row[0],
            row[1],
            row[2],
            row[3],
            row[4],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3],
            w4 = width[4]
        );
    };
    line(&mut text, head);
    for row in &cells {
        line(&mut text, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    if rows.iter().any(|r| !r.report.converged) {
        text.push_str("* training stopped at max_passes before meeting the KKT tolerance\n");
    }
    (text, csv)
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
