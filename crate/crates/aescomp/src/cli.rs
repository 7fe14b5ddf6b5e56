//! The `aescomp` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aescomp_core::svm::SmoConfig;
use aescomp_core::{dataset_stats, CropSpec, DatasetManifest, Split, ViewKind, ViewSet};
use clap::{Args, Parser, Subcommand};

use crate::backbones::{resolve_backbone, Registry};
use crate::cache::FeatureCache;
use crate::error::{Error, Result};
use crate::harness::{
    ablation_run, cross_dataset, evaluate_model, model_views, render_report, train_model, ExperimentConfig, Featurizer,
    ReportRow,
};
use crate::manifest::{load_manifest, resolve_splits};
use crate::modelio::{load_model, save_model};

pub const CACHE_ENV: &str = "AESCOMP_CACHE";

#[derive(Debug, Parser)]
#[command(name = "aescomp", version, about = "Composite-feature image aesthetics classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Populate the feature cache for a manifest.
    #[command(args_override_self = true)]
    Extract(ExtractArgs),
    /// Fit an SVM on a manifest's training split and save it.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Print the label and decision value for one image.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Evaluate a saved model on a manifest.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Train and evaluate once per view set.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
    /// Train on one manifest, evaluate on another.
    #[command(name = "cross-eval", args_override_self = true)]
    CrossEval(CrossEvalArgs),
    /// Class and split counts of a manifest.
    #[command(args_override_self = true)]
    Stats(StatsArgs),
    /// Compact the cache index and delete unreferenced segments.
    #[command(args_override_self = true)]
    Gc(GcArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RuntimeArgs {
    /// Descriptor registry (JSON) for non-stub backbone ids.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Feature cache directory [default: $AESCOMP_CACHE, else no cache].
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Disable the feature cache even if AESCOMP_CACHE is set.
    #[arg(long)]
    pub no_cache: bool,
    /// Worker threads for feature extraction (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Center-crop ratio of the local view.
    #[arg(long, default_value_t = aescomp_core::image::LOCAL_CROP_RATIO)]
    pub crop_ratio: f64,
    /// JSON object supplying any of these flags; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BackboneArgs {
    /// Backbone for the global and local views, e.g. `stub:7` or a registry id.
    #[arg(long)]
    pub content_backbone: String,
    /// Backbone for the scene view.
    #[arg(long)]
    pub scene_backbone: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SmoArgs {
    /// Box constraint.
    #[arg(long = "c", alias = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_passes: usize,
    /// Seed for SMO and for splitting unsplit manifests.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training share when the manifest has no split column filled.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
}

impl SmoArgs {
    fn config(&self) -> SmoConfig {
        SmoConfig {
            c: self.c,
            kkt_tol: self.kkt_tol,
            max_passes: self.max_passes,
            seed: self.seed,
            ..SmoConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Views to extract, e.g. `GLS` or `G+S`.
    #[arg(long, default_value = "G")]
    pub views: String,
    #[command(flatten)]
    pub backbones: BackboneArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "G")]
    pub views: String,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backbones: BackboneArgs,
    #[command(flatten)]
    pub smo: SmoArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rows to evaluate: `test`, `train` or `all`. Default: the test split if
    /// the manifest has one, else every row.
    #[arg(long)]
    pub split: Option<String>,
    /// Write the report CSV here and print the text table instead.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Separate test manifest; otherwise the test split of `--manifest`.
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,
    /// Comma-separated view sets, evaluated in this order.
    #[arg(long, default_value = "G,G+S,G+L,G+L+S")]
    pub view_sets: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub backbones: BackboneArgs,
    #[command(flatten)]
    pub smo: SmoArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CrossEvalArgs {
    #[arg(long)]
    pub train_manifest: PathBuf,
    #[arg(long)]
    pub test_manifest: PathBuf,
    #[arg(long, default_value = "G")]
    pub views: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub backbones: BackboneArgs,
    #[command(flatten)]
    pub smo: SmoArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GcArgs {
    /// Cache directory [default: $AESCOMP_CACHE].
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Splices the flags of a `--config <json>` file in front of the command-line
/// flags so that later (command-line) occurrences override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it.next().ok_or_else(|| Error::Config("--config needs a path".into()))?;
            config = Some(PathBuf::from(p));
        } else if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    if rest.len() < 2 {
        return Err(Error::Config("--config must follow a command".into()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut injected: Vec<OsString> = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => injected.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => injected.extend([flag.into(), s.into()]),
            serde_json::Value::Number(n) => injected.extend([flag.into(), n.to_string().into()]),
            other => return Err(Error::Config(format!("config key {k}: unsupported value {other}"))),
        }
    }
    // program name and verb stay first
    let mut out: Vec<OsString> = rest.drain(..2).collect();
    out.extend(injected);
    out.extend(rest);
    Ok(out)
}

fn parse_views(s: &str) -> Result<ViewSet> {
    Ok(ViewSet::parse(s)?)
}

fn cache_root(explicit: Option<&Path>, disabled: bool) -> Option<PathBuf> {
    if disabled {
        return None;
    }
    explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn open_cache(rt: &RuntimeArgs) -> Result<Option<Arc<FeatureCache>>> {
    cache_root(rt.cache.as_deref(), rt.no_cache).map(|root| FeatureCache::open(root).map(Arc::new)).transpose()
}

fn registry(rt: &RuntimeArgs) -> Result<Option<Registry>> {
    rt.registry.as_deref().map(Registry::load).transpose()
}

fn featurizer(rt: &RuntimeArgs, content: &str, scene: Option<&str>) -> Result<Featurizer> {
    let reg = registry(rt)?;
    let content = resolve_backbone(content, reg.as_ref())?;
    let scene = scene.map(|id| resolve_backbone(id, reg.as_ref())).transpose()?;
    Featurizer::new(content, scene, CropSpec::new(rt.crop_ratio)?, open_cache(rt)?, rt.jobs)
}

/// Content and scene backbone ids recorded in a model's provenance.
fn model_backbones(model: &aescomp_core::svm::SvmModel) -> Result<(String, Option<String>)> {
    let mut content: Option<&str> = None;
    let mut scene: Option<&str> = None;
    for p in model.provenance() {
        let slot = if p.view == ViewKind::Scene { &mut scene } else { &mut content };
        match slot {
            Some(id) if *id != p.backbone_id => {
                return Err(Error::Format("model provenance names two backbones for one role".into()))
            }
            _ => *slot = Some(&p.backbone_id),
        }
    }
    // A scene-only model still needs some content backbone; reuse the scene one.
    let content = content.or(scene).ok_or_else(|| Error::Format("model has no provenance".into()))?;
    Ok((content.to_string(), scene.map(str::to_string)))
}

fn backbone_label(b: &BackboneArgs) -> String {
    match &b.scene_backbone {
        Some(s) => format!("{}+{s}", b.content_backbone),
        None => b.content_backbone.clone(),
    }
}

fn emit_report(rows: &[ReportRow], out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let (text, csv) = render_report(rows);
    let io = |e| Error::io(Path::new("<stdout>"), e);
    match out {
        Some(p) => {
            std::fs::write(p, csv).map_err(|e| Error::io(p, e))?;
            stdout.write_all(text.as_bytes()).map_err(io)
        }
        None => stdout.write_all(csv.as_bytes()).map_err(io),
    }
}

fn training_rows(path: &Path, smo: &SmoArgs) -> Result<(DatasetManifest, DatasetManifest)> {
    let m = resolve_splits(&load_manifest(path)?, smo.train_fraction, smo.seed)?;
    Ok((m.subset(Split::Train), m.subset(Split::Test)))
}

fn nonempty(m: DatasetManifest, what: &str) -> Result<DatasetManifest> {
    if m.is_empty() {
        Err(Error::Manifest(format!("{}: no {what} rows", m.name())))
    } else {
        Ok(m)
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let io = |e| Error::io(Path::new("<stdout>"), e);
    match cli.command {
        Command::Extract(a) => {
            let views = parse_views(&a.views)?;
            let m = load_manifest(&a.manifest)?;
            let f = featurizer(&a.runtime, &a.backbones.content_backbone, a.backbones.scene_backbone.as_deref())?;
            let before = f.counts();
            f.featurize_manifest(&m, views)?;
            let st = f.stats_since(before, m.len(), views);
            writeln!(
                stdout,
                "extract {}: images {}, vectors {}, backbone invocations {}, cache hits {}",
                m.name(),
                st.images,
                st.vectors,
                st.extracted,
                st.cache_hits
            )
            .map_err(io)?;
            if f.cache().is_none() {
                log::warn!("no feature cache configured (--cache or {CACHE_ENV}); features were not stored");
            }
        }
        Command::Train(a) => {
            let views = parse_views(&a.views)?;
            let (train, _) = training_rows(&a.manifest, &a.smo)?;
            let train = nonempty(train, "training")?;
            let f = featurizer(&a.runtime, &a.backbones.content_backbone, a.backbones.scene_backbone.as_deref())?;
            let model = train_model(&f, &train, views, &a.smo.config())?;
            save_model(&model, &a.out)?;
            writeln!(
                stdout,
                "train {}: {} samples, {} support vectors, views {}, converged {}",
                train.name(),
                train.len(),
                model.dual_coeffs().len(),
                views,
                model.converged()
            )
            .map_err(io)?;
        }
        Command::Predict(a) => {
            let model = load_model(&a.model)?;
            let views = model_views(&model)?;
            let (content, scene) = model_backbones(&model)?;
            let f = featurizer(&a.runtime, &content, scene.as_deref())?;
            let parts = f.featurize_file(&a.image, views)?;
            let x = aescomp_core::compose(&parts, views)?;
            let d = model.decision_value(&x)?;
            writeln!(stdout, "{} {d}", aescomp_core::Label::from_decision(d)).map_err(io)?;
        }
        Command::Eval(a) => {
            let model = load_model(&a.model)?;
            let (content, scene) = model_backbones(&model)?;
            let m = load_manifest(&a.manifest)?;
            let rows = match a.split.as_deref() {
                Some("all") => m,
                Some(s) => {
                    let split = Split::parse(s)
                        .ok_or_else(|| Error::Config(format!("--split {s:?}: expected test, train or all")))?;
                    nonempty(m.subset(split), split.name())?
                }
                None if m.samples().iter().any(|s| s.split == Some(Split::Test)) => m.subset(Split::Test),
                None => m,
            };
            let rows = nonempty(rows, "evaluation")?;
            let f = featurizer(&a.runtime, &content, scene.as_deref())?;
            let report = evaluate_model(&f, &model, &rows)?;
            let name = a.model.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
            emit_report(&[ReportRow { model: name, dataset: rows.name().into(), report }], a.out.as_deref(), stdout)?;
        }
        Command::Ablate(a) => {
            let view_sets = a.view_sets.split(',').map(|s| parse_views(s.trim())).collect::<Result<Vec<_>>>()?;
            let (train, test) = match &a.test_manifest {
                Some(t) => (load_manifest(&a.manifest)?, load_manifest(t)?),
                None => training_rows(&a.manifest, &a.smo)?,
            };
            let cfg = ExperimentConfig {
                train: nonempty(train, "training")?,
                test: nonempty(test, "test")?,
                view_sets,
                smo: a.smo.config(),
            };
            let f = featurizer(&a.runtime, &a.backbones.content_backbone, a.backbones.scene_backbone.as_deref())?;
            let reports = ablation_run(&f, &cfg)?;
            let label = backbone_label(&a.backbones);
            let rows: Vec<ReportRow> = reports
                .into_iter()
                .map(|report| ReportRow { model: label.clone(), dataset: cfg.test.name().into(), report })
                .collect();
            emit_report(&rows, a.out.as_deref(), stdout)?;
        }
        Command::CrossEval(a) => {
            let views = parse_views(&a.views)?;
            let train = nonempty(load_manifest(&a.train_manifest)?, "training")?;
            let test = nonempty(load_manifest(&a.test_manifest)?, "test")?;
            let f = featurizer(&a.runtime, &a.backbones.content_backbone, a.backbones.scene_backbone.as_deref())?;
            let report = cross_dataset(&f, &train, &test, views, &a.smo.config())?;
            let row = ReportRow {
                model: format!("{} ({})", backbone_label(&a.backbones), train.name()),
                dataset: test.name().into(),
                report,
            };
            emit_report(&[row], a.out.as_deref(), stdout)?;
        }
        Command::Stats(a) => {
            let m = load_manifest(&a.manifest)?;
            let st = dataset_stats(&m);
            writeln!(
                stdout,
                "dataset {}\ntotal {}\nhigh {}\nlow {}\ntrain {}\ntest {}\nunsplit {}",
                m.name(),
                m.len(),
                st.high,
                st.low,
                st.train,
                st.test,
                m.len() - st.train - st.test
            )
            .map_err(io)?;
        }
        Command::Gc(a) => {
            let root = cache_root(a.cache.as_deref(), false)
                .ok_or_else(|| Error::Config(format!("gc needs --cache or {CACHE_ENV}")))?;
            let st = FeatureCache::gc(&root)?;
            writeln!(
                stdout,
                "gc {}: index lines {} -> {}, segments removed {}",
                root.display(),
                st.index_lines_before,
                st.entries_kept,
                st.segments_removed
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// are reported as one `error: <Kind>: <message>` line on `stderr`.
pub fn main_with_args(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(stderr, e.kind(), &e.to_string(), 1),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(stdout, "{}", e.render());
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            return report_error(stderr, "UsageError", msg, 2);
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => report_error(stderr, e.kind(), &e.to_string(), 1),
    }
}

fn report_error(stderr: &mut dyn Write, kind: &str, msg: &str, code: i32) -> i32 {
    let one_line = msg.replace(['\n', '\r'], " ");
    let _ = writeln!(stderr, "error: {kind}: {one_line}");
    code
}
