//! The `strokebench` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::generate_offline;
use crate::baselines::{run_baseline, AdaptiveParams, BaselineMethod, SauvolaParams};
use crate::boundary_metrics::BandVariant;
use crate::imgcore::{
    mask_from_decoded, read_image, to_gray_with, write_png, BinaryMask, DecodedImage, GrayImage,
    GrayWeights,
};
use crate::losses::{max_gradient_error, LossKind, LossParams, ProbMap};
use crate::protocol::json::to_fixed_json;
use crate::protocol::{
    compare_ids, error_overlay, evaluate_pair, image_id_from_stem, sort_records, stroke_stats,
    EvalOptions, Metric, MetricRecord, Report, RunManifest, SplitSpec, StrokeStats, Subset,
};
use crate::stats::{effect_size, mean, sample_std, wilcoxon_signed_rank, PairedSample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "strokebench",
    version,
    about = "Boundary-aware evaluation, classical baselines and significance testing for binary stroke masks",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error.\n\
                  Mask files are foreground where the gray value is > 127."
)]
pub struct Cli {
    /// Worker threads; results do not depend on this. Defaults to the
    /// available parallelism.
    #[arg(long, global = true, env = "STROKEBENCH_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predicted masks against ground-truth masks, pairing files by image id.
    #[command(after_help = METRIC_HELP)]
    Evaluate(EvaluateArgs),
    /// Run a classical binarizer at native resolution and score it.
    #[command(after_help = BASELINE_HELP)]
    Baseline(BaselineArgs),
    /// Wilcoxon signed-rank comparison of two record files.
    Compare(CompareArgs),
    /// Aggregate record files into per-method, core/thin, robustness and pairwise tables.
    Report(ReportArgs),
    /// Stroke coverage and width of every mask in a directory.
    Characterize(CharacterizeArgs),
    /// Write seeded offline augmentation variants with provenance.
    Augment(AugmentArgs),
    /// Check every loss gradient against central finite differences.
    LossCheck(LossCheckArgs),
}

const METRIC_HELP: &str = "Boundary tolerance: tau = max(1, round(2 * max(H, W) / 1536)) at the ground-truth \
resolution (tau base 1536). B-IoU band width d = 0.02 * image diagonal. Predictions at another \
resolution are resized to the ground truth with nearest-neighbor sampling.";

const BASELINE_HELP: &str = "Defaults: adaptive Gaussian block 51, C 15 (sigma = 0.3 * ((block - 1) / 2 - 1) + 0.8); \
Sauvola window 51, k 0.2, R 128 (T = mean * (1 + k * (std / R - 1))). Otsu has no parameters. \
Pixels below the threshold are strokes. Boundary tolerance base 1536.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum BandArg {
    /// Band around the boundary of both masks.
    #[default]
    Both,
    /// Band around the ground-truth strokes only.
    GtOnly,
}

impl From<BandArg> for BandVariant {
    fn from(b: BandArg) -> Self {
        match b {
            BandArg::Both => BandVariant::PerMask,
            BandArg::GtOnly => BandVariant::GtOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum GrayArg {
    #[default]
    Bt601,
    Bt709,
}

impl GrayArg {
    fn weights(self) -> GrayWeights {
        match self {
            GrayArg::Bt601 => GrayWeights::BT601,
            GrayArg::Bt709 => GrayWeights::BT709,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Otsu,
    Adaptive,
    Sauvola,
}

impl From<MethodArg> for BaselineMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Otsu => BaselineMethod::Otsu,
            MethodArg::Adaptive => BaselineMethod::Adaptive,
            MethodArg::Sauvola => BaselineMethod::Sauvola,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks.
    #[arg(long)]
    pub gt: PathBuf,
    /// Output JSON with one record per image.
    #[arg(long)]
    pub out: PathBuf,
    /// Method name stored in the records.
    #[arg(long, default_value = "model")]
    pub method: String,
    /// Training seed stored in the records; omit for deterministic methods.
    #[arg(long)]
    pub seed: Option<u64>,
    /// B-IoU band construction.
    #[arg(long, value_enum, default_value_t = BandArg::Both)]
    pub band: BandArg,
    /// Also write TP/FN/FP error overlays to this directory.
    #[arg(long)]
    pub overlays: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Directory of input photographs (`image_<id>.png`).
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of ground-truth masks (`image_<id>_mask.png`).
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Output JSON with one record per image.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write predicted masks to this directory.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Sauvola window side (odd).
    #[arg(long, default_value_t = 51)]
    pub window: usize,
    /// Sauvola k.
    #[arg(long, default_value_t = 0.2)]
    pub k: f64,
    /// Sauvola dynamic range R.
    #[arg(long, default_value_t = 128.0)]
    pub r: f64,
    /// Adaptive Gaussian block size (odd).
    #[arg(long, default_value_t = 51)]
    pub block: usize,
    /// Adaptive Gaussian offset C.
    #[arg(long, default_value_t = 15.0)]
    pub c: f64,
    /// RGB to gray weights.
    #[arg(long, value_enum, default_value_t = GrayArg::Bt601)]
    pub grayscale: GrayArg,
    #[arg(long, value_enum, default_value_t = BandArg::Both)]
    pub band: BandArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Records of method A.
    pub a: PathBuf,
    /// Records of method B.
    pub b: PathBuf,
    /// Score tested per image.
    #[arg(long, default_value = "f1")]
    pub metric: Metric,
    /// Size of the comparison family for the Bonferroni correction.
    #[arg(long, default_value_t = 1)]
    pub comparisons: usize,
    /// Also write the result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Record files from `evaluate` or `baseline`.
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    /// JSON file with `core_ids` and `thin_ids` overriding the default split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Score used for core/thin, robustness and significance tables.
    #[arg(long, default_value = "f1")]
    pub metric: Metric,
    /// Method that robustness wins are counted against (default: sauvola if present, else the first method).
    #[arg(long)]
    pub reference: Option<String>,
    /// Expected seeds, comma separated (default: every seed present in the records).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Text tables; printed to stdout when omitted.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// Directory of masks.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Also write the table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory with `image_<id>.png` photographs.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory with `image_<id>_mask.png` masks (default: the images directory).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Variants per image.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    /// Random probability maps per loss.
    #[arg(long, default_value_t = 100)]
    pub maps: usize,
    /// Side of each map.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Largest accepted absolute gradient error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(data_err)?;
    pool.install(|| match cli.command {
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Characterize(a) => cmd_characterize(&a),
        Command::Augment(a) => cmd_augment(&a),
        Command::LossCheck(a) => cmd_loss_check(&a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileRole {
    /// Prefer `*_mask` files when the directory has any.
    Mask,
    /// Files not ending in `_mask`.
    Photo,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

/// Image files of one role keyed by image id, sorted by id. Augmented
/// variants (`*_aug*`) are skipped.
fn list_images(dir: &Path, role: FileRole) -> CliResult<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(data_err)?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if path.is_file() && ext_ok && !stem.contains("_aug") {
            files.push((stem, path));
        }
    }
    let any_mask = files.iter().any(|(s, _)| s.ends_with("_mask"));
    files.retain(|(s, _)| match role {
        FileRole::Mask => !any_mask || s.ends_with("_mask"),
        FileRole::Photo => !s.ends_with("_mask"),
    });
    let mut by_id: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (stem, path) in files {
        let id = image_id_from_stem(&stem);
        if let Some(prev) = by_id.insert(id.clone(), path.clone()) {
            return Err(CliError::Data(format!(
                "two files map to image id {id}: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    let mut out: Vec<_> = by_id.into_iter().collect();
    out.sort_by(|a, b| compare_ids(&a.0, &b.0));
    Ok(out)
}

struct Pair {
    id: String,
    left: PathBuf,
    right: PathBuf,
}

/// Pairs files by id; every unpaired file is reported on stderr.
fn pair_dirs(left: &Path, left_role: FileRole, right: &Path) -> CliResult<Vec<Pair>> {
    let a = list_images(left, left_role)?;
    let b: BTreeMap<String, PathBuf> = list_images(right, FileRole::Mask)?.into_iter().collect();
    let a_ids: BTreeSet<&String> = a.iter().map(|(id, _)| id).collect();
    let mut unpaired = Vec::new();
    for (id, p) in &a {
        if !b.contains_key(id) {
            unpaired.push(p.clone());
        }
    }
    for (id, p) in &b {
        if !a_ids.contains(id) {
            unpaired.push(p.clone());
        }
    }
    if !unpaired.is_empty() {
        for p in &unpaired {
            eprintln!("unpaired: {}", p.display());
        }
        return Err(CliError::Data(format!("{} unpaired file(s)", unpaired.len())));
    }
    if a.is_empty() {
        return Err(CliError::Data(format!(
            "no image files in {} and {}",
            left.display(),
            right.display()
        )));
    }
    Ok(a
        .into_iter()
        .map(|(id, l)| {
            let r = b[&id].clone();
            Pair { id, left: l, right: r }
        })
        .collect())
}

fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    read_image(path)
        .map(|d| mask_from_decoded(&d))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_gray(path: &Path, weights: GrayWeights) -> CliResult<GrayImage> {
    match read_image(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))? {
        DecodedImage::Gray(g) => Ok(g),
        DecodedImage::Rgb(c) => Ok(to_gray_with(&c, weights)),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

/// The JSON written by `evaluate` and `baseline`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordFile {
    pub records: Vec<MetricRecord>,
}

pub fn read_records(path: &Path) -> CliResult<Vec<MetricRecord>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let file: RecordFile =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(file.records)
}

fn print_summary(records: &[MetricRecord]) {
    let col = |m: Metric| records.iter().map(|r| m.of(r)).collect::<Vec<_>>();
    let fmt = |m: Metric| {
        let v = col(m);
        format!("{} {:.3} ± {:.3}", m.name(), mean(&v), sample_std(&v))
    };
    println!(
        "{} image(s): {}",
        records.len(),
        Metric::ALL.map(fmt).join(", ")
    );
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let pairs = pair_dirs(&a.pred, FileRole::Mask, &a.gt)?;
    if let Some(dir) = &a.overlays {
        ensure_dir(dir)?;
    }
    let opts = EvalOptions { band: a.band.into() };
    let records = pairs
        .par_iter()
        .map(|p| {
            let pred = read_mask(&p.left)?;
            let gt = read_mask(&p.right)?;
            let rec = evaluate_pair(&pred, &gt, &p.id, &a.method, a.seed, opts).map_err(data_err)?;
            if let Some(dir) = &a.overlays {
                let pred = crate::imgcore::resize_nearest(&pred, gt.width(), gt.height()).map_err(data_err)?;
                let ov = error_overlay(&pred, &gt).map_err(data_err)?;
                write_png(dir.join(format!("image_{}_overlay.png", p.id)), &ov).map_err(data_err)?;
            }
            Ok(rec)
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_text(&a.out, &to_fixed_json(&RecordFile { records: records.clone() }))?;
    print_summary(&records);
    Ok(())
}

fn cmd_baseline(a: &BaselineArgs) -> CliResult<()> {
    let sauvola = SauvolaParams {
        window: a.window,
        k: a.k,
        r: a.r,
    };
    let adaptive = AdaptiveParams { block: a.block, c: a.c };
    let method: BaselineMethod = a.method.into();
    match method {
        BaselineMethod::Sauvola => sauvola.validate(),
        BaselineMethod::Adaptive => adaptive.validate(),
        BaselineMethod::Otsu => Ok(()),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let pairs = pair_dirs(&a.images, FileRole::Photo, &a.gt)?;
    if let Some(dir) = &a.masks {
        ensure_dir(dir)?;
    }
    let opts = EvalOptions { band: a.band.into() };
    let weights = a.grayscale.weights();
    let records = pairs
        .par_iter()
        .map(|p| {
            let gray = read_gray(&p.left, weights)?;
            let gt = read_mask(&p.right)?;
            let start = Instant::now();
            let pred = run_baseline(&gray, method, &adaptive, &sauvola).map_err(data_err)?;
            eprintln!(
                "{} image {}: {:.2} s",
                method.name(),
                p.id,
                start.elapsed().as_secs_f64()
            );
            if let Some(dir) = &a.masks {
                write_png(dir.join(format!("image_{}_mask.png", p.id)), &pred).map_err(data_err)?;
            }
            evaluate_pair(&pred, &gt, &p.id, method.name(), None, opts).map_err(data_err)
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_text(&a.out, &to_fixed_json(&RecordFile { records: records.clone() }))?;
    print_summary(&records);
    Ok(())
}

/// Seed-averaged score per image id.
fn per_image_scores(records: &[MetricRecord], metric: Metric) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.image_id.clone()).or_default();
        e.0 += metric.of(r);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub n: usize,
    pub n_effective: usize,
    pub w: f64,
    pub p: f64,
    pub exact: bool,
    pub alpha_corr: f64,
    pub significant: bool,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_delta: f64,
    pub std_delta: f64,
    pub median_delta: f64,
}

fn method_label(records: &[MetricRecord], path: &Path) -> String {
    let names: BTreeSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
    if names.len() == 1 {
        names.into_iter().next().unwrap().to_string()
    } else {
        path.display().to_string()
    }
}

fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    if a.comparisons == 0 {
        return Err(CliError::Usage("--comparisons must be >= 1".into()));
    }
    let ra = read_records(&a.a)?;
    let rb = read_records(&a.b)?;
    let sa = per_image_scores(&ra, a.metric);
    let sb = per_image_scores(&rb, a.metric);
    let only_a: Vec<&String> = sa.keys().filter(|k| !sb.contains_key(*k)).collect();
    let only_b: Vec<&String> = sb.keys().filter(|k| !sa.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        for id in &only_a {
            eprintln!("image {id} missing from {}", a.b.display());
        }
        for id in &only_b {
            eprintln!("image {id} missing from {}", a.a.display());
        }
        return Err(CliError::Data("image id sets differ".into()));
    }
    if sa.is_empty() {
        return Err(CliError::Data("no records".into()));
    }
    let mut ids: Vec<String> = sa.keys().cloned().collect();
    ids.sort_by(|x, y| compare_ids(x, y));
    let xs = ids.iter().map(|id| sa[id]).collect();
    let ys = ids.iter().map(|id| sb[id]).collect();
    let sample = PairedSample::new(ids, xs, ys).map_err(data_err)?;
    let w = wilcoxon_signed_rank(&sample, a.comparisons).map_err(data_err)?;
    let e = effect_size(&sample).map_err(data_err)?;
    let result = ComparisonResult {
        a: method_label(&ra, &a.a),
        b: method_label(&rb, &a.b),
        metric: a.metric,
        n: sample.len(),
        n_effective: w.n_effective,
        w: w.w_statistic,
        p: w.p_value,
        exact: w.exact,
        alpha_corr: w.alpha_corr,
        significant: w.significant,
        mean_a: mean(&sample.a),
        mean_b: mean(&sample.b),
        mean_delta: e.mean_delta,
        std_delta: e.std_delta,
        median_delta: e.median_delta,
    };
    println!(
        "{} vs {} ({}, n = {}, {} p)",
        result.a,
        result.b,
        result.metric.name(),
        result.n,
        if result.exact { "exact" } else { "normal-approx" }
    );
    println!("mean A {:.3}  mean B {:.3}", result.mean_a, result.mean_b);
    println!(
        "W = {}  p = {:.6}  alpha = {:.4}  {}",
        result.w,
        result.p,
        result.alpha_corr,
        if result.significant { "significant" } else { "n.s." }
    );
    println!(
        "delta mean {:.3}  std {:.3}  median {:.3}",
        result.mean_delta, result.std_delta, result.median_delta
    );
    if let Some(out) = &a.out {
        write_text(out, &to_fixed_json(&result))?;
    }
    Ok(())
}

fn read_split(path: Option<&PathBuf>) -> CliResult<SplitSpec> {
    let split = match path {
        None => SplitSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
    };
    split.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(split)
}

fn cmd_report(a: &ReportArgs) -> CliResult<()> {
    let split = read_split(a.split.as_ref())?;
    let mut records = Vec::new();
    for p in &a.records {
        records.extend(read_records(p)?);
    }
    if records.is_empty() {
        return Err(CliError::Data("no records".into()));
    }
    let mut methods: Vec<String> = Vec::new();
    for r in &records {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let seeds: Vec<u64> = match &a.seeds {
        Some(s) if s.is_empty() => return Err(CliError::Usage("--seeds is empty".into())),
        Some(s) => s.clone(),
        None => {
            let seen: BTreeSet<u64> = records.iter().filter_map(|r| r.seed).collect();
            if seen.is_empty() {
                RunManifest::new(vec![]).seeds
            } else {
                seen.into_iter().collect()
            }
        }
    };
    let bands: BTreeSet<&str> = records.iter().map(|r| r.band.name()).collect();
    if bands.len() > 1 {
        return Err(CliError::Data(format!("records mix band variants: {bands:?}")));
    }
    let mut manifest = RunManifest::new(methods);
    manifest.split = split;
    manifest.seeds = seeds;
    manifest.band = records[0].band;
    manifest.stats_metric = a.metric;
    manifest.reference_method = a.reference.clone();
    manifest.dataset_root = None;
    sort_records(&mut records);
    let report = match Report::build(manifest, records) {
        Ok(r) => r,
        Err(crate::protocol::ProtocolError::UnknownReference(m)) => {
            return Err(CliError::Usage(format!("reference method {m} has no records")))
        }
        Err(e) => return Err(data_err(e)),
    };
    if let Some(out) = &a.out {
        write_text(out, &report.to_json())?;
    }
    match &a.text {
        Some(p) => write_text(p, &report.to_text())?,
        None => print!("{}", report.to_text()),
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizeRow {
    pub image_id: String,
    pub subset: Option<Subset>,
    #[serde(flatten)]
    pub stats: StrokeStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidthSummary {
    pub n: usize,
    /// Mean over images of the per-image mean width.
    pub mean: f64,
    /// Sample std over images of the per-image mean width.
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizeSummary {
    pub mean_coverage: f64,
    pub all: Option<WidthSummary>,
    pub core: Option<WidthSummary>,
    pub thin: Option<WidthSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizeOutput {
    pub rows: Vec<CharacterizeRow>,
    pub summary: CharacterizeSummary,
}

pub fn summarize_characterization(rows: &[CharacterizeRow]) -> CharacterizeSummary {
    let widths = |subset: Option<Subset>| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| subset.is_none() || r.subset == subset)
            .filter_map(|r| r.stats.width.map(|w| w.mean))
            .collect();
        (!v.is_empty()).then(|| WidthSummary {
            n: v.len(),
            mean: mean(&v),
            std: sample_std(&v),
        })
    };
    let cov: Vec<f64> = rows.iter().map(|r| r.stats.coverage).collect();
    CharacterizeSummary {
        mean_coverage: if cov.is_empty() { 0.0 } else { mean(&cov) },
        all: widths(None),
        core: widths(Some(Subset::Core)),
        thin: widths(Some(Subset::Thin)),
    }
}

pub fn characterize_dir(masks: &Path, split: &SplitSpec) -> CliResult<CharacterizeOutput> {
    let files = list_images(masks, FileRole::Mask)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no masks in {}", masks.display())));
    }
    let rows = files
        .par_iter()
        .map(|(id, path)| {
            let m = read_mask(path)?;
            Ok(CharacterizeRow {
                image_id: id.clone(),
                subset: split.subset_of(id),
                stats: stroke_stats(&m),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summary = summarize_characterization(&rows);
    Ok(CharacterizeOutput { rows, summary })
}

fn cmd_characterize(a: &CharacterizeArgs) -> CliResult<()> {
    let split = read_split(a.split.as_ref())?;
    let out = characterize_dir(&a.masks, &split)?;
    println!("{:<8} {:>6} {:>10} {:>18}", "image", "subset", "coverage", "width (px)");
    for r in &out.rows {
        let subset = match r.subset {
            Some(Subset::Core) => "core",
            Some(Subset::Thin) => "thin",
            None => "-",
        };
        let width = match r.stats.width {
            Some(w) => format!("{:.3} ± {:.3}", w.mean, w.std),
            None => "undefined width".into(),
        };
        println!(
            "{:<8} {:>6} {:>9.3}% {:>18}",
            r.image_id,
            subset,
            r.stats.coverage * 100.0,
            width
        );
    }
    println!("mean coverage {:.3}%", out.summary.mean_coverage * 100.0);
    for (name, s) in [("all", &out.summary.all), ("core", &out.summary.core), ("thin", &out.summary.thin)] {
        if let Some(s) = s {
            println!("{name} width {:.3} ± {:.3} px over {} image(s)", s.mean, s.std, s.n);
        }
    }
    if let Some(p) = &a.out {
        write_text(p, &to_fixed_json(&out))?;
    }
    Ok(())
}

fn cmd_augment(a: &AugmentArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be >= 1".into()));
    }
    let mask_dir = a.masks.as_deref().unwrap_or(&a.images);
    let pairs = pair_dirs(&a.images, FileRole::Photo, mask_dir)?;
    ensure_dir(&a.out)?;
    pairs.par_iter().try_for_each(|p| {
        let img = read_image(&p.left)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.left.display())))?
            .into_rgb();
        let mask = read_mask(&p.right)?;
        let variants = generate_offline(&img, &mask, &p.id, a.n, a.seed).map_err(data_err)?;
        for v in &variants {
            write_png(a.out.join(format!("{}.png", v.name)), &v.image).map_err(data_err)?;
            write_png(a.out.join(format!("{}_mask.png", v.name)), &v.mask).map_err(data_err)?;
            let prov = serde_json::to_string_pretty(&v.provenance(&p.id, a.seed)).map_err(data_err)?;
            write_text(&a.out.join(format!("{}.json", v.name)), &(prov + "\n"))?;
        }
        eprintln!("image {}: {} variant(s)", p.id, variants.len());
        Ok::<_, CliError>(())
    })?;
    println!("wrote {} variant(s) for {} image(s)", pairs.len() * a.n, pairs.len());
    Ok(())
}

fn cmd_loss_check(a: &LossCheckArgs) -> CliResult<()> {
    if a.size == 0 || a.maps == 0 || a.step.is_nan() || a.step <= 0.0 {
        return Err(CliError::Usage("--maps, --size and --step must be positive".into()));
    }
    let params = LossParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let n = a.size * a.size;
    let cases: Vec<(ProbMap, BinaryMask)> = (0..a.maps)
        .map(|_| {
            let probs = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
            let gt = BinaryMask::new(a.size, a.size, (0..n).map(|_| rng.random_bool(0.3)).collect())
                .expect("sized buffer");
            (ProbMap::new(a.size, a.size, probs).expect("values in range"), gt)
        })
        .collect();
    let mut failed = false;
    for kind in LossKind::ALL {
        let worst = cases
            .par_iter()
            .map(|(p, g)| max_gradient_error(kind, p, g, &params, a.step))
            .collect::<Result<Vec<_>, _>>()
            .map_err(data_err)?
            .into_iter()
            .fold(0.0f64, f64::max);
        let ok = worst <= a.tolerance;
        failed |= !ok;
        println!(
            "{:<11} max |analytic - numeric| = {:.3e}  {}",
            kind.name(),
            worst,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed {
        Err(CliError::Data(format!("gradient error above {:e}", a.tolerance)))
    } else {
        Ok(())
    }
}
