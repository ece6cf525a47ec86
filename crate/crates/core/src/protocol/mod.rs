//! The evaluation protocol: split definition, stroke characterization,
//! per-image scoring of a prediction against ground truth, and assembly of
//! the aggregate report.

mod aggregate;
pub mod json;
mod overlay;

pub use aggregate::{
    aggregate, CoreThinRow, MetricSummary, MissingCell, PairwiseRow, PerMethodRow, Report,
    ReportTables, RobustnessRow,
};
pub use overlay::error_overlay;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary_metrics::{boundary_scores, BandVariant, BoundaryError, TOLERANCE_BASE_SIDE};
use crate::imgcore::{resize_nearest, BinaryMask, ImageError};
use crate::morphology::{edt_squared, skeletonize};
use crate::region_metrics::{confusion, region_scores};
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("core and thin subsets share image ids: {0:?}")]
    OverlappingSplit(Vec<String>),
    #[error("manifest lists no {0}")]
    EmptyManifest(&'static str),
    #[error("records reference methods missing from the manifest: {0:?}")]
    UnknownMethods(Vec<String>),
    #[error("duplicate record for method {method}, image {image_id}, seed {seed:?}")]
    DuplicateRecord {
        method: String,
        image_id: String,
        seed: Option<u64>,
    },
    #[error("incomplete method x image x seed grid; missing {} cell(s): {}", .0.len(), format_missing(.0))]
    IncompleteGrid(Vec<MissingCell>),
    #[error("reference method {0} has no records")]
    UnknownReference(String),
}

fn format_missing(cells: &[MissingCell]) -> String {
    cells
        .iter()
        .map(|c| match c.seed {
            Some(s) => format!("({}, {}, {})", c.method, c.image_id, s),
            None => format!("({}, {}, -)", c.method, c.image_id),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Fixed partition of the test images into thick-stroke ("core") and
/// thin-stroke subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub core_ids: Vec<String>,
    pub thin_ids: Vec<String>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        let ids = |v: &[u32]| v.iter().map(|i| i.to_string()).collect();
        Self {
            core_ids: ids(&[3, 13, 14, 15, 16, 17, 28]),
            thin_ids: ids(&[22, 24, 27, 33, 36]),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let shared: Vec<String> = self
            .core_ids
            .iter()
            .filter(|id| self.thin_ids.contains(id))
            .cloned()
            .collect();
        if shared.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::OverlappingSplit(shared))
        }
    }

    pub fn subset_of(&self, id: &str) -> Option<Subset> {
        if self.core_ids.iter().any(|c| c == id) {
            Some(Subset::Core)
        } else if self.thin_ids.iter().any(|t| t == id) {
            Some(Subset::Thin)
        } else {
            None
        }
    }

    /// Every test id, core first.
    pub fn all_ids(&self) -> Vec<String> {
        self.core_ids.iter().chain(&self.thin_ids).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Core,
    Thin,
}

/// Orders image ids numerically when both parse as integers, otherwise
/// lexically; numeric ids sort first.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Extracts the id from `image_<id>`, `image_<id>_mask` and similar stems.
pub fn image_id_from_stem(stem: &str) -> String {
    let s = stem.strip_suffix("_mask").unwrap_or(stem);
    s.strip_prefix("image_").unwrap_or(s).to_string()
}

/// True for augmented-variant file names of the given test id
/// (`image_<id>_aug*`).
pub fn is_augmented_variant_of(file_name: &str, id: &str) -> bool {
    file_name.starts_with(&format!("image_{id}_aug"))
}

pub fn stroke_coverage(mask: &BinaryMask) -> f64 {
    mask.foreground_fraction()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeWidth {
    pub mean: f64,
    /// Population standard deviation over skeleton pixels.
    pub std: f64,
    pub skeleton_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeStats {
    pub coverage: f64,
    /// `None` for an empty mask.
    pub width: Option<StrokeWidth>,
}

/// Local stroke width `2 * d - 1` at every skeleton pixel, where `d` is the
/// Euclidean distance to the nearest background pixel (outside the image
/// counts as background). `None` when the mask is empty.
pub fn stroke_width(mask: &BinaryMask) -> Option<StrokeWidth> {
    if mask.count() == 0 {
        return None;
    }
    let (w, h) = (mask.width(), mask.height());
    let padded_bg = BinaryMask::from_fn(w + 2, h + 2, |x, y| {
        x == 0 || y == 0 || x == w + 1 || y == h + 1 || !mask.get(x - 1, y - 1)
    });
    let sq = edt_squared(&padded_bg).expect("frame is always background");
    let skel = skeletonize(mask);
    let widths: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| skel.get(x, y))
        .map(|(x, y)| 2.0 * sq[(y + 1) * (w + 2) + x + 1].sqrt() - 1.0)
        .collect();
    let n = widths.len() as f64;
    let mean = widths.iter().sum::<f64>() / n;
    let var = widths.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(StrokeWidth {
        mean,
        std: var.sqrt(),
        skeleton_pixels: widths.len(),
    })
}

pub fn stroke_stats(mask: &BinaryMask) -> StrokeStats {
    StrokeStats {
        coverage: stroke_coverage(mask),
        width: stroke_width(mask),
    }
}

/// The four per-image scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    F1,
    Iou,
    Bf1,
    BIou,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::F1, Metric::Iou, Metric::Bf1, Metric::BIou];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::Iou => "iou",
            Metric::Bf1 => "bf1",
            Metric::BIou => "b_iou",
        }
    }

    pub fn of(&self, r: &MetricRecord) -> f64 {
        match self {
            Metric::F1 => r.f1,
            Metric::Iou => r.iou,
            Metric::Bf1 => r.bf1,
            Metric::BIou => r.b_iou,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "f1" => Ok(Metric::F1),
            "iou" => Ok(Metric::Iou),
            "bf1" => Ok(Metric::Bf1),
            "b_iou" | "biou" => Ok(Metric::BIou),
            other => Err(format!("unknown metric {other}; expected f1, iou, bf1 or b_iou")),
        }
    }
}

/// Scores of one prediction against one ground-truth mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub image_id: String,
    pub method: String,
    pub seed: Option<u64>,
    pub f1: f64,
    pub iou: f64,
    pub bf1: f64,
    pub b_iou: f64,
    pub boundary_precision: f64,
    pub boundary_recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tau: u32,
    pub band_width: f64,
    pub band: BandVariant,
    /// `[width, height]` of the ground truth.
    pub eval_resolution: [usize; 2],
}

impl MetricRecord {
    pub fn sort_key_cmp(&self, other: &MetricRecord) -> Ordering {
        self.method
            .cmp(&other.method)
            .then_with(|| compare_ids(&self.image_id, &other.image_id))
            .then_with(|| self.seed.cmp(&other.seed))
    }
}

/// Sorts by method, then image id, then seed.
pub fn sort_records(records: &mut [MetricRecord]) {
    records.sort_by(MetricRecord::sort_key_cmp);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub band: BandVariant,
}

/// Scores `pred` against `gt`. A prediction at a different resolution is
/// first resized to the ground truth with nearest-neighbor sampling, and
/// the boundary tolerance follows the ground-truth resolution.
pub fn evaluate_pair(
    pred: &BinaryMask,
    gt: &BinaryMask,
    image_id: &str,
    method: &str,
    seed: Option<u64>,
    opts: EvalOptions,
) -> Result<MetricRecord, ProtocolError> {
    let resized;
    let pred = if pred.same_dims(gt) {
        pred
    } else {
        resized = resize_nearest(pred, gt.width(), gt.height())?;
        &resized
    };
    let c = confusion(pred, gt)?;
    let r = region_scores(&c);
    let b = boundary_scores(pred, gt, opts.band)?;
    Ok(MetricRecord {
        image_id: image_id.to_string(),
        method: method.to_string(),
        seed,
        f1: r.f1,
        iou: r.iou,
        bf1: b.bf1,
        b_iou: b.b_iou,
        boundary_precision: b.precision,
        boundary_recall: b.recall,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tau: b.tau,
        band_width: b.band_width,
        band: opts.band,
        eval_resolution: [gt.width(), gt.height()],
    })
}

/// Fixed choices that affect reported numbers, carried in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolNotes {
    pub mask_threshold: String,
    pub tolerance: String,
    pub zero_differences: String,
    pub quantiles: String,
    pub std: String,
    pub test_order: String,
}

impl Default for ProtocolNotes {
    fn default() -> Self {
        Self {
            mask_threshold: "foreground iff value > 127".into(),
            tolerance: format!(
                "tau = max(1, round_half_away(2 * max(H, W) / {TOLERANCE_BASE_SIDE}))"
            ),
            zero_differences: "discarded before ranking".into(),
            quantiles: "linear interpolation at q * (n - 1)".into(),
            std: "per-image scores averaged over seeds, then sample std (n - 1) across images"
                .into(),
            test_order: "seed-average per image, then Wilcoxon signed-rank (two-sided)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset_root: Option<String>,
    pub split: SplitSpec,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub grayscale: String,
    pub band: BandVariant,
    pub tolerance_base: f64,
    pub stats_metric: Metric,
    /// Method the robustness "wins" column is measured against.
    pub reference_method: Option<String>,
    pub notes: ProtocolNotes,
}

impl RunManifest {
    pub fn new(methods: Vec<String>) -> Self {
        Self {
            dataset_root: None,
            split: SplitSpec::default(),
            methods,
            seeds: vec![42, 123, 7],
            grayscale: "bt601".into(),
            band: BandVariant::PerMask,
            tolerance_base: TOLERANCE_BASE_SIDE,
            stats_metric: Metric::F1,
            reference_method: None,
            notes: ProtocolNotes::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.methods.is_empty() {
            return Err(ProtocolError::EmptyManifest("methods"));
        }
        if self.seeds.is_empty() {
            return Err(ProtocolError::EmptyManifest("seeds"));
        }
        self.split.validate()
    }
}
