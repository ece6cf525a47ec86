//! Boundary F1 with a resolution-scaled Chebyshev tolerance, and Boundary
//! IoU over a band of 2% of the image diagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{BinaryMask, ImageError};
use crate::morphology::{dilate, edt, morph_gradient, StructuringElement};

/// Reference long side at which the base tolerance of 2 px applies.
pub const TOLERANCE_BASE_SIDE: f64 = 1536.0;
/// Band width as a fraction of the image diagonal.
pub const BAND_FRACTION: f64 = 0.02;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("tolerance must be >= 1 pixel")]
    ZeroTolerance,
}

/// Which band definition B-IoU uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandVariant {
    /// Inner band of each mask, IoU of the two bands.
    #[default]
    PerMask,
    /// Single band around the ground truth; predictions outside it are ignored.
    GtOnly,
}

impl BandVariant {
    pub fn name(&self) -> &'static str {
        match self {
            BandVariant::PerMask => "per-mask",
            BandVariant::GtOnly => "gt-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryF1 {
    pub precision: f64,
    pub recall: f64,
    pub bf1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScores {
    pub precision: f64,
    pub recall: f64,
    pub bf1: f64,
    pub tau: u32,
    pub b_iou: f64,
    pub band_width: f64,
}

/// `max(1, round(2 * max(H, W) / 1536))`, rounding half away from zero.
pub fn tolerance(height: usize, width: usize) -> u32 {
    let t = (2.0 * height.max(width) as f64 / TOLERANCE_BASE_SIDE).round();
    (t as u32).max(1)
}

/// `0.02 * sqrt(H^2 + W^2)`.
pub fn band_width(height: usize, width: usize) -> f64 {
    let (h, w) = (height as f64, width as f64);
    BAND_FRACTION * (h * h + w * w).sqrt()
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Contour precision/recall with set-semantics matching: a contour pixel
/// matches when the other contour has a pixel within Chebyshev distance
/// `tau`.
pub fn boundary_f1(pred: &BinaryMask, gt: &BinaryMask, tau: u32) -> Result<BoundaryF1, BoundaryError> {
    pred.ensure_same_dims(gt)?;
    if tau == 0 {
        return Err(BoundaryError::ZeroTolerance);
    }
    let pc = morph_gradient(pred);
    let gc = morph_gradient(gt);
    let (np, ng) = (pc.count(), gc.count());
    match (np, ng) {
        (0, 0) => {
            return Ok(BoundaryF1 {
                precision: 1.0,
                recall: 1.0,
                bf1: 1.0,
            })
        }
        (0, _) | (_, 0) => {
            return Ok(BoundaryF1 {
                precision: 0.0,
                recall: 0.0,
                bf1: 0.0,
            })
        }
        _ => {}
    }
    let se = StructuringElement::square(2 * tau as usize + 1).expect("odd by construction");
    let matched_pred = pc.and(&dilate(&gc, se)).count();
    let matched_gt = gc.and(&dilate(&pc, se)).count();
    let precision = matched_pred as f64 / np as f64;
    let recall = matched_gt as f64 / ng as f64;
    Ok(BoundaryF1 {
        precision,
        recall,
        bf1: harmonic(precision, recall),
    })
}

/// Foreground pixels within distance `d` of the mask's own background.
pub fn inner_band(mask: &BinaryMask, d: f64) -> BinaryMask {
    mask.and(&edt(&mask.not()).within(d))
}

fn iou_of(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = a.and(b).count();
    let union = a.or(b).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Boundary IoU over the per-mask inner bands; returns `(b_iou, band_width)`.
pub fn boundary_iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64), BoundaryError> {
    pred.ensure_same_dims(gt)?;
    let d = band_width(gt.height(), gt.width());
    let pb = inner_band(pred, d);
    let gb = inner_band(gt, d);
    Ok((iou_of(&pb, &gb), d))
}

/// Single-band variant: the band is every pixel within `d` of a
/// ground-truth pixel, and only predictions inside it count.
pub fn boundary_iou_gt_band(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, BoundaryError> {
    pred.ensure_same_dims(gt)?;
    let d = band_width(gt.height(), gt.width());
    let band = edt(gt).within(d);
    Ok(iou_of(&pred.and(&band), &gt.and(&band)))
}

/// BF1 at the resolution-scaled tolerance of `gt` plus B-IoU.
pub fn boundary_scores(
    pred: &BinaryMask,
    gt: &BinaryMask,
    variant: BandVariant,
) -> Result<BoundaryScores, BoundaryError> {
    let tau = tolerance(gt.height(), gt.width());
    let f = boundary_f1(pred, gt, tau)?;
    let (b_iou, band_width) = match variant {
        BandVariant::PerMask => boundary_iou(pred, gt)?,
        BandVariant::GtOnly => (
            boundary_iou_gt_band(pred, gt)?,
            band_width(gt.height(), gt.width()),
        ),
    };
    Ok(BoundaryScores {
        precision: f.precision,
        recall: f.recall,
        bf1: f.bf1,
        tau,
        b_iou,
        band_width,
    })
}
