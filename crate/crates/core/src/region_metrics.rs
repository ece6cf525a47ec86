//! Pixel-level confusion counts, F1 and IoU.

use serde::{Deserialize, Serialize};

use crate::imgcore::{BinaryMask, ImageError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub f1: f64,
    pub iou: f64,
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts, ImageError> {
    pred.ensure_same_dims(gt)?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// F1 = 2tp/(2tp+fp+fn), IoU = tp/(tp+fp+fn). Two empty masks score 1.
pub fn region_scores(c: &ConfusionCounts) -> RegionScores {
    let union = c.tp + c.fp + c.fn_;
    if union == 0 {
        return RegionScores { f1: 1.0, iou: 1.0 };
    }
    let tp = c.tp as f64;
    RegionScores {
        f1: 2.0 * tp / (2.0 * tp + c.fp as f64 + c.fn_ as f64),
        iou: tp / union as f64,
    }
}
