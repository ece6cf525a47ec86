use crate::imgcore::{BinaryMask, ImageError, RgbImage};

const TP: [u8; 3] = [0, 200, 0];
const FN: [u8; 3] = [220, 0, 0];
const FP: [u8; 3] = [0, 0, 220];
const TN: [u8; 3] = [255, 255, 255];

/// Colors each pixel by outcome: true positive green, false negative red,
/// false positive blue, true negative white.
pub fn error_overlay(pred: &BinaryMask, gt: &BinaryMask) -> Result<RgbImage, ImageError> {
    pred.ensure_same_dims(gt)?;
    let data = pred
        .data()
        .iter()
        .zip(gt.data())
        .flat_map(|(&p, &g)| match (p, g) {
            (true, true) => TP,
            (false, true) => FN,
            (true, false) => FP,
            (false, false) => TN,
        })
        .collect();
    RgbImage::new(pred.width(), pred.height(), data)
}
