//! Training objectives evaluated on probability maps: cross-entropy, focal,
//! Dice, Dice+focal and Tversky, each with its analytic gradient with
//! respect to the per-pixel stroke probabilities.
//!
//! Reductions are means over pixels (CE, focal) so values do not depend on
//! resolution; Dice and Tversky are ratios of global sums.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::BinaryMask;

/// Clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("probability {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("buffer length {actual} does not match {width}x{height}")]
    BufferLength {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("dimension mismatch: probabilities {0}x{1}, mask {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid loss parameters: {0}")]
    InvalidParams(&'static str),
}

/// Per-pixel stroke probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, LossError> {
        if data.len() != width * height {
            return Err(LossError::BufferLength {
                width,
                height,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(LossError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Hard 0/1 probabilities from a mask.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            data: mask.data().iter().map(|&v| v as u8 as f64).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// How the focal-loss alpha is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocalAlpha {
    /// The same alpha for every pixel.
    #[default]
    Uniform,
    /// alpha for stroke pixels, 1 - alpha for background.
    ClassBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub focal_alpha_mode: FocalAlpha,
    pub dice_eps: f64,
    pub tversky_alpha: f64,
    pub tversky_beta: f64,
    pub tversky_eps: f64,
    pub combo_dice_weight: f64,
    pub combo_focal_weight: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            focal_alpha_mode: FocalAlpha::Uniform,
            dice_eps: 1.0,
            tversky_alpha: 0.3,
            tversky_beta: 0.7,
            tversky_eps: 1.0,
            combo_dice_weight: 0.6,
            combo_focal_weight: 0.4,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<(), LossError> {
        let nonneg = [
            self.focal_alpha,
            self.focal_gamma,
            self.dice_eps,
            self.tversky_alpha,
            self.tversky_beta,
            self.tversky_eps,
            self.combo_dice_weight,
            self.combo_focal_weight,
        ];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LossError::InvalidParams("all parameters must be finite and >= 0"));
        }
        if ((self.combo_dice_weight + self.combo_focal_weight) - 1.0).abs() > 1e-12 {
            return Err(LossError::InvalidParams("combination weights must sum to 1"));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to each probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    Focal,
    Dice,
    DiceFocal,
    Tversky,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::CrossEntropy,
        LossKind::Focal,
        LossKind::Dice,
        LossKind::DiceFocal,
        LossKind::Tversky,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::Focal => "focal",
            LossKind::Dice => "dice",
            LossKind::DiceFocal => "dice+focal",
            LossKind::Tversky => "tversky",
        }
    }

    pub fn evaluate(
        &self,
        p: &ProbMap,
        g: &BinaryMask,
        params: &LossParams,
    ) -> Result<LossOutput, LossError> {
        match self {
            LossKind::CrossEntropy => ce_loss(p, g),
            LossKind::Focal => focal_loss(p, g, params),
            LossKind::Dice => dice_loss(p, g, params),
            LossKind::DiceFocal => dice_focal_loss(p, g, params),
            LossKind::Tversky => tversky_loss(p, g, params),
        }
    }
}

fn check_dims(p: &ProbMap, g: &BinaryMask) -> Result<(), LossError> {
    if p.width != g.width() || p.height != g.height() {
        return Err(LossError::DimensionMismatch(
            p.width,
            p.height,
            g.width(),
            g.height(),
        ));
    }
    Ok(())
}

/// Clamped value and the derivative of the clamp (0 where it saturates).
fn clamp_prob(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (PROB_EPS, 0.0)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, 0.0)
    } else {
        (p, 1.0)
    }
}

/// Mean binary cross-entropy.
pub fn ce_loss(p: &ProbMap, g: &BinaryMask) -> Result<LossOutput, LossError> {
    check_dims(p, g)?;
    let n = p.data.len().max(1) as f64;
    let mut value = 0.0;
    let gradient = p
        .data
        .iter()
        .zip(g.data())
        .map(|(&pi, &gi)| {
            let (pc, dclamp) = clamp_prob(pi);
            if gi {
                value -= pc.ln();
                -dclamp / (pc * n)
            } else {
                value -= (1.0 - pc).ln();
                dclamp / ((1.0 - pc) * n)
            }
        })
        .collect();
    Ok(LossOutput {
        value: value / n,
        gradient,
    })
}

/// Mean of `-alpha * (1 - p_t)^gamma * ln(p_t)`.
pub fn focal_loss(p: &ProbMap, g: &BinaryMask, params: &LossParams) -> Result<LossOutput, LossError> {
    check_dims(p, g)?;
    params.validate()?;
    let n = p.data.len().max(1) as f64;
    let gamma = params.focal_gamma;
    let mut value = 0.0;
    let gradient = p
        .data
        .iter()
        .zip(g.data())
        .map(|(&pi, &gi)| {
            let (pc, dclamp) = clamp_prob(pi);
            let (pt, sign) = if gi { (pc, 1.0) } else { (1.0 - pc, -1.0) };
            let alpha = match (params.focal_alpha_mode, gi) {
                (FocalAlpha::Uniform, _) | (FocalAlpha::ClassBalanced, true) => params.focal_alpha,
                (FocalAlpha::ClassBalanced, false) => 1.0 - params.focal_alpha,
            };
            let q = 1.0 - pt;
            let ln_pt = pt.ln();
            value += -alpha * q.powf(gamma) * ln_pt;
            // d/dp_t of -a q^g ln p_t = a g q^(g-1) ln p_t - a q^g / p_t
            let dq = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) };
            let d_pt = alpha * dq * ln_pt - alpha * q.powf(gamma) / pt;
            sign * d_pt * dclamp / n
        })
        .collect();
    Ok(LossOutput {
        value: value / n,
        gradient,
    })
}

/// `1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)`.
pub fn dice_loss(p: &ProbMap, g: &BinaryMask, params: &LossParams) -> Result<LossOutput, LossError> {
    check_dims(p, g)?;
    params.validate()?;
    let eps = params.dice_eps;
    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (&pi, &gi) in p.data.iter().zip(g.data()) {
        let gf = gi as u8 as f64;
        inter += pi * gf;
        sp += pi;
        sg += gf;
    }
    let num = 2.0 * inter + eps;
    let den = sp + sg + eps;
    if den == 0.0 {
        return Ok(LossOutput {
            value: 0.0,
            gradient: vec![0.0; p.data.len()],
        });
    }
    let gradient = g
        .data()
        .iter()
        .map(|&gi| -(2.0 * gi as u8 as f64 * den - num) / (den * den))
        .collect();
    Ok(LossOutput {
        value: 1.0 - num / den,
        gradient,
    })
}

/// `w_dice * dice + w_focal * focal`, values and gradients alike.
pub fn dice_focal_loss(
    p: &ProbMap,
    g: &BinaryMask,
    params: &LossParams,
) -> Result<LossOutput, LossError> {
    let d = dice_loss(p, g, params)?;
    let f = focal_loss(p, g, params)?;
    let (wd, wf) = (params.combo_dice_weight, params.combo_focal_weight);
    Ok(LossOutput {
        value: wd * d.value + wf * f.value,
        gradient: d
            .gradient
            .iter()
            .zip(&f.gradient)
            .map(|(a, b)| wd * a + wf * b)
            .collect(),
    })
}

/// `1 - (TP + eps) / (TP + alpha FP + beta FN + eps)` on soft counts.
pub fn tversky_loss(p: &ProbMap, g: &BinaryMask, params: &LossParams) -> Result<LossOutput, LossError> {
    check_dims(p, g)?;
    params.validate()?;
    let (a, b, eps) = (params.tversky_alpha, params.tversky_beta, params.tversky_eps);
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (&pi, &gi) in p.data.iter().zip(g.data()) {
        if gi {
            tp += pi;
            fn_ += 1.0 - pi;
        } else {
            fp += pi;
        }
    }
    let num = tp + eps;
    let den = tp + a * fp + b * fn_ + eps;
    if den == 0.0 {
        return Ok(LossOutput {
            value: 0.0,
            gradient: vec![0.0; p.data.len()],
        });
    }
    let gradient = g
        .data()
        .iter()
        .map(|&gi| {
            let (dnum, dden) = if gi { (1.0, 1.0 - b) } else { (0.0, a) };
            -(dnum * den - num * dden) / (den * den)
        })
        .collect();
    Ok(LossOutput {
        value: 1.0 - num / den,
        gradient,
    })
}

/// Largest absolute gap between the analytic gradient and a central
/// finite difference with step `h`.
pub fn max_gradient_error(
    kind: LossKind,
    p: &ProbMap,
    g: &BinaryMask,
    params: &LossParams,
    h: f64,
) -> Result<f64, LossError> {
    let analytic = kind.evaluate(p, g, params)?.gradient;
    let mut probe = p.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.data[i];
        probe.data[i] = orig + h;
        let up = kind.evaluate(&probe, g, params)?.value;
        probe.data[i] = orig - h;
        let down = kind.evaluate(&probe, g, params)?.value;
        probe.data[i] = orig;
        worst = worst.max(((up - down) / (2.0 * h) - a).abs());
    }
    Ok(worst)
}
