//! Seeded photometric and geometric augmentation: the offline weak/strong
//! variant generator and the online per-sample ops.
//!
//! All randomness comes from ChaCha8 streams whose seeds are derived from
//! `(master_seed, image_id, variant_index)`, so output never depends on
//! scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{BinaryMask, ImageError, RgbImage};
use crate::morphology::erode_rect;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("glare angle {0} is not a multiple of 45 degrees")]
    BadAngle(u32),
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn check(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), AugmentError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(AugmentError::OutOfRange { name, value, lo, hi })
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Sampling ranges for offline profiles. Written into every provenance
/// file so the distributions are explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRanges {
    pub weak_probability: f64,
    pub brightness: [f64; 2],
    pub contrast: [f64; 2],
    pub gamma: [f64; 2],
    /// Signed R/B gain offset.
    pub temperature: [f64; 2],
    pub blur_sigma: [f64; 2],
    /// In 8-bit intensity units.
    pub noise_sigma: [f64; 2],
    /// Factor applied to blur and noise sigma for small-stroke images.
    pub gentle_factor: f64,
    pub glare_strength: [f64; 2],
    /// Fraction of the image extent across the band.
    pub shadow_width: [f64; 2],
    pub shadow_strength: [f64; 2],
}

impl Default for SampleRanges {
    fn default() -> Self {
        Self {
            weak_probability: 0.7,
            brightness: [0.7, 1.3],
            contrast: [0.8, 1.2],
            gamma: [0.7, 1.4],
            temperature: [-0.1, 0.1],
            blur_sigma: [0.5, 1.5],
            noise_sigma: [2.0, 8.0],
            gentle_factor: 0.5,
            glare_strength: [0.15, 0.5],
            shadow_width: [0.05, 0.3],
            shadow_strength: [0.2, 0.6],
        }
    }
}

/// Small-stroke images get halved blur and noise.
pub fn is_small_stroke_id(image_id: &str) -> bool {
    image_id.parse::<u32>().is_ok_and(|n| (22..=37).contains(&n))
}

/// Gamma, then brightness, then contrast, per channel.
pub fn adjust_photometric(
    img: &RgbImage,
    brightness: f64,
    contrast: f64,
    gamma: f64,
) -> Result<RgbImage, AugmentError> {
    check("brightness", brightness, 0.7, 1.3)?;
    check("contrast", contrast, 0.8, 1.2)?;
    check("gamma", gamma, 0.7, 1.4)?;
    Ok(photometric_unchecked(img, brightness, contrast, gamma))
}

fn photometric_unchecked(img: &RgbImage, brightness: f64, contrast: f64, gamma: f64) -> RgbImage {
    let lut: Vec<u8> = (0..=255u32)
        .map(|v| {
            let x = (v as f64 / 255.0).powf(gamma) * brightness;
            to_u8(((x - 0.5) * contrast + 0.5) * 255.0)
        })
        .collect();
    map_channels(img, |_, v| lut[v as usize])
}

fn map_channels(img: &RgbImage, f: impl Fn(usize, u8) -> u8) -> RgbImage {
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| f(i % 3, v))
        .collect();
    RgbImage::new(img.width(), img.height(), data).expect("same dimensions")
}

/// Warm (shift > 0) or cool (shift < 0) cast: red gain `1 + shift`, blue
/// gain `1 - shift`.
pub fn color_temperature(img: &RgbImage, shift: f64) -> Result<RgbImage, AugmentError> {
    check("temperature", shift, -0.1, 0.1)?;
    Ok(map_channels(img, |c, v| match c {
        0 => to_u8(v as f64 * (1.0 + shift)),
        2 => to_u8(v as f64 * (1.0 - shift)),
        _ => v,
    }))
}

/// Normalized Gaussian taps `[w0, w1, ..., wr]` for offsets `0..=r`,
/// `r = ceil(3 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as usize;
    let raw: Vec<f64> = (0..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    raw.into_iter().map(|w| w / total).collect()
}

fn convolve_line(src: &[f64], taps: &[f64], out: &mut [f64]) {
    let n = src.len() as isize;
    let at = |i: isize| src[i.clamp(0, n - 1) as usize];
    for (x, o) in out.iter_mut().enumerate() {
        let x = x as isize;
        let mut acc = taps[0] * at(x);
        for (k, w) in taps.iter().enumerate().skip(1) {
            let k = k as isize;
            acc += w * (at(x - k) + at(x + k));
        }
        *o = acc;
    }
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> Result<RgbImage, AugmentError> {
    check("sigma", sigma, f64::MIN_POSITIVE, f64::MAX)?;
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let taps = gaussian_taps(sigma);
    let mut out = img.clone();
    let mut row = vec![0.0; w];
    let mut col = vec![0.0; h];
    let mut tmp_row = vec![0.0; w];
    let mut tmp_col = vec![0.0; h];
    for c in 0..3 {
        let mut plane = vec![0.0; w * h];
        for y in 0..h {
            for (x, r) in row.iter_mut().enumerate() {
                *r = img.data()[(y * w + x) * 3 + c] as f64;
            }
            convolve_line(&row, &taps, &mut tmp_row);
            plane[y * w..(y + 1) * w].copy_from_slice(&tmp_row);
        }
        for x in 0..w {
            for (y, v) in col.iter_mut().enumerate() {
                *v = plane[y * w + x];
            }
            convolve_line(&col, &taps, &mut tmp_col);
            for (y, v) in tmp_col.iter().enumerate() {
                out.data_mut()[(y * w + x) * 3 + c] = to_u8(*v);
            }
        }
    }
    Ok(out)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every channel sample.
pub fn add_gaussian_noise(img: &RgbImage, sigma: f64, seed: u64) -> Result<RgbImage, AugmentError> {
    check("sigma", sigma, f64::MIN_POSITIVE, f64::MAX)?;
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| to_u8(v as f64 + normal.sample(&mut rng)))
        .collect();
    Ok(RgbImage::new(img.width(), img.height(), data)?)
}

/// Adds a linear brightness ramp rising toward `angle_deg` (0 = right,
/// 90 = up), peaking at `strength * 255`.
pub fn overlay_glare(img: &RgbImage, angle_deg: u32, strength: f64) -> Result<RgbImage, AugmentError> {
    if !angle_deg.is_multiple_of(45) || angle_deg >= 360 {
        return Err(AugmentError::BadAngle(angle_deg));
    }
    check("strength", strength, 0.0, 1.0)?;
    let (w, h) = (img.width(), img.height());
    let theta = (angle_deg as f64).to_radians();
    let (dx, dy) = (theta.cos(), -theta.sin());
    let proj = |x: f64, y: f64| x * dx + y * dy;
    let corners = [
        proj(0.0, 0.0),
        proj(w as f64 - 1.0, 0.0),
        proj(0.0, h as f64 - 1.0),
        proj(w as f64 - 1.0, h as f64 - 1.0),
    ];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let t = (proj(x as f64, y as f64) - lo) / span;
            let add = strength * 255.0 * t;
            let i = (y * w + x) * 3;
            for v in &mut out.data_mut()[i..i + 3] {
                *v = to_u8(*v as f64 + add);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandAxis {
    /// A band of columns.
    Vertical,
    /// A band of rows.
    Horizontal,
}

/// Multiplies the `width` columns (or rows) starting at `offset` by
/// `1 - strength`. The band is clipped to the image.
pub fn overlay_shadow(
    img: &RgbImage,
    axis: BandAxis,
    offset: usize,
    width: usize,
    strength: f64,
) -> Result<RgbImage, AugmentError> {
    check("strength", strength, 0.0, 1.0)?;
    let (w, h) = (img.width(), img.height());
    let gain = 1.0 - strength;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let pos = match axis {
                BandAxis::Vertical => x,
                BandAxis::Horizontal => y,
            };
            if pos >= offset && pos < offset.saturating_add(width) {
                let i = (y * w + x) * 3;
                for v in &mut out.data_mut()[i..i + 3] {
                    *v = to_u8(*v as f64 * gain);
                }
            }
        }
    }
    Ok(out)
}

pub fn flip_h(img: &RgbImage, mask: &BinaryMask) -> (RgbImage, BinaryMask) {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, img.pixel(w - 1 - x, y));
        }
    }
    (out, mask.flip_h())
}

/// Rotates image and mask by `degrees` (counter-clockwise) about the image
/// center. The image is sampled bilinearly with white outside the frame;
/// the mask uses nearest sampling with background outside.
pub fn rotate(
    img: &RgbImage,
    mask: &BinaryMask,
    degrees: f64,
) -> Result<(RgbImage, BinaryMask), AugmentError> {
    check("degrees", degrees, -10.0, 10.0)?;
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(ImageError::DimensionMismatch(img.width(), img.height(), mask.width(), mask.height()).into());
    }
    if degrees == 0.0 {
        return Ok((img.clone(), mask.clone()));
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    // inverse map: destination -> source
    let src = |x: usize, y: usize| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        (c * u - s * v + cx, s * u + c * v + cy)
    };
    let sample = |x: isize, y: isize| -> [f64; 3] {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            [255.0; 3]
        } else {
            img.pixel(x as usize, y as usize).map(f64::from)
        }
    };
    let mut out = RgbImage::filled(w, h, [255; 3]);
    let out_mask = BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = src(x, y);
        let (nx, ny) = (sx.round(), sy.round());
        nx >= 0.0 && ny >= 0.0 && (nx as usize) < w && (ny as usize) < h && mask.get(nx as usize, ny as usize)
    });
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x, y);
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let p00 = sample(x0, y0);
            let p10 = sample(x0 + 1, y0);
            let p01 = sample(x0, y0 + 1);
            let p11 = sample(x0 + 1, y0 + 1);
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = p00[ch] * (1.0 - fx) + p10[ch] * fx;
                let bot = p01[ch] * (1.0 - fx) + p11[ch] * fx;
                px[ch] = to_u8(top * (1.0 - fy) + bot * fy);
            }
            out.set_pixel(x, y, px);
        }
    }
    Ok((out, out_mask))
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the id bytes.
fn hash_id(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of one variant: a SplitMix64 chain over master seed, FNV-1a of
/// the image id, and variant index.
pub fn variant_seed(master_seed: u64, image_id: &str, variant: u64) -> u64 {
    mix64(mix64(mix64(master_seed) ^ hash_id(image_id)) ^ variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlareParams {
    pub angle_deg: u32,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowParams {
    pub axis: BandAxis,
    /// Band start and width as fractions of the extent across the band.
    pub offset: f64,
    pub width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileParams {
    Weak {
        gamma: f64,
        brightness: f64,
        contrast: f64,
        temperature: f64,
        blur_sigma: f64,
        noise_sigma: f64,
    },
    Strong {
        glare: Option<GlareParams>,
        shadow: Option<ShadowParams>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentProfile {
    pub kind: ProfileKind,
    pub gentle: bool,
    pub rng_seed: u64,
    pub params: ProfileParams,
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    rng.random_range(r[0]..=r[1])
}

/// Draws a weak (probability 0.7) or strong profile from `seed`.
pub fn sample_profile(seed: u64, gentle: bool, ranges: &SampleRanges) -> AugmentProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weak = rng.random_bool(ranges.weak_probability);
    let params = if weak {
        let damp = if gentle { ranges.gentle_factor } else { 1.0 };
        ProfileParams::Weak {
            gamma: uniform(&mut rng, ranges.gamma),
            brightness: uniform(&mut rng, ranges.brightness),
            contrast: uniform(&mut rng, ranges.contrast),
            temperature: uniform(&mut rng, ranges.temperature),
            blur_sigma: uniform(&mut rng, ranges.blur_sigma) * damp,
            noise_sigma: uniform(&mut rng, ranges.noise_sigma) * damp,
        }
    } else {
        // glare, shadow, or both with equal probability
        let combo = rng.random_range(0..3u8);
        let glare = (combo != 1).then(|| GlareParams {
            angle_deg: 45 * rng.random_range(0..8u32),
            strength: uniform(&mut rng, ranges.glare_strength),
        });
        let shadow = (combo != 0).then(|| {
            let axis = if rng.random_bool(0.5) { BandAxis::Vertical } else { BandAxis::Horizontal };
            let width = uniform(&mut rng, ranges.shadow_width);
            ShadowParams {
                axis,
                offset: rng.random_range(0.0..=1.0 - width),
                width,
                strength: uniform(&mut rng, ranges.shadow_strength),
            }
        });
        ProfileParams::Strong { glare, shadow }
    };
    AugmentProfile {
        kind: if weak { ProfileKind::Weak } else { ProfileKind::Strong },
        gentle,
        rng_seed: seed,
        params,
    }
}

/// Applies a sampled profile; only the image changes.
pub fn apply_profile(img: &RgbImage, profile: &AugmentProfile) -> Result<RgbImage, AugmentError> {
    match profile.params {
        ProfileParams::Weak {
            gamma,
            brightness,
            contrast,
            temperature,
            blur_sigma,
            noise_sigma,
        } => {
            let out = adjust_photometric(img, brightness, contrast, gamma)?;
            let out = color_temperature(&out, temperature)?;
            let out = gaussian_blur(&out, blur_sigma)?;
            add_gaussian_noise(&out, noise_sigma, mix64(profile.rng_seed ^ 0x006e_6f69_7365))
        }
        ProfileParams::Strong { glare, shadow } => {
            let mut out = img.clone();
            if let Some(g) = glare {
                out = overlay_glare(&out, g.angle_deg, g.strength)?;
            }
            if let Some(s) = shadow {
                let extent = match s.axis {
                    BandAxis::Vertical => out.width(),
                    BandAxis::Horizontal => out.height(),
                } as f64;
                let offset = (s.offset * extent).floor() as usize;
                let width = ((s.width * extent).round() as usize).max(1);
                out = overlay_shadow(&out, s.axis, offset, width, s.strength)?;
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedVariant {
    /// File stem, `image_<id>_aug<k>`.
    pub name: String,
    pub variant: usize,
    pub image: RgbImage,
    pub mask: BinaryMask,
    pub profile: AugmentProfile,
}

/// Provenance record written next to each variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub image_id: String,
    pub variant: usize,
    pub master_seed: u64,
    pub profile: AugmentProfile,
    pub ranges: SampleRanges,
}

impl AugmentedVariant {
    pub fn provenance(&self, image_id: &str, master_seed: u64) -> Provenance {
        Provenance {
            image_id: image_id.to_string(),
            variant: self.variant,
            master_seed,
            profile: self.profile,
            ranges: SampleRanges::default(),
        }
    }
}

/// Generates `n` variants numbered `0..n`. Variants are computed in
/// parallel; each depends only on its own derived seed.
pub fn generate_offline(
    img: &RgbImage,
    mask: &BinaryMask,
    image_id: &str,
    n: usize,
    master_seed: u64,
) -> Result<Vec<AugmentedVariant>, AugmentError> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(ImageError::DimensionMismatch(img.width(), img.height(), mask.width(), mask.height()).into());
    }
    let gentle = is_small_stroke_id(image_id);
    let ranges = SampleRanges::default();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let profile = sample_profile(variant_seed(master_seed, image_id, k as u64), gentle, &ranges);
            Ok(AugmentedVariant {
                name: format!("image_{image_id}_aug{k}"),
                variant: k,
                image: apply_profile(img, &profile)?,
                mask: mask.clone(),
                profile,
            })
        })
        .collect()
}

/// What the online augmenter did to one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineOps {
    pub flipped: bool,
    pub rotation_deg: Option<f64>,
    pub brightness: f64,
    pub contrast: f64,
    pub eroded: bool,
}

/// Training-time augmentation: flip (50%), rotation within +-10 degrees
/// (50%), brightness/contrast jitter of +-0.3, and a 2x2 mask erosion (40%).
pub fn online_augment(
    img: &RgbImage,
    mask: &BinaryMask,
    seed: u64,
) -> Result<(RgbImage, BinaryMask, OnlineOps), AugmentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flipped = rng.random_bool(0.5);
    let rotation_deg = rng.random_bool(0.5).then(|| rng.random_range(-10.0..=10.0));
    let brightness = rng.random_range(0.7..=1.3);
    let contrast = rng.random_range(0.7..=1.3);
    let eroded = rng.random_bool(0.4);

    let (mut out, mut m) = if flipped { flip_h(img, mask) } else { (img.clone(), mask.clone()) };
    if let Some(deg) = rotation_deg {
        (out, m) = rotate(&out, &m, deg)?;
    }
    out = photometric_unchecked(&out, brightness, contrast, 1.0);
    if eroded {
        m = erode_rect(&m, 2, 2).expect("nonzero footprint");
    }
    Ok((
        out,
        m,
        OnlineOps {
            flipped,
            rotation_deg,
            brightness,
            contrast,
            eroded,
        },
    ))
}
