//! Classical binarizers: Otsu, adaptive Gaussian and Sauvola.
//!
//! Strokes are dark on a light board, so every method marks pixels
//! *below* its threshold as foreground.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{BinaryMask, GrayImage};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("window size must be odd and >= 3, got {0}")]
    BadWindow(usize),
    #[error("dynamic range R must be positive, got {0}")]
    BadRange(f64),
    #[error("image is empty")]
    EmptyImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SauvolaParams {
    pub window: usize,
    pub k: f64,
    pub r: f64,
}

impl Default for SauvolaParams {
    fn default() -> Self {
        Self {
            window: 51,
            k: 0.2,
            r: 128.0,
        }
    }
}

impl SauvolaParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        check_window(self.window)?;
        if self.r.is_nan() || self.r <= 0.0 {
            return Err(BaselineError::BadRange(self.r));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub block: usize,
    pub c: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self { block: 51, c: 15.0 }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        check_window(self.block)
    }

    /// Kernel sigma tied to the block size: `0.3 * ((block - 1) / 2 - 1) + 0.8`.
    pub fn sigma(&self) -> f64 {
        0.3 * ((self.block as f64 - 1.0) * 0.5 - 1.0) + 0.8
    }
}

fn check_window(w: usize) -> Result<(), BaselineError> {
    if w < 3 || w.is_multiple_of(2) {
        Err(BaselineError::BadWindow(w))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    pub threshold: u8,
    pub mask: BinaryMask,
    /// Set when the histogram has a single occupied bin.
    pub degenerate: bool,
}

/// Global threshold maximizing between-class variance over the 256-bin
/// histogram; the first maximizer wins. Stroke = value <= threshold.
pub fn otsu(img: &GrayImage) -> Result<OtsuResult, BaselineError> {
    let n = img.data().len();
    if n == 0 {
        return Err(BaselineError::EmptyImage);
    }
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() == 1 {
        let t = occupied[0] as u8;
        return Ok(OtsuResult {
            threshold: t,
            mask: BinaryMask::empty(img.width(), img.height()),
            degenerate: true,
        });
    }
    let total = n as f64;
    let sum_all: u64 = (0..256).map(|i| i as u64 * hist[i]).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best = (0u8, f64::NEG_INFINITY);
    for t in 0..256usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = n as u64 - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let w0 = n0 as f64 / total;
        let w1 = n1 as f64 / total;
        let mu0 = s0 as f64 / n0 as f64;
        let mu1 = (sum_all - s0) as f64 / n1 as f64;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.1 {
            best = (t as u8, between);
        }
    }
    let t = best.0;
    let data = img.data().iter().map(|&v| v <= t).collect();
    Ok(OtsuResult {
        threshold: t,
        mask: BinaryMask::new(img.width(), img.height(), data).expect("same dims"),
        degenerate: false,
    })
}

/// Normalized Gaussian taps `k[0..=r]` for offsets 0..=r.
fn gaussian_half_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = size / 2;
    let raw: Vec<f64> = (0..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Gaussian-weighted local mean with replicated borders. Taps at `±i` are
/// summed pairwise first so the result is exactly mirror-symmetric.
pub fn gaussian_local_mean(img: &GrayImage, block: usize, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let k = gaussian_half_kernel(block, sigma);
    let r = k.len() - 1;
    let mut rows = vec![0.0f64; w * h];
    let mut padded = vec![0.0f64; w + 2 * r];
    for y in 0..h {
        let src = &img.data()[y * w..(y + 1) * w];
        for (i, slot) in padded.iter_mut().enumerate() {
            let x = (i as isize - r as isize).clamp(0, w as isize - 1) as usize;
            *slot = src[x] as f64;
        }
        let dst = &mut rows[y * w..(y + 1) * w];
        for x in 0..w {
            let c = x + r;
            let mut acc = k[0] * padded[c];
            for i in 1..=r {
                acc += k[i] * (padded[c - i] + padded[c + i]);
            }
            dst[x] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    let clamp_row = |y: isize| y.clamp(0, h as isize - 1) as usize * w;
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        let c = rows[y * w..(y + 1) * w].iter();
        for (d, &v) in dst.iter_mut().zip(c) {
            *d = k[0] * v;
        }
        for i in 1..=r {
            let up = clamp_row(y as isize - i as isize);
            let down = clamp_row(y as isize + i as isize);
            let ki = k[i];
            for x in 0..w {
                dst[x] += ki * (rows[up + x] + rows[down + x]);
            }
        }
    }
    out
}

/// Stroke iff value < gaussian_mean - C over a block x block window.
pub fn adaptive_gaussian(img: &GrayImage, p: &AdaptiveParams) -> Result<BinaryMask, BaselineError> {
    p.validate()?;
    if img.data().is_empty() {
        return Err(BaselineError::EmptyImage);
    }
    let mean = gaussian_local_mean(img, p.block, p.sigma());
    let data = img
        .data()
        .iter()
        .zip(&mean)
        .map(|(&v, &m)| (v as f64) < m - p.c)
        .collect();
    Ok(BinaryMask::new(img.width(), img.height(), data).expect("same dims"))
}

/// Windowed mean and standard deviation with the window clipped to the
/// image. Sums of values and squared values are accumulated exactly in
/// integers: running column sums over the window rows, then a prefix sum
/// along each row gives every window total in O(1).
pub fn local_mean_std(img: &GrayImage, window: usize) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let r = window / 2;
    let data = img.data();
    let mut col_s = vec![0u64; w];
    let mut col_s2 = vec![0u64; w];
    let add_row = |y: usize, sign: bool, s: &mut [u64], s2: &mut [u64]| {
        for x in 0..w {
            let v = data[y * w + x] as u64;
            if sign {
                s[x] += v;
                s2[x] += v * v;
            } else {
                s[x] -= v;
                s2[x] -= v * v;
            }
        }
    };
    for y in 0..=r.min(h - 1) {
        add_row(y, true, &mut col_s, &mut col_s2);
    }
    let mut mean = vec![0.0; w * h];
    let mut std = vec![0.0; w * h];
    let mut pre = vec![0u64; w + 1];
    let mut pre2 = vec![0u64; w + 1];
    for y in 0..h {
        if y > 0 {
            if y + r < h {
                add_row(y + r, true, &mut col_s, &mut col_s2);
            }
            if y > r {
                add_row(y - r - 1, false, &mut col_s, &mut col_s2);
            }
        }
        let rows = (y + r).min(h - 1) - y.saturating_sub(r) + 1;
        for x in 0..w {
            pre[x + 1] = pre[x] + col_s[x];
            pre2[x + 1] = pre2[x] + col_s2[x];
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            let n = (rows * (hi - lo)) as f64;
            let s = (pre[hi] - pre[lo]) as f64;
            let s2 = (pre2[hi] - pre2[lo]) as f64;
            let mu = s / n;
            let var = (s2 / n - mu * mu).max(0.0);
            mean[y * w + x] = mu;
            std[y * w + x] = var.sqrt();
        }
    }
    (mean, std)
}

/// Sauvola threshold `T = mu * (1 + k * (sigma / R - 1))`.
pub fn sauvola_threshold(mu: f64, sigma: f64, p: &SauvolaParams) -> f64 {
    mu * (1.0 + p.k * (sigma / p.r - 1.0))
}

/// Stroke iff value < Sauvola threshold.
pub fn sauvola(img: &GrayImage, p: &SauvolaParams) -> Result<BinaryMask, BaselineError> {
    p.validate()?;
    if img.data().is_empty() {
        return Err(BaselineError::EmptyImage);
    }
    let (mean, std) = local_mean_std(img, p.window);
    let data = img
        .data()
        .iter()
        .zip(mean.iter().zip(&std))
        .map(|(&v, (&mu, &sd))| (v as f64) < sauvola_threshold(mu, sd, p))
        .collect();
    Ok(BinaryMask::new(img.width(), img.height(), data).expect("same dims"))
}

/// Selector used by the CLI and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Otsu,
    Adaptive,
    Sauvola,
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Otsu => "otsu",
            BaselineMethod::Adaptive => "adaptive",
            BaselineMethod::Sauvola => "sauvola",
        }
    }
}

/// Runs one baseline with the given parameters.
pub fn run_baseline(
    img: &GrayImage,
    method: BaselineMethod,
    adaptive: &AdaptiveParams,
    sauvola_params: &SauvolaParams,
) -> Result<BinaryMask, BaselineError> {
    match method {
        BaselineMethod::Otsu => otsu(img).map(|r| r.mask),
        BaselineMethod::Adaptive => adaptive_gaussian(img, adaptive),
        BaselineMethod::Sauvola => sauvola(img, sauvola_params),
    }
}
