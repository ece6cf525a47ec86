//! Brute-force oracles and synthetic data shared by the integration tests.
//! Nothing here calls into the library's own algorithms.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokebench::imgcore::{BinaryMask, GrayImage};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density))
}

/// A few random filled rectangles, which gives long straight contours.
pub fn random_blobs(rng: &mut ChaCha8Rng, w: usize, h: usize, count: usize) -> BinaryMask {
    let rects: Vec<(usize, usize, usize, usize)> = (0..count)
        .map(|_| {
            let x0 = rng.random_range(0..w);
            let y0 = rng.random_range(0..h);
            let x1 = rng.random_range(x0..=w);
            let y1 = rng.random_range(y0..=h);
            (x0, y0, x1, y1)
        })
        .collect();
    BinaryMask::from_fn(w, h, |x, y| {
        rects.iter().any(|&(x0, y0, x1, y1)| x >= x0 && x < x1 && y >= y0 && y < y1)
    })
}

pub fn points(m: &BinaryMask) -> Vec<(usize, usize)> {
    (0..m.height())
        .flat_map(|y| (0..m.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| m.get(x, y))
        .collect()
}

/// Squared distance to the nearest seed by exhaustive search; `None`
/// without seeds.
pub fn brute_edt_sq(seeds: &BinaryMask) -> Option<Vec<f64>> {
    let pts = points(seeds);
    if pts.is_empty() {
        return None;
    }
    let (w, h) = (seeds.width(), seeds.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let best = pts
                .iter()
                .map(|&(px, py)| {
                    let dx = px as i64 - x as i64;
                    let dy = py as i64 - y as i64;
                    dx * dx + dy * dy
                })
                .min()
                .unwrap();
            out.push(best as f64);
        }
    }
    Some(out)
}

/// 3x3 dilation minus 3x3 erosion, outside pixels counted as background.
pub fn brute_contour(m: &BinaryMask) -> BinaryMask {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let at = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && m.get(x as usize, y as usize);
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        let (x, y) = (x as i64, y as i64);
        let mut any = false;
        let mut all = true;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let v = at(x + dx, y + dy);
                any |= v;
                all &= v;
            }
        }
        any && !all
    })
}

/// All-pairs Chebyshev matching of contour pixels. Returns
/// `(precision, recall, bf1)` with the empty-contour conventions.
pub fn brute_bf1(pred: &BinaryMask, gt: &BinaryMask, tau: usize) -> (f64, f64, f64) {
    let p = points(&brute_contour(pred));
    let g = points(&brute_contour(gt));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let near = |a: (usize, usize), b: (usize, usize)| a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) <= tau;
    let mp = p.iter().filter(|&&a| g.iter().any(|&b| near(a, b))).count();
    let mg = g.iter().filter(|&&a| p.iter().any(|&b| near(a, b))).count();
    let prec = mp as f64 / p.len() as f64;
    let rec = mg as f64 / g.len() as f64;
    let f = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
    (prec, rec, f)
}

pub fn brute_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = a.data().iter().zip(b.data()).filter(|(x, y)| **x && **y).count();
    let union = a.data().iter().zip(b.data()).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn brute_f1(pred: &BinaryMask, gt: &BinaryMask) -> f64 {
    let tp = pred.data().iter().zip(gt.data()).filter(|(p, g)| **p && **g).count() as f64;
    let np = pred.count() as f64;
    let ng = gt.count() as f64;
    if np + ng == 0.0 {
        1.0
    } else {
        2.0 * tp / (np + ng)
    }
}

/// Mid-ranks of `values` by counting; ties within `eps`.
pub fn brute_ranks(values: &[f64], eps: f64) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let below = values.iter().filter(|&&u| u < v - eps).count() as f64;
            let tied = values.iter().filter(|&&u| (u - v).abs() <= eps).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact signed-rank p-value by enumerating all `2^n` sign
/// patterns: fraction with `min(W+, W-) <= observed`.
pub fn enumerate_wilcoxon(diffs: &[f64], eps: f64) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| x.abs() > eps).collect();
    if d.is_empty() {
        return (0.0, 1.0);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = brute_ranks(&abs, eps);
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w = w_plus.min(total - w_plus);
    let n = d.len();
    let mut hits = 0u64;
    for bits in 0u64..(1 << n) {
        let wp: f64 = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| ranks[i]).sum();
        if wp.min(total - wp) <= w + 1e-9 {
            hits += 1;
        }
    }
    (w, hits as f64 / (1u64 << n) as f64)
}

/// Central finite difference of `f` at every coordinate of `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Light board with dark strokes: vertical and horizontal bars of a few
/// widths, a soft illumination gradient, and mild deterministic texture.
pub fn synthetic_board(w: usize, h: usize, seed: u64) -> (GrayImage, BinaryMask) {
    let mut r = rng(seed);
    let bars: Vec<(bool, usize, usize)> = (0..40)
        .map(|_| {
            let vertical = r.random_bool(0.5);
            let extent = if vertical { w } else { h };
            let width = r.random_range(3..25);
            (vertical, r.random_range(0..extent.saturating_sub(width).max(1)), width)
        })
        .collect();
    let mask = BinaryMask::from_fn(w, h, |x, y| {
        bars.iter().any(|&(v, start, width)| {
            let pos = if v { x } else { y };
            let other = if v { y } else { x };
            let span = if v { h } else { w };
            pos >= start && pos < start + width && other > span / 10 && other < span - span / 10
        })
    });
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let base = 200.0 + 30.0 * (x as f64 / w as f64) - 20.0 * (y as f64 / h as f64);
            let tex = ((x * 31 + y * 17) % 7) as f64;
            let v = if mask.get(x, y) { 60.0 + tex } else { base + tex };
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    (GrayImage::new(w, h, data).unwrap(), mask)
}
