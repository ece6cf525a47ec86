//! Binary morphology, exact Euclidean distance transform and Zhang–Suen
//! thinning.
//!
//! Border convention: pixels outside the image are background for every
//! operation here, so erosion eats a frame at image edges and dilation
//! never grows from outside.

use crate::imgcore::BinaryMask;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorphologyError {
    #[error("structuring element size must be odd and >= 1, got {0}")]
    EvenStructuringElement(usize),
    #[error("rectangular footprint must be at least 1x1, got {0}x{1}")]
    EmptyFootprint(usize, usize),
}

/// Square structuring element centered on the anchor pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    size: usize,
}

impl StructuringElement {
    pub fn square(size: usize) -> Result<Self, MorphologyError> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(MorphologyError::EvenStructuringElement(size));
        }
        Ok(Self { size })
    }

    /// The 3×3 square used for contour extraction.
    pub const SQUARE_3: StructuringElement = StructuringElement { size: 3 };

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    fn footprint(&self) -> Footprint {
        let r = self.radius();
        Footprint {
            left: r,
            right: r,
            up: r,
            down: r,
        }
    }
}

/// Rectangular window expressed as extents around the anchor pixel.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    left: usize,
    right: usize,
    up: usize,
    down: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BoxMode {
    Any,
    All,
}

// One pass of a separable box filter along a line of `len` samples
// addressed by `at(i)`. Windows reaching past the ends see background.
fn box_line(
    src: impl Fn(usize) -> bool,
    len: usize,
    before: usize,
    after: usize,
    mode: BoxMode,
    prefix: &mut Vec<u32>,
    mut out: impl FnMut(usize, bool),
) {
    prefix.clear();
    prefix.push(0);
    let mut acc = 0u32;
    for i in 0..len {
        acc += src(i) as u32;
        prefix.push(acc);
    }
    let window = (before + after + 1) as u32;
    for i in 0..len {
        let lo = i.saturating_sub(before);
        let hi = (i + after + 1).min(len);
        let count = prefix[hi] - prefix[lo];
        let v = match mode {
            BoxMode::Any => count > 0,
            BoxMode::All => count == window,
        };
        out(i, v);
    }
}

fn box_filter(mask: &BinaryMask, fp: Footprint, mode: BoxMode) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let src = mask.data();
    let mut tmp = vec![false; w * h];
    let mut prefix = Vec::with_capacity(w.max(h) + 1);
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let dst = &mut tmp[y * w..(y + 1) * w];
        box_line(|i| row[i], w, fp.left, fp.right, mode, &mut prefix, |i, v| {
            dst[i] = v
        });
    }
    let mut out = BinaryMask::empty(w, h);
    let data = out.data_mut();
    for x in 0..w {
        box_line(
            |i| tmp[i * w + x],
            h,
            fp.up,
            fp.down,
            mode,
            &mut prefix,
            |i, v| data[i * w + x] = v,
        );
    }
    out
}

/// Pixel set iff any pixel under the footprint is set.
pub fn dilate(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    box_filter(mask, se.footprint(), BoxMode::Any)
}

/// Pixel set iff the whole footprint lies inside the image and is set.
pub fn erode(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    box_filter(mask, se.footprint(), BoxMode::All)
}

/// Contour pixels: `dilate3(m) AND NOT erode3(m)`.
pub fn morph_gradient(mask: &BinaryMask) -> BinaryMask {
    let d = dilate(mask, StructuringElement::SQUARE_3);
    let e = erode(mask, StructuringElement::SQUARE_3);
    d.and_not(&e)
}

/// Erosion by a `w × h` rectangle anchored at its top-left pixel, so the
/// footprint of (x, y) covers x..x+w and y..y+h.
pub fn erode_rect(mask: &BinaryMask, w: usize, h: usize) -> Result<BinaryMask, MorphologyError> {
    if w == 0 || h == 0 {
        return Err(MorphologyError::EmptyFootprint(w, h));
    }
    Ok(box_filter(
        mask,
        Footprint {
            left: 0,
            right: w - 1,
            up: 0,
            down: h - 1,
        },
        BoxMode::All,
    ))
}

/// Per-pixel Euclidean distance (in pixels) to the nearest seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value reported everywhere when there are no seeds: exceeds any
    /// distance achievable inside the image.
    pub fn sentinel(width: usize, height: usize) -> f64 {
        (width + height + 1) as f64
    }

    /// Pixels with distance `<= d`.
    pub fn within(&self, d: f64) -> BinaryMask {
        let data = self.data.iter().map(|&v| v <= d).collect();
        BinaryMask::new(self.width, self.height, data).expect("same dimensions")
    }
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) over the
// finite samples of `f`, written into `out`. Values are squared distances
// held as exact integers in f64.
fn edt_1d(f: &[f64], out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let qf = q as f64;
        let mut s = f64::NEG_INFINITY;
        while let Some(&v) = sites.last() {
            let vf = v as f64;
            s = ((fq + qf * qf) - (f[v] + vf * vf)) / (2.0 * (qf - vf));
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
                s = f64::NEG_INFINITY;
            } else {
                break;
            }
        }
        sites.push(q);
        bounds.push(s);
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    // bounds[k] is where sites[k] starts to dominate; bounds[0] = -inf
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < sites.len() && bounds[k + 1] < qf {
            k += 1;
        }
        let v = sites[k];
        let dv = qf - v as f64;
        *slot = dv * dv + f[v];
    }
}

/// Squared Euclidean distance to the nearest seed, `None` when there are
/// no seeds at all.
pub fn edt_squared(seeds: &BinaryMask) -> Option<Vec<f64>> {
    let (w, h) = (seeds.width(), seeds.height());
    if seeds.count() == 0 {
        return None;
    }
    let mut grid: Vec<f64> = seeds
        .data()
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let mut sites = Vec::new();
    let mut bounds = Vec::new();
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        edt_1d(&col, &mut col_out, &mut sites, &mut bounds);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        edt_1d(row, &mut row_out, &mut sites, &mut bounds);
        row.copy_from_slice(&row_out);
    }
    Some(grid)
}

/// Exact Euclidean distance transform. With no seeds every pixel gets
/// [`DistanceField::sentinel`].
pub fn edt(seeds: &BinaryMask) -> DistanceField {
    let (width, height) = (seeds.width(), seeds.height());
    let data = match edt_squared(seeds) {
        Some(sq) => sq.into_iter().map(f64::sqrt).collect(),
        None => vec![DistanceField::sentinel(width, height); width * height],
    };
    DistanceField {
        width,
        height,
        data,
    }
}

/// Zhang–Suen thinning to an 8-connected, one-pixel-wide skeleton.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut img = mask.clone();
    let mut to_clear = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_clear.clear();
            for y in 0..h {
                for x in 0..w {
                    if img.get(x, y) && zs_deletable(&img, x as isize, y as isize, step) {
                        to_clear.push(y * w + x);
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                let data = img.data_mut();
                for &i in &to_clear {
                    data[i] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    img
}

// Neighbors P2..P9 clockwise from north.
const ZS_OFFSETS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn zs_deletable(img: &BinaryMask, x: isize, y: isize, step: usize) -> bool {
    let mut p = [false; 8];
    for (slot, (dx, dy)) in p.iter_mut().zip(ZS_OFFSETS) {
        *slot = img.get_or_bg(x + dx, y + dy);
    }
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = p;
    if step == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}
