//! Raster types shared by every other module: 8-bit RGB and grayscale
//! images, boolean stroke masks, grayscale conversion, fixed-threshold
//! binarization and nearest-neighbor mask resizing.

mod codec;

pub use codec::{decode_image, encode_png, read_image, write_png, DecodedImage, PngRaster};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted width or height, in pixels.
pub const MAX_DIMENSION: usize = 16384;

/// Mask threshold used throughout the evaluation protocol.
pub const DEFAULT_MASK_THRESHOLD: u8 = 127;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(u32),
    #[error("unsupported color layout: {0}")]
    UnsupportedColor(String),
    #[error("truncated image data")]
    TruncatedData,
    #[error("corrupt image data: {0}")]
    CorruptData(String),
    #[error("unrecognized image format")]
    UnknownFormat,
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("buffer length {actual} does not match {expected} for the given dimensions")]
    BufferLength { expected: usize, actual: usize },
    #[error("cannot encode an empty image")]
    EmptyImage,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    Ok(())
}

fn check_len(expected: usize, actual: usize) -> Result<(), ImageError> {
    if expected != actual {
        return Err(ImageError::BufferLength { expected, actual });
    }
    Ok(())
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        check_len(width * height * 3, data.len())?;
        Ok(Self { width, height, data })
    }

    /// Image filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Replicates a grayscale image into all three channels.
    pub fn from_gray(img: &GrayImage) -> Self {
        let data = img.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: img.width,
            height: img.height,
            data,
        }
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        check_len(width * height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Row-major boolean stroke mask; `true` marks stroke (foreground) pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        check_len(width * height, data.len())?;
        Ok(Self { width, height, data })
    }

    /// All-background mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    /// All-foreground mask.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    /// Builds a mask by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Parses rows of `'#'`/`'1'` (foreground) and `'.'`/`'0'` (background).
    /// Intended for tests and small fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let data = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.chars().count(), width, "ragged ascii mask");
                r.chars().map(|c| matches!(c, '#' | '1'))
            })
            .collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Bounds-checked read; out-of-image coordinates read as background.
    pub fn get_or_bg(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            false
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Foreground fraction; 0 for a zero-sized mask.
    pub fn foreground_fraction(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.data.len() as f64
        }
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<(), ImageError> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ))
        }
    }

    pub fn not(&self) -> BinaryMask {
        self.map(|v| !v)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && !b)
    }

    fn map(&self, f: impl Fn(bool) -> bool) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> BinaryMask {
        assert!(self.same_dims(other), "mask dimensions differ");
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Mask rendered as 8-bit gray with stroke = 255, background = 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
        }
    }

    /// Horizontal mirror.
    pub fn flip_h(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }
}

/// Channel weights for RGB to gray conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayWeights {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl GrayWeights {
    /// ITU-R BT.601 luma weights.
    pub const BT601: GrayWeights = GrayWeights {
        r: 0.299,
        g: 0.587,
        b: 0.114,
    };
    /// ITU-R BT.709 luma weights.
    pub const BT709: GrayWeights = GrayWeights {
        r: 0.2126,
        g: 0.7152,
        b: 0.0722,
    };
}

impl Default for GrayWeights {
    fn default() -> Self {
        Self::BT601
    }
}

/// Converts to grayscale with BT.601 weights.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    to_gray_with(img, GrayWeights::BT601)
}

pub fn to_gray_with(img: &RgbImage, w: GrayWeights) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| {
            let v = w.r * px[0] as f64 + w.g * px[1] as f64 + w.b * px[2] as f64;
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Foreground iff `value > threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v > threshold).collect(),
    }
}

/// Decoded raster to stroke mask: gray (or RGB converted with BT.601)
/// thresholded at [`DEFAULT_MASK_THRESHOLD`].
pub fn mask_from_decoded(img: &DecodedImage) -> BinaryMask {
    match img {
        DecodedImage::Gray(g) => binarize(g, DEFAULT_MASK_THRESHOLD),
        DecodedImage::Rgb(c) => binarize(&to_gray(c), DEFAULT_MASK_THRESHOLD),
    }
}

/// Nearest-neighbor resize with pixel-center sampling:
/// `src = floor((dst + 0.5) * src_len / dst_len)`.
pub fn resize_nearest(
    mask: &BinaryMask,
    new_width: usize,
    new_height: usize,
) -> Result<BinaryMask, ImageError> {
    if new_width == 0 || new_height == 0 {
        return Err(ImageError::InvalidDimensions {
            width: new_width,
            height: new_height,
        });
    }
    check_dims(new_width, new_height)?;
    if mask.width == 0 || mask.height == 0 {
        return Err(ImageError::EmptyImage);
    }
    if mask.width == new_width && mask.height == new_height {
        return Ok(mask.clone());
    }
    let xs: Vec<usize> = (0..new_width)
        .map(|x| center_sample(x, mask.width, new_width))
        .collect();
    let mut data = Vec::with_capacity(new_width * new_height);
    for y in 0..new_height {
        let sy = center_sample(y, mask.height, new_height);
        let row = &mask.data[sy * mask.width..(sy + 1) * mask.width];
        data.extend(xs.iter().map(|&sx| row[sx]));
    }
    Ok(BinaryMask {
        width: new_width,
        height: new_height,
        data,
    })
}

// floor((2*dst + 1) * src_len / (2 * dst_len)) in exact integer arithmetic
fn center_sample(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
}
