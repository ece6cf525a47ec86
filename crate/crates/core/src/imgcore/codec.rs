//! PNG and binary PGM/PPM decoding, PNG encoding.

use std::borrow::Cow;
use std::io::Cursor;
use std::path::Path;

use super::{check_dims, BinaryMask, GrayImage, ImageError, RgbImage};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Result of decoding: alpha is always dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedImage {
    Rgb(RgbImage),
    Gray(GrayImage),
}

impl DecodedImage {
    pub fn width(&self) -> usize {
        match self {
            DecodedImage::Rgb(i) => i.width(),
            DecodedImage::Gray(i) => i.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            DecodedImage::Rgb(i) => i.height(),
            DecodedImage::Gray(i) => i.height(),
        }
    }

    /// RGB view; gray inputs are replicated into three channels.
    pub fn into_rgb(self) -> RgbImage {
        match self {
            DecodedImage::Rgb(i) => i,
            DecodedImage::Gray(g) => RgbImage::from_gray(&g),
        }
    }
}

/// Decodes 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) or binary PGM/PPM.
pub fn decode_image(bytes: &[u8]) -> Result<DecodedImage, ImageError> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else if bytes.len() < 8 && PNG_SIGNATURE.starts_with(bytes) && !bytes.is_empty() {
        Err(ImageError::TruncatedData)
    } else {
        Err(ImageError::UnknownFormat)
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<DecodedImage, ImageError> {
    decode_image(&std::fs::read(path)?)
}

// Walks the chunk list so a stream cut short is reported as truncation
// rather than as whatever the inflater happens to trip over.
fn check_png_chunks(bytes: &[u8]) -> Result<(), ImageError> {
    let mut pos = PNG_SIGNATURE.len();
    let mut first = true;
    loop {
        if pos + 8 > bytes.len() {
            return Err(ImageError::TruncatedData);
        }
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let kind = &bytes[pos + 4..pos + 8];
        if first && kind != b"IHDR" {
            return Err(ImageError::MalformedHeader("first chunk is not IHDR".into()));
        }
        first = false;
        let end = pos
            .checked_add(12)
            .and_then(|p| p.checked_add(len))
            .ok_or(ImageError::TruncatedData)?;
        if end > bytes.len() {
            return Err(ImageError::TruncatedData);
        }
        if kind == b"IEND" {
            return Ok(());
        }
        pos = end;
    }
}

fn decode_png(bytes: &[u8]) -> Result<DecodedImage, ImageError> {
    check_png_chunks(bytes)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let header = decoder.read_header_info().map_err(header_error)?;
    if header.bit_depth == png::BitDepth::Sixteen {
        return Err(ImageError::UnsupportedBitDepth(16));
    }
    let (width, height) = (header.width as usize, header.height as usize);
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    check_dims(width, height)?;
    let mut reader = decoder.read_info().map_err(header_error)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::CorruptData("output buffer size overflow".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(data_error)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedBitDepth(info.bit_depth as u32));
    }
    buf.truncate(info.buffer_size());
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(ImageError::UnsupportedColor(format!("{other:?}"))),
    };
    let stride = info.line_size;
    let mut out = Vec::with_capacity(width * height * if channels < 3 { 1 } else { 3 });
    for row in buf.chunks_exact(stride).take(height) {
        for px in row[..width * channels].chunks_exact(channels) {
            match channels {
                1 | 2 => out.push(px[0]),
                _ => out.extend_from_slice(&px[..3]),
            }
        }
    }
    if channels < 3 {
        Ok(DecodedImage::Gray(GrayImage::new(width, height, out)?))
    } else {
        Ok(DecodedImage::Rgb(RgbImage::new(width, height, out)?))
    }
}

fn header_error(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            ImageError::TruncatedData
        }
        other => ImageError::MalformedHeader(other.to_string()),
    }
}

fn data_error(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            ImageError::TruncatedData
        }
        other => ImageError::CorruptData(other.to_string()),
    }
}

struct PnmHeader {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader, ImageError> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(ImageError::TruncatedData),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::MalformedHeader("expected decimal field".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("field out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(ImageError::MalformedHeader("missing separator".into())),
        None => return Err(ImageError::TruncatedData),
    }
    Ok(PnmHeader {
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_start: pos,
    })
}

fn decode_pnm(bytes: &[u8]) -> Result<DecodedImage, ImageError> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let h = parse_pnm_header(bytes)?;
    if h.maxval == 0 {
        return Err(ImageError::MalformedHeader("maxval is zero".into()));
    }
    if h.maxval > 255 {
        return Err(ImageError::UnsupportedBitDepth(16));
    }
    if h.width == 0 || h.height == 0 {
        return Err(ImageError::InvalidDimensions {
            width: h.width,
            height: h.height,
        });
    }
    check_dims(h.width, h.height)?;
    let n = h.width * h.height * channels;
    let payload = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or(ImageError::TruncatedData)?;
    let data: Vec<u8> = if h.maxval == 255 {
        payload.to_vec()
    } else {
        payload
            .iter()
            .map(|&v| ((v as usize).min(h.maxval) * 255 * 2 + h.maxval) / (2 * h.maxval))
            .map(|v| v as u8)
            .collect()
    };
    if channels == 1 {
        Ok(DecodedImage::Gray(GrayImage::new(h.width, h.height, data)?))
    } else {
        Ok(DecodedImage::Rgb(RgbImage::new(h.width, h.height, data)?))
    }
}

/// Rasters that can be written as 8-bit PNG.
pub trait PngRaster {
    fn png_width(&self) -> usize;
    fn png_height(&self) -> usize;
    fn png_channels(&self) -> usize;
    fn png_samples(&self) -> Cow<'_, [u8]>;
}

impl PngRaster for GrayImage {
    fn png_width(&self) -> usize {
        self.width()
    }
    fn png_height(&self) -> usize {
        self.height()
    }
    fn png_channels(&self) -> usize {
        1
    }
    fn png_samples(&self) -> Cow<'_, [u8]> {
        Cow::Borrowed(self.data())
    }
}

impl PngRaster for RgbImage {
    fn png_width(&self) -> usize {
        self.width()
    }
    fn png_height(&self) -> usize {
        self.height()
    }
    fn png_channels(&self) -> usize {
        3
    }
    fn png_samples(&self) -> Cow<'_, [u8]> {
        Cow::Borrowed(self.data())
    }
}

/// Masks are written as 8-bit gray with values {0, 255}.
impl PngRaster for BinaryMask {
    fn png_width(&self) -> usize {
        self.width()
    }
    fn png_height(&self) -> usize {
        self.height()
    }
    fn png_channels(&self) -> usize {
        1
    }
    fn png_samples(&self) -> Cow<'_, [u8]> {
        Cow::Owned(self.data().iter().map(|&v| if v { 255 } else { 0 }).collect())
    }
}

pub fn encode_png<R: PngRaster + ?Sized>(img: &R) -> Result<Vec<u8>, ImageError> {
    let (w, h) = (img.png_width(), img.png_height());
    if w == 0 || h == 0 {
        return Err(ImageError::EmptyImage);
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(if img.png_channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
        writer
            .write_image_data(&img.png_samples())
            .map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
        writer
            .finish()
            .map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn write_png<R: PngRaster + ?Sized>(path: impl AsRef<Path>, img: &R) -> Result<(), ImageError> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}
