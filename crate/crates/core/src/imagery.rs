//! Frame ingestion (binary PPM), ROI cropping, and Gaussian pre-smoothing.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Largest accepted frame side, in pixels.
pub const MAX_DIMENSION: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("not a binary PPM: expected magic `P6`")]
    BadMagic,
    #[error("unsupported maxval {0}: only 255 is accepted")]
    BadMaxval(u64),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("frame dimensions {width}x{height} exceed the {MAX_DIMENSION} pixel limit")]
    TooLarge { width: u64, height: u64 },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("pixel buffer holds {found} bytes, {width}x{height} RGB needs {expected}")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("roi ({x0},{y0},{w},{h}) does not fit a {width}x{height} frame")]
    RoiOutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("gaussian sigma must be non-negative and finite, got {0}")]
    BadSigma(f64),
    #[error("frame file name {0:?} is not `<epoch-seconds>.ppm`")]
    BadFrameName(PathBuf),
    #[error("two frames share timestamp {0}")]
    DuplicateTimestamp(f64),
    #[error("too many labels for a 16-bit PGM: {0}")]
    TooManyLabels(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An 8-bit RGB frame, row-major, 3 interleaved samples per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub timestamp: Option<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .unwrap_or(usize::MAX);
        if width == 0 || height == 0 || pixels.len() != expected {
            return Err(ImageError::BufferSize {
                width,
                height,
                expected,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp: None,
        })
    }

    /// Builds a frame by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                pixels.extend_from_slice(&f(r, c));
            }
        }
        Self::new(width, height, pixels).expect("from_fn requires non-zero dimensions")
    }

    pub fn with_timestamp(mut self, ts: f64) -> Self {
        self.timestamp = Some(ts);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn full_roi(&self) -> Roi {
        Roi {
            x0: 0,
            y0: 0,
            w: self.width,
            h: self.height,
        }
    }
}

/// Rectangular region of interest in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Roi {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x0.checked_add(self.w).is_some_and(|e| e <= width)
            && self.y0.checked_add(self.h).is_some_and(|e| e <= height)
    }

    pub fn pixel_count(&self) -> usize {
        self.w * self.h
    }
}

/// Parses a binary PPM (`P6`, maxval 255). `#` comments are allowed anywhere
/// in the header whitespace. Bytes past the payload are ignored.
pub fn parse_ppm(bytes: &[u8]) -> Result<Frame, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(ImageError::BadMagic);
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Header(format!("zero dimension {width}x{height}")));
    }
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(ImageError::TooLarge { width, height });
    }
    if maxval != 255 {
        return Err(ImageError::BadMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(ImageError::Header("missing whitespace after maxval".into())),
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height * 3;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    Frame::new(width, height, payload[..expected].to_vec())
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) -> usize {
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.pos - start
    }

    fn number(&mut self, what: &str) -> Result<u64, ImageError> {
        if self.skip_whitespace_and_comments() == 0 {
            return Err(ImageError::Header(format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value.saturating_mul(10).saturating_add(u64::from(b - b'0'));
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ImageError::Header(format!("expected decimal {what}")));
        }
        Ok(value)
    }
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame, ImageError> {
    let bytes = fs::read(path.as_ref())?;
    let mut frame = parse_ppm(&bytes)?;
    frame.timestamp = timestamp_from_path(path.as_ref());
    Ok(frame)
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<(), ImageError> {
    fs::write(path, encode_ppm(frame))?;
    Ok(())
}

fn timestamp_from_path(path: &Path) -> Option<f64> {
    path.file_stem()?.to_str()?.parse::<f64>().ok().filter(|t| t.is_finite())
}

/// Copies the ROI out of `frame`; output pixel (r, c) is input (y0 + r, x0 + c).
pub fn crop(frame: &Frame, roi: Roi) -> Result<Frame, ImageError> {
    if !roi.fits(frame.width, frame.height) {
        return Err(ImageError::RoiOutOfBounds {
            x0: roi.x0,
            y0: roi.y0,
            w: roi.w,
            h: roi.h,
            width: frame.width,
            height: frame.height,
        });
    }
    let mut pixels = Vec::with_capacity(roi.w * roi.h * 3);
    for r in roi.y0..roi.y0 + roi.h {
        let start = (r * frame.width + roi.x0) * 3;
        pixels.extend_from_slice(&frame.pixels[start..start + roi.w * 3]);
    }
    let mut out = Frame::new(roi.w, roi.h, pixels)?;
    out.timestamp = frame.timestamp;
    Ok(out)
}

/// Real-valued 3-band raster, row-major, bands interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            data: frame.pixels.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn band_sum(&self, band: usize) -> f64 {
        self.data.iter().skip(band).step_by(3).sum()
    }
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`,
/// `radius = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur per band with clamp-to-border edges.
/// `sigma = 0` returns the input samples unchanged.
pub fn gaussian_blur(frame: &Frame, sigma: f64) -> Result<Raster, ImageError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ImageError::BadSigma(sigma));
    }
    let src = Raster::from_frame(frame);
    if sigma == 0.0 {
        return Ok(src);
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (frame.width, frame.height);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![0.0; src.data.len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = [0.0; 3];
            for (k, &tap) in kernel.iter().enumerate() {
                let cc = clamp(c as isize + k as isize - radius, w);
                let i = (r * w + cc) * 3;
                for b in 0..3 {
                    acc[b] += tap * src.data[i + b];
                }
            }
            horiz[(r * w + c) * 3..(r * w + c) * 3 + 3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0.0; src.data.len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = [0.0; 3];
            for (k, &tap) in kernel.iter().enumerate() {
                let rr = clamp(r as isize + k as isize - radius, h);
                let i = (rr * w + c) * 3;
                for b in 0..3 {
                    acc[b] += tap * horiz[i + b];
                }
            }
            out[(r * w + c) * 3..(r * w + c) * 3 + 3].copy_from_slice(&acc);
        }
    }
    Ok(Raster {
        width: w,
        height: h,
        data: out,
    })
}

/// Frames of a fixed camera, ordered by strictly increasing timestamp.
#[derive(Debug, Clone, Default)]
pub struct FrameSequence {
    entries: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub timestamp: f64,
    /// File stem as written, used to name per-frame outputs.
    pub id: String,
    pub path: PathBuf,
}

impl FrameSequence {
    /// Scans `dir` for `<epoch-seconds>.ppm` files and orders them by time.
    pub fn scan(dir: impl AsRef<Path>) -> Result<Self, ImageError> {
        let mut entries = Vec::new();
        for item in fs::read_dir(dir)? {
            let path = item?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("ppm") {
                continue;
            }
            let Some(timestamp) = timestamp_from_path(&path) else {
                return Err(ImageError::BadFrameName(path));
            };
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            entries.push(FrameEntry { timestamp, id, path });
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(mut entries: Vec<FrameEntry>) -> Result<Self, ImageError> {
        entries.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        if let Some(pair) = entries.windows(2).find(|p| p[0].timestamp >= p[1].timestamp) {
            return Err(ImageError::DuplicateTimestamp(pair[1].timestamp));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FrameEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, id: &str) -> Option<&FrameEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// 8-bit binary PGM (`P5`, maxval 255).
pub fn encode_pgm8(width: usize, height: usize, values: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(values);
    out
}

/// 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).
pub fn encode_pgm16(width: usize, height: usize, values: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Parses an 8-bit `P5` PGM into (width, height, samples).
pub fn parse_pgm8(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ImageError::BadMagic);
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Header(format!("zero dimension {width}x{height}")));
    }
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(ImageError::TooLarge { width, height });
    }
    if maxval != 255 {
        return Err(ImageError::BadMaxval(maxval));
    }
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(ImageError::Header("missing whitespace after maxval".into())),
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    Ok((width, height, payload[..expected].to_vec()))
}
