//! Raster decoding, bilinear resizing and per-channel normalization.

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("not a PPM image (magic {0:?})")]
    BadMagic(String),
    #[error("unsupported image format `{0}`; only binary PPM (P6) is read")]
    UnsupportedFormat(String),
    #[error("malformed PPM header: {0}")]
    BadHeader(String),
    #[error("PPM maxval {0} unsupported, expected 255")]
    MaxVal(u32),
    #[error("pixel payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("image dims must be >= 1, got {0}x{1}")]
    ZeroSize(usize, usize),
    #[error("pixel buffer length {got}, expected {expected}")]
    PixelCount { expected: usize, got: usize },
    #[error("image is {got:?}, expected {expected:?}")]
    DimMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("normalization std must be positive, got {0:?}")]
    InvalidStats([f32; 3]),
}

pub type Result<T> = std::result::Result<T, ImageError>;

/// 8-bit RGB, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSize(width, height));
        }
        if pixels.len() != 3 * width * height {
            return Err(ImageError::PixelCount { expected: 3 * width * height, got: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
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

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Per-channel mean and standard deviation on the 0-1 pixel scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl NormalizationStats {
    pub fn new(mean: [f32; 3], std: [f32; 3]) -> Result<Self> {
        if std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(ImageError::InvalidStats(std));
        }
        Ok(Self { mean, std })
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | b'\x0b' | b'\x0c' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::BadHeader(format!("invalid {what}")))
    }
}

/// Decodes a binary PPM (`P6`, maxval 255).
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.len() < 2 {
        return Err(ImageError::BadMagic(String::from_utf8_lossy(bytes).into_owned()));
    }
    let magic = &bytes[..2];
    match magic {
        b"P6" => {}
        [b'P', b'1'..=b'7'] => return Err(ImageError::UnsupportedFormat(String::from_utf8_lossy(magic).into_owned())),
        _ => return Err(ImageError::BadMagic(String::from_utf8_lossy(magic).into_owned())),
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")? as usize;
    let height = r.number("height")? as usize;
    let maxval = r.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::MaxVal(maxval));
    }
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(ImageError::BadHeader("missing whitespace after maxval".into())),
    }
    let expected = 3 * width * height;
    let payload = &bytes[r.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated { expected, got: payload.len() });
    }
    RasterImage::new(width, height, payload[..expected].to_vec())
}

/// Bilinear resize with pixel-centre alignment and edge clamping, no
/// antialiasing. Source coordinate is `(d + 0.5) * in / out - 0.5`;
/// results are rounded half-up.
pub fn resize_bilinear(img: &RasterImage, out_w: usize, out_h: usize) -> Result<RasterImage> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroSize(out_w, out_h));
    }
    let (w, h) = (img.width, img.height);
    let axis = |out: usize, size: usize| -> Vec<(usize, usize, f64)> {
        let scale = size as f64 / out as f64;
        (0..out)
            .map(|d| {
                let s = (d as f64 + 0.5) * scale - 0.5;
                let s0 = s.floor();
                let frac = s - s0;
                let i0 = (s0 as i64).clamp(0, size as i64 - 1) as usize;
                let i1 = (s0 as i64 + 1).clamp(0, size as i64 - 1) as usize;
                (i0, i1, frac)
            })
            .collect()
    };
    let xs = axis(out_w, w);
    let ys = axis(out_h, h);
    let px = |x: usize, y: usize, c: usize| img.pixels[3 * (y * w + x) + c] as f64;
    let mut pixels = Vec::with_capacity(3 * out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
                let bottom = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(out_w, out_h, pixels)
}

/// `(pixel / 255 - mean[c]) / std[c]` into a `(3, H, W)` tensor.
pub fn normalize(img: &RasterImage, stats: &NormalizationStats) -> Tensor {
    let plane = img.width * img.height;
    let mut data = vec![0f32; 3 * plane];
    for c in 0..3 {
        let (mean, std) = (stats.mean[c] as f64, stats.std[c] as f64);
        for (i, out) in data[c * plane..(c + 1) * plane].iter_mut().enumerate() {
            let v = img.pixels[3 * i + c] as f64 / 255.0;
            *out = ((v - mean) / std) as f32;
        }
    }
    Tensor::from_parts(3, img.height, img.width, data)
}

/// [`normalize`], requiring the image to already be `width x height`.
pub fn normalize_for(img: &RasterImage, stats: &NormalizationStats, width: usize, height: usize) -> Result<Tensor> {
    if (img.width, img.height) != (width, height) {
        return Err(ImageError::DimMismatch { expected: (width, height), got: (img.width, img.height) });
    }
    Ok(normalize(img, stats))
}

/// Decode-free preparation for the network: stretch to `size x size`, then normalize.
pub fn prepare(img: &RasterImage, stats: &NormalizationStats, size: usize) -> Result<Tensor> {
    let resized = if (img.width, img.height) == (size, size) { img.clone() } else { resize_bilinear(img, size, size)? };
    normalize_for(&resized, stats, size, size)
}
