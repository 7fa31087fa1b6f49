//! Hyperspectral cubes: ingestion, pseudo-RGB band selection, PCA band
//! compression and masked mean spectra.
//!
//! File layout (`HCB1`):
//!
//! ```text
//! "HCB1" | u32 LE H, W, B | B x f32 LE wavelengths (nm, strictly increasing)
//! | H*W*B f32 LE, band-sequential (band, then row, then column)
//! | optional: "MASK" | H*W bytes (nonzero = foreground)
//! ```

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::image::RasterImage;

pub const MAGIC: &[u8; 4] = b"HCB1";
const MASK_MAGIC: &[u8; 4] = b"MASK";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubeError {
    #[error("bad magic {0:?}, expected \"HCB1\"")]
    BadMagic(Vec<u8>),
    #[error("cube truncated while reading {0}")]
    Truncated(&'static str),
    #[error("unexpected {0} bytes after the cube payload")]
    TrailingBytes(usize),
    #[error("cube dims must be >= 1, got {0}x{1}x{2}")]
    ZeroDim(usize, usize, usize),
    #[error("buffer `{name}` has length {got}, expected {expected}")]
    Length { name: &'static str, expected: usize, got: usize },
    #[error("wavelengths not strictly increasing at index {0}")]
    NonIncreasingWavelengths(usize),
    #[error("cube contains a non-finite value")]
    NonFinite,
    #[error("mask selects no foreground pixels")]
    EmptyMask,
    #[error("need at least {needed} bands, cube has {got}")]
    TooFewBands { needed: usize, got: usize },
    #[error("need at least {needed} foreground pixels, cube has {got}")]
    TooFewPixels { needed: usize, got: usize },
    #[error("foreground spectra have rank {achieved}; nothing to project")]
    RankDeficient { achieved: usize },
}

pub type Result<T> = std::result::Result<T, CubeError>;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    wavelengths: Vec<f32>,
    data: Vec<f32>,
    mask: Option<Vec<u8>>,
}

impl HyperCube {
    pub fn new(
        height: usize,
        width: usize,
        wavelengths: Vec<f32>,
        data: Vec<f32>,
        mask: Option<Vec<u8>>,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        if height == 0 || width == 0 || bands == 0 {
            return Err(CubeError::ZeroDim(height, width, bands));
        }
        if data.len() != height * width * bands {
            return Err(CubeError::Length { name: "data", expected: height * width * bands, got: data.len() });
        }
        if let Some(m) = &mask {
            if m.len() != height * width {
                return Err(CubeError::Length { name: "mask", expected: height * width, got: m.len() });
            }
        }
        if let Some(i) = wavelengths.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(CubeError::NonIncreasingWavelengths(i + 1));
        }
        if wavelengths.iter().chain(&data).any(|v| !v.is_finite()) {
            return Err(CubeError::NonFinite);
        }
        Ok(Self { height, width, bands, wavelengths, data, mask })
    }

    /// Builds a cube from `f(band, y, x)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        wavelengths: Vec<f32>,
        mask: Option<Vec<u8>>,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(b, y, x));
                }
            }
        }
        Self::new(height, width, wavelengths, data, mask)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn wavelengths(&self) -> &[f32] {
        &self.wavelengths
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[u8]> {
        self.mask.as_deref()
    }

    pub fn value(&self, band: usize, y: usize, x: usize) -> f32 {
        self.data[(band * self.height + y) * self.width + x]
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[band * plane..(band + 1) * plane]
    }

    pub fn is_foreground(&self, pixel: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[pixel] != 0)
    }

    /// Row-major pixel indices of the foreground.
    pub fn foreground(&self) -> Vec<usize> {
        (0..self.height * self.width).filter(|&p| self.is_foreground(p)).collect()
    }

    /// Same cube with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.wavelengths.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
            self.mask.clone(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * (self.bands + self.data.len()) + self.height * self.width + 4);
        out.extend_from_slice(MAGIC);
        for d in [self.height, self.width, self.bands] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.wavelengths.iter().chain(&self.data) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(m) = &self.mask {
            out.extend_from_slice(MASK_MAGIC);
            out.extend_from_slice(m);
        }
        out
    }
}

fn read_f32s(bytes: &[u8], pos: &mut usize, count: usize, what: &'static str) -> Result<Vec<f32>> {
    let end = count.checked_mul(4).and_then(|n| n.checked_add(*pos)).ok_or(CubeError::Truncated(what))?;
    let chunk = bytes.get(*pos..end).ok_or(CubeError::Truncated(what))?;
    *pos = end;
    Ok(chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn load_cube(bytes: &[u8]) -> Result<HyperCube> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CubeError::BadMagic(bytes.iter().take(4).copied().collect()));
    }
    let header = bytes.get(4..16).ok_or(CubeError::Truncated("header"))?;
    let dim = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (h, w, b) = (dim(0), dim(1), dim(2));
    let mut pos = 16;
    let wavelengths = read_f32s(bytes, &mut pos, b, "wavelengths")?;
    let count = h.checked_mul(w).and_then(|n| n.checked_mul(b)).ok_or(CubeError::Truncated("data"))?;
    let data = read_f32s(bytes, &mut pos, count, "data")?;
    let mask = if pos == bytes.len() {
        None
    } else if bytes[pos..].starts_with(MASK_MAGIC) {
        pos += 4;
        let m = bytes.get(pos..pos + h * w).ok_or(CubeError::Truncated("mask"))?.to_vec();
        pos += h * w;
        if pos != bytes.len() {
            return Err(CubeError::TrailingBytes(bytes.len() - pos));
        }
        Some(m)
    } else {
        return Err(CubeError::TrailingBytes(bytes.len() - pos));
    };
    HyperCube::new(h, w, wavelengths, data, mask)
}

/// Index of the band nearest `target`; ties go to the lower index.
pub fn nearest_band(wavelengths: &[f32], target: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &w) in wavelengths.iter().enumerate() {
        let d = (w as f64 - target).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Target wavelengths for the red, green and blue channels, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandTriplet {
    pub targets: [f64; 3],
}

impl BandTriplet {
    /// 750 / 670 / 500 nm as red / green / blue.
    pub const VISIBLE_DEFAULT: BandTriplet = BandTriplet { targets: [750.0, 670.0, 500.0] };

    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Self { targets: [r, g, b] }
    }

    pub fn resolve(&self, wavelengths: &[f32]) -> [usize; 3] {
        self.targets.map(|t| nearest_band(wavelengths, t))
    }
}

/// A 3-channel rendering of a cube plus per-channel degeneracy flags
/// (a flagged channel had no spread over the foreground and is all zero).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRgb {
    pub image: RasterImage,
    pub degenerate: [bool; 3],
}

impl PseudoRgb {
    pub fn has_degenerate_channel(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Min-max rescales each channel over the foreground to 0..=255, rounding
/// half-up. Background pixels are 0. `values[c][p]` is indexed by pixel.
fn render(cube: &HyperCube, values: [&[f64]; 3], forced_degenerate: [bool; 3]) -> PseudoRgb {
    let n = cube.height * cube.width;
    let fg = cube.foreground();
    let mut pixels = vec![0u8; 3 * n];
    let mut degenerate = forced_degenerate;
    for c in 0..3 {
        if degenerate[c] {
            continue;
        }
        let (lo, hi) = fg.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(values[c][p]), hi.max(values[c][p]))
        });
        if !(hi > lo) {
            degenerate[c] = true;
            continue;
        }
        for &p in &fg {
            let v = (values[c][p] - lo) / (hi - lo) * 255.0;
            pixels[3 * p + c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
    let image = RasterImage::new(cube.width, cube.height, pixels).expect("cube dims are positive");
    PseudoRgb { image, degenerate }
}

/// Pseudo-RGB from the bands nearest the triplet's wavelengths.
pub fn select_bands(cube: &HyperCube, triplet: &BandTriplet) -> Result<PseudoRgb> {
    if cube.bands < 3 {
        return Err(CubeError::TooFewBands { needed: 3, got: cube.bands });
    }
    if cube.foreground().is_empty() {
        return Err(CubeError::EmptyMask);
    }
    let idx = triplet.resolve(&cube.wavelengths);
    let channels: Vec<Vec<f64>> = idx.iter().map(|&b| cube.band(b).iter().map(|&v| v as f64).collect()).collect();
    Ok(render(cube, [&channels[0], &channels[1], &channels[2]], [false; 3]))
}

/// Principal axes of a cube's foreground spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// All B eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// First k unit loading vectors (length B each), sign-fixed so the
    /// largest-magnitude element of each is positive.
    pub loadings: Vec<Vec<f64>>,
    /// `scores[i][p]`: projection of centred pixel `p` (row-major over the
    /// whole image; background pixels are 0) onto axis `i`.
    pub scores: Vec<Vec<f64>>,
    /// Number of eigenvalues above `1e-10 * largest`.
    pub rank: usize,
}

impl PcaProjection {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        self.eigenvalues.iter().map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 }).collect()
    }
}

pub fn pca_project(cube: &HyperCube, k: usize) -> Result<PcaProjection> {
    let b = cube.bands;
    if b < k {
        return Err(CubeError::TooFewBands { needed: k, got: b });
    }
    let fg = cube.foreground();
    if fg.len() < k + 1 {
        return Err(CubeError::TooFewPixels { needed: k + 1, got: fg.len() });
    }
    let n = fg.len();
    let mut centred = DMatrix::<f64>::zeros(n, b);
    for band in 0..b {
        let plane = cube.band(band);
        let mean = fg.iter().map(|&p| plane[p] as f64).sum::<f64>() / n as f64;
        for (row, &p) in fg.iter().enumerate() {
            centred[(row, band)] = plane[p] as f64 - mean;
        }
    }
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let top = eigenvalues[0].max(0.0);
    let rank = if top > 0.0 { eigenvalues.iter().filter(|&&v| v > 1e-10 * top).count() } else { 0 };
    if rank == 0 {
        return Err(CubeError::RankDeficient { achieved: 0 });
    }
    let loadings: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let total_pixels = cube.height * cube.width;
    let scores = loadings
        .iter()
        .map(|axis| {
            let mut s = vec![0.0; total_pixels];
            for (row, &p) in fg.iter().enumerate() {
                s[p] = (0..b).map(|band| centred[(row, band)] * axis[band]).sum();
            }
            s
        })
        .collect();
    Ok(PcaProjection { eigenvalues, loadings, scores, rank })
}

/// Result of compressing a cube to three principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCompression {
    pub rgb: PseudoRgb,
    pub projection: PcaProjection,
}

/// First three principal components rendered as RGB. Components beyond
/// the spectra's rank are flagged degenerate and rendered as zero.
pub fn pca_compress(cube: &HyperCube) -> Result<PcaCompression> {
    let projection = pca_project(cube, 3)?;
    let forced = [0, 1, 2].map(|i| i >= projection.rank);
    let s = &projection.scores;
    let rgb = render(cube, [&s[0], &s[1], &s[2]], forced);
    Ok(PcaCompression { rgb, projection })
}

/// Per-band mean over foreground pixels.
pub fn mean_spectrum(cube: &HyperCube) -> Result<Vec<f64>> {
    let fg = cube.foreground();
    if fg.is_empty() {
        return Err(CubeError::EmptyMask);
    }
    Ok((0..cube.bands)
        .map(|b| {
            let plane = cube.band(b);
            fg.iter().map(|&p| plane[p] as f64).sum::<f64>() / fg.len() as f64
        })
        .collect())
}
