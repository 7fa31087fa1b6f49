//! Procedural textured images with a known score, for walking through the
//! extract, CV, train, predict workflow without private data.
//!
//! Each image is an oriented sinusoidal grating with added noise. Its score is
//! affine in two of the texture parameters (spatial frequency and contrast);
//! orientation, phase and tint vary freely and carry no signal.

use crate::image::RasterImage;
use crate::rng::SplitMix64;

pub const TEXTURE_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureParams {
    /// Cycles across the image width.
    pub frequency: f64,
    /// Grating amplitude, 0..=1.
    pub contrast: f64,
    pub angle: f64,
    pub phase: f64,
    pub tint: [f64; 3],
    pub noise_seed: u64,
}

impl TextureParams {
    pub fn sample(rng: &mut SplitMix64) -> Self {
        Self {
            frequency: rng.uniform(3.0, 15.0),
            contrast: rng.uniform(0.3, 1.0),
            angle: rng.uniform(0.0, std::f64::consts::PI),
            phase: rng.uniform(0.0, 2.0 * std::f64::consts::PI),
            tint: [rng.uniform(0.8, 1.0), rng.uniform(0.8, 1.0), rng.uniform(0.8, 1.0)],
            noise_seed: rng.next_u64(),
        }
    }

    /// Ground truth: `20 + 4 * frequency + 40 * contrast`.
    pub fn score(&self) -> f64 {
        20.0 + 4.0 * self.frequency + 40.0 * self.contrast
    }

    pub fn render(&self) -> RasterImage {
        let mut noise = SplitMix64::new(self.noise_seed);
        let (s, c) = self.angle.sin_cos();
        let k = 2.0 * std::f64::consts::PI * self.frequency / TEXTURE_SIZE as f64;
        RasterImage::from_fn(TEXTURE_SIZE, TEXTURE_SIZE, |x, y| {
            let u = x as f64 * c + y as f64 * s;
            let v = 0.5 + 0.5 * self.contrast * (k * u + self.phase).sin();
            let n = noise.uniform(-0.04, 0.04);
            self.tint.map(|t| ((v * t + n) * 255.0).round().clamp(0.0, 255.0) as u8)
        })
        .expect("fixed positive size")
    }
}

/// `count` samples with ids `img000`, `img001`, ...
pub fn texture_dataset(count: usize, seed: u64) -> Vec<(String, TextureParams)> {
    let mut rng = SplitMix64::new(seed);
    (0..count).map(|i| (format!("img{i:03}"), TextureParams::sample(&mut rng))).collect()
}
