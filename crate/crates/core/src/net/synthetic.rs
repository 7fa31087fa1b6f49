//! Deterministic ResNet-18 archives drawn from a SplitMix64 stream.
//!
//! Tensors are drawn in [`resnet18_layout`] order from one stream, each
//! value computed in `f64` and rounded to `f32`:
//!
//! | tensor        | value (u uniform in [0, 1))                  |
//! |---------------|----------------------------------------------|
//! | conv weight   | `(2u - 1) * sqrt(3) * sqrt(2 / fan_in)`      |
//! | `fc.*`        | `(2u - 1) / sqrt(512)`                       |
//! | bn gamma      | `0.5 + 0.5u`                                 |
//! | bn beta       | `(2u - 1) * 0.2`                             |
//! | bn mean       | `(2u - 1) * 0.1`                             |
//! | bn var        | `0.5 + u`                                    |
//!
//! `meta.mean` / `meta.std` hold the ImageNet constants. The committed
//! golden fixtures come from torchvision's ResNet-18 loaded with the
//! archive built from [`FIXTURE_SEED`].

use crate::rng::SplitMix64;

use super::archive::WeightArchive;

pub const FIXTURE_SEED: u64 = 2024;
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];
pub const STAGE_WIDTHS: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Conv,
    Fc,
    BnGamma,
    BnBeta,
    BnMean,
    BnVar,
}

/// `(name, dims, init)` for every model tensor, in archive order.
pub fn resnet18_layout() -> Vec<(String, Vec<usize>, InitKind)> {
    let mut out = Vec::with_capacity(104);
    let bn = |out: &mut Vec<(String, Vec<usize>, InitKind)>, prefix: &str, c: usize| {
        for (field, kind) in
            [("gamma", InitKind::BnGamma), ("beta", InitKind::BnBeta), ("mean", InitKind::BnMean), ("var", InitKind::BnVar)]
        {
            out.push((format!("{prefix}.{field}"), vec![c], kind));
        }
    };
    out.push(("conv1.weight".to_string(), vec![64, 3, 7, 7], InitKind::Conv));
    bn(&mut out, "bn1", 64);
    let mut c_in = 64;
    for (stage, &c_out) in STAGE_WIDTHS.iter().enumerate() {
        let stage = stage + 1;
        for block in 0..2 {
            let src = if block == 0 { c_in } else { c_out };
            let p = format!("layer{stage}.{block}");
            out.push((format!("{p}.conv1.weight"), vec![c_out, src, 3, 3], InitKind::Conv));
            bn(&mut out, &format!("{p}.bn1"), c_out);
            out.push((format!("{p}.conv2.weight"), vec![c_out, c_out, 3, 3], InitKind::Conv));
            bn(&mut out, &format!("{p}.bn2"), c_out);
            if stage >= 2 && block == 0 {
                out.push((format!("{p}.downsample.conv.weight"), vec![c_out, c_in, 1, 1], InitKind::Conv));
                bn(&mut out, &format!("{p}.downsample.bn"), c_out);
            }
        }
        c_in = c_out;
    }
    out.push(("fc.weight".to_string(), vec![1000, 512], InitKind::Fc));
    out.push(("fc.bias".to_string(), vec![1000], InitKind::Fc));
    out
}

fn draw(rng: &mut SplitMix64, dims: &[usize], kind: InitKind) -> Vec<f32> {
    let count: usize = dims.iter().product();
    let conv_bound = || {
        let fan_in = (dims[1] * dims[2] * dims[3]) as f64;
        3f64.sqrt() * (2.0 / fan_in).sqrt()
    };
    let (scale, offset, symmetric) = match kind {
        InitKind::Conv => (conv_bound(), 0.0, true),
        InitKind::Fc => (1.0 / 512f64.sqrt(), 0.0, true),
        InitKind::BnGamma => (0.5, 0.5, false),
        InitKind::BnBeta => (0.2, 0.0, true),
        InitKind::BnMean => (0.1, 0.0, true),
        InitKind::BnVar => (1.0, 0.5, false),
    };
    (0..count)
        .map(|_| {
            let u = rng.next_f64();
            let v = if symmetric { (2.0 * u - 1.0) * scale } else { offset + scale * u };
            v as f32
        })
        .collect()
}

/// A complete ResNet-18 archive (including the unused classifier head).
pub fn synthetic_resnet18(seed: u64) -> WeightArchive {
    let mut rng = SplitMix64::new(seed);
    let mut archive = WeightArchive::new();
    for (name, dims, kind) in resnet18_layout() {
        let data = draw(&mut rng, &dims, kind);
        archive.insert(name, dims, data).expect("layout names are unique");
    }
    archive.insert("meta.mean", vec![3], IMAGENET_MEAN.to_vec()).expect("unique");
    archive.insert("meta.std", vec![3], IMAGENET_STD.to_vec()).expect("unique");
    archive
}
