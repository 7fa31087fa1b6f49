use std::time::Instant;

use deepchem::image::{decode_image, prepare};
use deepchem::io::read_vec1;
use deepchem::net::{build_resnet18, synthetic_resnet18, Tap, FIXTURE_SEED};

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let t0 = Instant::now();
    let archive = synthetic_resnet18(FIXTURE_SEED);
    println!("archive {:?} sha {}", t0.elapsed(), archive.sha256_hex());
    let graph = build_resnet18(&archive).unwrap();
    let img = decode_image(&std::fs::read(format!("{dir}/f1.ppm")).unwrap()).unwrap();
    let x = prepare(&img, &archive.normalization_stats().unwrap(), 224).unwrap();
    let norm = read_vec1(&std::fs::read(format!("{dir}/f1.norm.vec")).unwrap()).unwrap();
    let dn = x.data().iter().zip(&norm).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
    println!("norm max diff {dn}");
    for _ in 0..3 {
        let t = Instant::now();
        let f = graph.forward(&x, Tap::Gap).unwrap();
        let gold = read_vec1(&std::fs::read(format!("{dir}/f1.gap.vec")).unwrap()).unwrap();
        let d = f.values.iter().zip(&gold).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
        println!("forward {:?} max diff {d}", t.elapsed());
    }
}
