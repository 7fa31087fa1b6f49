//! Acceptance runner: one `PASS`/`FAIL` line per criterion, exit status 1 if
//! any fails. Every tolerance and time budget is a constant below.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use deepchem::cube::{nearest_band, select_bands, BandTriplet, HyperCube};
use deepchem::image::{decode_image, prepare};
use deepchem::io::read_vec1;
use deepchem::net::{build_resnet18, synthetic_resnet18, Tap, FIXTURE_SEED};
use deepchem::pls::{cross_validate_matrix, select_lv, FoldSpec, PlsModel};
use deepchem::rng::SplitMix64;
use deepchem::sopls::{sopls_cv_matrix, SoplsModel};
use nalgebra::DMatrix;

const OP_SHAPES_MIN: usize = 100;
const OP_TOL: f32 = 1e-5;
const OP_BUDGET: Duration = Duration::from_secs(60);

const GOLDEN_TOL: f32 = 1e-3;
const GOLDEN_LEN: usize = 512;
const GOLDEN_BUDGET: Duration = Duration::from_secs(10);
const FIXTURE_ARCHIVE_SHA256: &str = "70a83f5ca603fe0d034894e8165e4e30d164ec9f6d89521150faa4e5e7141d29";

const PLS_PROBLEMS: u64 = 20;
const PLS_TOL: f64 = 1e-8;
const ORTHO_TOL: f64 = 1e-8;

const CV_TOL: f64 = 1e-9;
const CV_FACTORS: usize = 3;

const SOPLS_DEGENERACY_TOL: f64 = 1e-12;
const SOPLS_ORTHO_TOL: f64 = 1e-8;
const SOPLS_SCALE_TOL: f64 = 1e-8;
const SOPLS_TRIALS: u64 = 100;
const SOPLS_WINS_MIN: usize = 95;

const E2E_IMAGES: usize = 200;
const E2E_MIN_R: f64 = 0.9;
const E2E_BUDGET: Duration = Duration::from_secs(300);

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tensor_ops() -> Verdict {
    let start = Instant::now();
    let suite = tensor_op_suite(24, 2024);
    let took = start.elapsed();
    check(
        suite.cases >= OP_SHAPES_MIN && suite.worst <= OP_TOL && took < OP_BUDGET,
        format!(
            "{} random shapes over conv2d/batchnorm/maxpool/gap/add, max |d| {:.2e} ({}) <= {OP_TOL:e}, {:.2?} < {:?}",
            suite.cases,
            suite.worst,
            if suite.worst_op.is_empty() { "every op exact" } else { suite.worst_op },
            took,
            OP_BUDGET
        ),
    )
}

fn golden_forward() -> Verdict {
    let archive = synthetic_resnet18(FIXTURE_SEED);
    let hash = archive.sha256_hex();
    let stats = archive.normalization_stats().map_err(|e| e.to_string())?;
    let graph = build_resnet18(&archive).map_err(|e| e.to_string())?;
    let golden = read_vec1(&fixture("f1.gap.vec")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let img = decode_image(&fixture("f1.ppm")).map_err(|e| e.to_string())?;
    let input = prepare(&img, &stats, 224).map_err(|e| e.to_string())?;
    let f = graph.forward(&input, Tap::Gap).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let delta = if f.len() == golden.len() { max_abs_diff(&f.values, &golden) } else { f32::INFINITY };
    check(
        hash == FIXTURE_ARCHIVE_SHA256 && f.len() == GOLDEN_LEN && delta <= GOLDEN_TOL && took < GOLDEN_BUDGET,
        format!(
            "F1 decode/resize/normalize/forward(gap): length {} (want {GOLDEN_LEN}), max |d| {delta:.2e} <= {GOLDEN_TOL:e}, {took:.2?} < {GOLDEN_BUDGET:?}, archive hash {}",
            f.len(),
            if hash == FIXTURE_ARCHIVE_SHA256 { "matches fixtures" } else { "MISMATCH" }
        ),
    )
}

fn pls_vs_ols() -> Verdict {
    let (mut worst_pred, mut worst_ortho) = (0.0f64, 0.0f64);
    for seed in 0..PLS_PROBLEMS {
        let mut rng = SplitMix64::new(seed);
        let n = 12 + rng.below(39);
        let p = 1 + rng.below(10.min(n - 2));
        let x = gaussian_matrix(&mut rng, n, p);
        let coef: Vec<f64> = (0..p).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 4.0 + (0..p).map(|j| coef[j] * x[(i, j)]).sum::<f64>() + 0.3 * rng.normal()).collect();
        let xnew = gaussian_matrix(&mut rng, 10, p);
        let ols = ols_oracle(&x, &y);
        for a in 1..=p {
            let m = PlsModel::fit(&x, &y, a).map_err(|e| e.to_string())?;
            let t = m.scores();
            for i in 0..t.ncols() {
                for j in 0..i {
                    let c = t.column(i).dot(&t.column(j)) / (t.column(i).norm() * t.column(j).norm());
                    worst_ortho = worst_ortho.max(c.abs());
                }
            }
            if a == p {
                for xs in [&x, &xnew] {
                    let d = max_abs_diff64(&m.predict(xs).map_err(|e| e.to_string())?, &affine_predict(&ols, xs));
                    worst_pred = worst_pred.max(d);
                }
            }
        }
    }
    check(
        worst_pred <= PLS_TOL && worst_ortho <= ORTHO_TOL,
        format!(
            "{PLS_PROBLEMS} problems (n <= 50, p <= 10), A = rank: max |d| vs normal equations {worst_pred:.2e} <= {PLS_TOL:e}; worst relative score cross-product {worst_ortho:.2e} <= {ORTHO_TOL:e}"
        ),
    )
}

fn cv_correctness() -> Verdict {
    let (x, y) = latent_factor_data(6, 60, 20, CV_FACTORS);
    let mut worst = 0.0f64;
    let loo = cross_validate_matrix(&x, &y, 8, FoldSpec::LeaveOneOut).map_err(|e| e.to_string())?;
    worst = worst.max(max_abs_diff64(loo.rmsecv(), &naive_cv(&x, &y, 8, &(0..60).collect::<Vec<_>>())));
    let spec = FoldSpec::KFold { k: 5, seed: 42 };
    let kf = cross_validate_matrix(&x, &y, 10, spec).map_err(|e| e.to_string())?;
    worst = worst.max(max_abs_diff64(kf.rmsecv(), &naive_cv(&x, &y, 10, &kfold_oracle(60, 5, 42))));
    let selected = select_lv(&kf);
    let again = cross_validate_matrix(&x, &y, 10, spec).map_err(|e| e.to_string())?;
    let identical = kf.to_csv().as_bytes() == again.to_csv().as_bytes();
    let ties = select_tie_rule();
    check(
        worst <= CV_TOL && selected == CV_FACTORS && identical && ties,
        format!(
            "{CV_FACTORS}-factor data: max |d| vs naive loop (loo, kfold:5:42) {worst:.2e} <= {CV_TOL:e}; select_lv = {selected}; tie rule {}; CSV byte-identical across runs: {identical}",
            if ties { "ok" } else { "BROKEN" }
        ),
    )
}

/// Rank-1 X with y exact on it: orders 1..=3 tie, and the tie must go to 1.
fn select_tie_rule() -> bool {
    let x = DMatrix::from_fn(12, 3, |i, j| i as f64 * (j as f64 + 1.0));
    let y: Vec<f64> = (0..12).map(|i| 2.0 * i as f64 + 1.0).collect();
    cross_validate_matrix(&x, &y, 3, FoldSpec::LeaveOneOut).map(|c| select_lv(&c) == 1).unwrap_or(false)
}

fn sopls_properties() -> Verdict {
    let t = two_block_trial(1, 40, 20);
    let mut degeneracy = 0.0f64;
    for a1 in 1..=4 {
        let fused = SoplsModel::fit(&t.x1, &t.x2, &t.y, a1, 0).map_err(|e| e.to_string())?;
        let pls = PlsModel::fit(&t.x1, &t.y, a1).map_err(|e| e.to_string())?;
        let a = fused.predict(&t.x1_test, &t.x2_test).map_err(|e| e.to_string())?;
        degeneracy = degeneracy.max(max_abs_diff64(&a, &pls.predict(&t.x1_test).map_err(|e| e.to_string())?));
    }
    let mut cross = 0.0f64;
    for seed in 0..10 {
        let t = two_block_trial(seed, 40, 10);
        let m = SoplsModel::fit(&t.x1, &t.x2, &t.y, 2, 3).map_err(|e| e.to_string())?;
        let (t1, t2) = (m.block1().unwrap().scores(), m.block2().unwrap().scores());
        cross = cross.max((t2.transpose() * t1).amax());
    }
    let base = SoplsModel::fit(&t.x1, &t.x2, &t.y, 2, 2).and_then(|m| m.predict(&t.x1_test, &t.x2_test)).map_err(|e| e.to_string())?;
    let mut scale = 0.0f64;
    for c in [1e-3, 0.5, 7.5, 1e3] {
        let m = SoplsModel::fit(&t.x1, &(&t.x2 * c), &t.y, 2, 2).map_err(|e| e.to_string())?;
        let p = m.predict(&t.x1_test, &(&t.x2_test * c)).map_err(|e| e.to_string())?;
        scale = scale.max(max_abs_diff64(&base, &p));
    }

    let spec = FoldSpec::KFold { k: 5, seed: 42 };
    let mut wins = 0;
    for seed in 0..SOPLS_TRIALS {
        let t = two_block_trial(1000 + seed, 60, 60);
        let g = sopls_cv_matrix(&t.x1, &t.x2, &t.y, 4, 4, spec).map_err(|e| e.to_string())?;
        let (a1, a2) = g.selected();
        let fused = SoplsModel::fit(&t.x1, &t.x2, &t.y, a1.max(1), a2).map_err(|e| e.to_string())?;
        let e_fused = rmse(&fused.predict(&t.x1_test, &t.x2_test).map_err(|e| e.to_string())?, &t.y_test);
        let single = |x: &DMatrix<f64>, xt: &DMatrix<f64>| -> Result<f64, String> {
            let a = select_lv(&cross_validate_matrix(x, &t.y, 6, spec).map_err(|e| e.to_string())?);
            let m = PlsModel::fit(x, &t.y, a).map_err(|e| e.to_string())?;
            Ok(rmse(&m.predict(xt).map_err(|e| e.to_string())?, &t.y_test))
        };
        if e_fused < single(&t.x1, &t.x1_test)? && e_fused < single(&t.x2, &t.x2_test)? {
            wins += 1;
        }
    }
    check(
        degeneracy <= SOPLS_DEGENERACY_TOL && cross <= SOPLS_ORTHO_TOL && scale <= SOPLS_SCALE_TOL && wins >= SOPLS_WINS_MIN,
        format!(
            "(a1,0) vs PLS {degeneracy:.2e} <= {SOPLS_DEGENERACY_TOL:e}; max |T2'T1| {cross:.2e} <= {SOPLS_ORTHO_TOL:e}; block-2 rescale {scale:.2e} <= {SOPLS_SCALE_TOL:e}; fused beats both blocks in {wins}/{SOPLS_TRIALS} trials (need {SOPLS_WINS_MIN})"
        ),
    )
}

fn pseudo_rgb() -> Verdict {
    let mut rng = SplitMix64::new(750);
    let mut lookups = 0;
    let mut lookup_ok = true;
    for _ in 0..200 {
        let bands = 1 + rng.below(60);
        let mut wl = Vec::with_capacity(bands);
        let mut at = 350.0 + rng.uniform(0.0, 50.0);
        for _ in 0..bands {
            at += if rng.next_f64() < 0.2 { 10.0 } else { rng.uniform(0.5, 25.0) };
            wl.push(at as f32);
        }
        for _ in 0..5 {
            let target = if rng.next_f64() < 0.3 && bands > 1 {
                let i = rng.below(bands - 1);
                (wl[i] as f64 + wl[i + 1] as f64) / 2.0
            } else {
                rng.uniform(300.0, 1100.0)
            };
            lookups += 1;
            lookup_ok &= nearest_band(&wl, target) == nearest_band_oracle(&wl, target);
        }
    }

    // bands at 400 + 7.5 i nm, 400..=1000
    let axis: Vec<f32> = (0..81).map(|i| 400.0 + 7.5 * i as f32).collect();
    let resolved = BandTriplet::VISIBLE_DEFAULT.resolve(&axis);
    let expected = [47, 36, 13]; // 752.5, 670.0, 497.5
    let triplet_ok = BandTriplet::VISIBLE_DEFAULT.targets == [750.0, 670.0, 500.0] && resolved == expected;

    let mut images = 0;
    let mut bytes_ok = true;
    let cube = deepchem::cube::load_cube(&fixture("ramp4x4x10.hcb")).map_err(|e| e.to_string())?;
    let mut cubes = vec![cube];
    for _ in 0..30 {
        let (h, w) = (1 + rng.below(9), 1 + rng.below(9));
        let data = (0..h * w * axis.len()).map(|_| rng.uniform(0.0, 4.0) as f32).collect();
        let mask = (rng.next_f64() < 0.5).then(|| {
            let mut m: Vec<u8> = (0..h * w).map(|_| u8::from(rng.next_f64() < 0.6)).collect();
            m[0] = 1;
            m
        });
        cubes.push(HyperCube::new(h, w, axis.clone(), data, mask).map_err(|e| e.to_string())?);
    }
    for cube in &cubes {
        let (h, w, _) = cube.dims();
        let got = select_bands(cube, &BandTriplet::VISIBLE_DEFAULT).map_err(|e| e.to_string())?;
        let (want, degenerate) =
            pseudo_rgb_oracle(cube.data(), cube.wavelengths(), h, w, cube.mask(), BandTriplet::VISIBLE_DEFAULT.targets);
        images += 1;
        bytes_ok &= got.image.pixels() == want.as_slice() && got.degenerate == degenerate;
    }
    check(
        lookup_ok && triplet_ok && bytes_ok,
        format!(
            "{lookups} nearest-band lookups exact: {lookup_ok}; (750,670,500) on a 7.5 nm axis -> {resolved:?} (want {expected:?}); {images} min-max renders byte-exact vs composed oracle: {bytes_ok}"
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_deepchem"))
        .args(args)
        .current_dir(dir)
        .env("DEEPCHEM_NO_TIMESTAMP", "1")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`deepchem {}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn end_to_end() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let start = Instant::now();
    let count = E2E_IMAGES.to_string();
    run_cli(d, &["synth-archive", "--out", "."])?;
    run_cli(d, &["synth-dataset", "--count", &count, "--out", "data"])?;
    run_cli(d, &["extract", "--archive", "resnet18-synthetic.nnw", "--manifest", "data/train_manifest.csv", "--out", "train"])?;
    run_cli(d, &["extract", "--archive", "resnet18-synthetic.nnw", "--manifest", "data/test_manifest.csv", "--out", "test"])?;
    run_cli(d, &["cv", "--features", "train/features.csv", "--responses", "data/train_y.csv", "--out", "cv"])?;
    run_cli(d, &["train", "--features", "train/features.csv", "--responses", "data/train_y.csv", "--out", "model"])?;
    run_cli(
        d,
        &["predict", "--model", "model/model.pls", "--features", "test/features.csv", "--responses", "data/test_y.csv", "--out", "pred"],
    )?;
    let took = start.elapsed();
    let text = std::fs::read_to_string(d.join("pred/metrics.txt")).map_err(|e| e.to_string())?;
    let field = |k: &str| text.lines().find_map(|l| l.strip_prefix(k).and_then(|v| v.strip_prefix('='))).unwrap_or("?").to_string();
    let r: f64 = field("r").parse().unwrap_or(f64::NAN);
    check(
        r >= E2E_MIN_R && took < E2E_BUDGET,
        format!(
            "{E2E_IMAGES} textured images via the CLI (extract, cv, train, predict): {} LV, held-out r = {r:.4} >= {E2E_MIN_R}, rmse = {}, {took:.1?} < {E2E_BUDGET:?}",
            field("lv"),
            field("rmse")
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("tensor-op oracle suite", tensor_ops),
        ("golden forward pass", golden_forward),
        ("PLS oracle equivalence", pls_vs_ols),
        ("CV correctness", cv_correctness),
        ("SO-PLS properties", sopls_properties),
        ("pseudo-RGB", pseudo_rgb),
        ("end-to-end synthetic replication", end_to_end),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        match verdict {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
