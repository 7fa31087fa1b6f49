mod common;

use common::*;
use deepchem::pls::{cross_validate_matrix, select_lv, FoldSpec, PlsModel};
use deepchem::sopls::{decode_sopls, encode_sopls, sopls_cv_matrix, SoplsError, SoplsModel};
use nalgebra::DMatrix;

fn scaled(x: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    x * c
}

#[test]
fn zero_block2_equals_plain_pls() {
    let t = two_block_trial(1, 40, 20);
    for a1 in 1..=4 {
        let fused = SoplsModel::fit(&t.x1, &t.x2, &t.y, a1, 0).unwrap();
        let pls = PlsModel::fit(&t.x1, &t.y, a1).unwrap();
        let a = fused.predict(&t.x1_test, &t.x2_test).unwrap();
        assert!(max_abs_diff64(&a, &pls.predict(&t.x1_test).unwrap()) <= 1e-12, "a1 {a1}");
    }
}

#[test]
fn block_scores_are_orthogonal() {
    for seed in 0..10 {
        let t = two_block_trial(seed, 40, 10);
        let m = SoplsModel::fit(&t.x1, &t.x2, &t.y, 2, 3).unwrap();
        let t1 = m.block1().unwrap().scores();
        let t2 = m.block2().unwrap().scores();
        let cross = t2.transpose() * t1;
        assert!(cross.amax() <= 1e-8, "seed {seed}: {}", cross.amax());
    }
}

#[test]
fn block2_scale_does_not_change_predictions() {
    let t = two_block_trial(3, 40, 20);
    let base = SoplsModel::fit(&t.x1, &t.x2, &t.y, 2, 2).unwrap().predict(&t.x1_test, &t.x2_test).unwrap();
    for c in [1e-3, 0.5, 7.5, 1e3] {
        let m = SoplsModel::fit(&t.x1, &scaled(&t.x2, c), &t.y, 2, 2).unwrap();
        let p = m.predict(&t.x1_test, &scaled(&t.x2_test, c)).unwrap();
        assert!(max_abs_diff64(&base, &p) <= 1e-8, "scale {c}");
    }
}

#[test]
fn predictions_match_first_principles() {
    let t = two_block_trial(4, 35, 15);
    for (a1, a2) in [(1, 1), (2, 2), (3, 1), (1, 4)] {
        let m = SoplsModel::fit(&t.x1, &t.x2, &t.y, a1, a2).unwrap();
        let want = naive_sopls_predict(&t.x1, &t.x2, &t.y, &t.x1_test, &t.x2_test, a1, a2);
        assert!(max_abs_diff64(&m.predict(&t.x1_test, &t.x2_test).unwrap(), &want) <= 1e-8, "({a1},{a2})");
    }
}

#[test]
fn grid_cv_matches_naive_loop() {
    let t = two_block_trial(5, 30, 1);
    let spec = FoldSpec::KFold { k: 5, seed: 42 };
    let g = sopls_cv_matrix(&t.x1, &t.x2, &t.y, 3, 3, spec).unwrap();
    let want = naive_sopls_cv(&t.x1, &t.x2, &t.y, 3, 3, g.folds().assignment());
    assert!((g.rmsecv() - &want).amax() <= 1e-9, "{}\n{}", g.rmsecv(), want);
    let pls = cross_validate_matrix(&t.x1, &t.y, 3, spec).unwrap();
    for a in 1..=3 {
        assert!((g.get(a, 0) - pls.rmsecv()[a - 1]).abs() <= 1e-12);
    }
}

#[test]
fn fused_beats_each_block_on_additive_data() {
    let spec = FoldSpec::KFold { k: 5, seed: 42 };
    let mut wins = 0;
    for seed in 0..20 {
        let t = two_block_trial(1000 + seed, 60, 60);
        let g = sopls_cv_matrix(&t.x1, &t.x2, &t.y, 4, 4, spec).unwrap();
        let (a1, a2) = g.selected();
        let fused = SoplsModel::fit(&t.x1, &t.x2, &t.y, a1.max(1), a2).unwrap();
        let e_fused = rmse(&fused.predict(&t.x1_test, &t.x2_test).unwrap(), &t.y_test);
        let single = |x: &DMatrix<f64>, xt: &DMatrix<f64>| {
            let a = select_lv(&cross_validate_matrix(x, &t.y, 6, spec).unwrap());
            rmse(&PlsModel::fit(x, &t.y, a).unwrap().predict(xt).unwrap(), &t.y_test)
        };
        if e_fused < single(&t.x1, &t.x1_test) && e_fused < single(&t.x2, &t.x2_test) {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}/20");
}

#[test]
fn model_file_round_trip() {
    let t = two_block_trial(6, 30, 10);
    let m = SoplsModel::fit(&t.x1, &t.x2, &t.y, 2, 1).unwrap();
    let back = decode_sopls(&encode_sopls(&m)).unwrap();
    assert_eq!(m.predict(&t.x1_test, &t.x2_test).unwrap(), back.predict(&t.x1_test, &t.x2_test).unwrap());
    let mut bytes = encode_sopls(&m);
    bytes.truncate(bytes.len() - 3);
    assert!(decode_sopls(&bytes).is_err());
}

#[test]
fn argument_errors() {
    let t = two_block_trial(7, 20, 5);
    assert!(matches!(SoplsModel::fit(&t.x1, &t.x2, &t.y, 0, 2), Err(SoplsError::NoBlock1Components)));
    assert!(matches!(SoplsModel::fit(&t.x1, &t.x2, &t.y, 99, 1), Err(SoplsError::ComponentsOutOfRange { block: 1, .. })));
    let short = t.x2.rows(0, 10).into_owned();
    assert!(matches!(SoplsModel::fit(&t.x1, &short, &t.y, 1, 1), Err(SoplsError::RowMismatch(..))));
}
