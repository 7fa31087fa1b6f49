use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::data::{DataBlock, ResponseVector};
use crate::plot::{cv_curve_svg, scatter_svg, ScatterPanel};
use crate::pls::{
    cross_validate_matrix, decode_model, encode_model, metrics, select_lv, CvCurve, FoldSpec, PlsError, PlsModel,
};
use crate::sopls::{encode_sopls, sopls_cv_matrix, SoplsModel};

use super::{io_error, write_output, KeyValues, Outcome, PipelineError, Result, RunConfig, EXTRACT_PROVENANCE_SUFFIX};

pub(crate) fn load_block(path: &Path, tag: &str) -> Result<DataBlock> {
    DataBlock::read_csv(path, tag).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn load_responses(path: &Path) -> Result<ResponseVector> {
    ResponseVector::read_csv(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

/// Block plus responses in the block's row order.
pub(crate) fn load_training(features: &Path, responses: &Path, tag: &str) -> Result<(DataBlock, Vec<f64>)> {
    let x = load_block(features, tag)?;
    let y = load_responses(responses)?.aligned_to(&x)?;
    Ok((x, y))
}

/// Correlation reported as NaN when undefined.
pub(crate) fn fit_stats(y: &[f64], yhat: &[f64]) -> Result<(f64, f64)> {
    match metrics(y, yhat) {
        Ok(m) => Ok((m.pearson_r, m.rmse)),
        Err(PlsError::UndefinedCorrelation { rmse }) => Ok((f64::NAN, rmse)),
        Err(e) => Err(e.into()),
    }
}

/// Records seed, fold spec and, when the features came from `extract`, the
/// archive hash and tap.
pub(crate) fn provenance(cfg: &RunConfig, kv: &mut KeyValues, features: &Path) {
    kv.push("seed", cfg.seed);
    kv.push("fold_spec", cfg.cv);
    let mut sidecar = features.as_os_str().to_owned();
    sidecar.push(EXTRACT_PROVENANCE_SUFFIX);
    let text = std::fs::read_to_string(PathBuf::from(sidecar)).unwrap_or_default();
    let lookup = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .unwrap_or_else(|| "unknown".into())
    };
    kv.push("archive_sha256", lookup("archive_sha256"));
    kv.push("tap", lookup("tap"));
    kv.push("features", features.display());
}

/// Largest order every CV training split supports, capped at `cap`.
pub(crate) fn lv_cap(spec: FoldSpec, n: usize, p: usize, cap: usize) -> Result<usize> {
    let (_, train) = spec.assign(n)?.min_train();
    let limit = train.saturating_sub(1).min(p);
    if limit == 0 {
        return Err(PipelineError::Input(format!("{n} samples are too few to cross-validate with {spec}")));
    }
    Ok(cap.min(limit))
}

pub(crate) fn run_cv(cfg: &RunConfig, x: &DataBlock, y: &[f64]) -> Result<CvCurve> {
    let a_max = match cfg.max_lv.as_deref() {
        Some([a, ..]) => *a,
        _ => lv_cap(cfg.cv, x.n_samples(), x.n_vars(), RunConfig::DEFAULT_LV_CAP)?,
    };
    Ok(cross_validate_matrix(x.x(), y, a_max, cfg.cv)?)
}

pub(crate) fn write_curve(cfg: &RunConfig, outcome: &mut Outcome, curve: &CvCurve) -> Result<usize> {
    let selected = select_lv(curve);
    write_output(outcome, cfg.out_file("cv_curve.csv"), curve.to_csv().as_bytes())?;
    let title = format!("RMSECV ({}), minimum at {selected} LV", curve.spec());
    let svg = cv_curve_svg(curve.rmsecv(), selected, &title, cfg.timestamp);
    write_output(outcome, cfg.out_file("cv_curve.svg"), svg.as_bytes())?;
    outcome.summary.push(format!("selected {selected} latent variables (RMSECV {})", curve.rmsecv()[selected - 1]));
    Ok(selected)
}

pub fn cmd_cv(cfg: &RunConfig) -> Result<Outcome> {
    let features = cfg.require(&cfg.features, "--features")?;
    let (x, y) = load_training(features, cfg.require(&cfg.responses, "--responses")?, "features")?;
    let curve = run_cv(cfg, &x, &y)?;
    let mut outcome = Outcome::default();
    write_curve(cfg, &mut outcome, &curve)?;
    Ok(outcome)
}

/// Fixed `--lv`, or the CV-selected order.
pub(crate) fn train_model(cfg: &RunConfig, outcome: &mut Outcome, x: &DataBlock, y: &[f64]) -> Result<PlsModel> {
    let a = match cfg.lv {
        Some(a) => a,
        None => {
            let curve = run_cv(cfg, x, y)?;
            write_curve(cfg, outcome, &curve)?;
            select_lv(&curve)
        }
    };
    let model = PlsModel::fit(x.x(), y, a)?;
    if model.n_lv() < a {
        warn!("only {} of {a} latent variables could be extracted", model.n_lv());
    }
    Ok(model)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let features = cfg.require(&cfg.features, "--features")?;
    let (x, y) = load_training(features, cfg.require(&cfg.responses, "--responses")?, "features")?;
    let mut outcome = Outcome::default();
    let model = train_model(cfg, &mut outcome, &x, &y)?;
    write_output(&mut outcome, cfg.out_file("model.pls"), &encode_model(&model))?;
    let (r, rmse) = fit_stats(&y, &model.predict(x.x())?)?;
    let mut kv = KeyValues::default();
    kv.push("lv", model.n_lv());
    kv.real("r_c", r);
    kv.real("rmsec", rmse);
    kv.push("n_train", x.n_samples());
    provenance(cfg, &mut kv, features);
    write_output(&mut outcome, cfg.out_file("train_metrics.txt"), kv.render().as_bytes())?;
    outcome.summary.push(format!("trained {} LV model: R_c = {r:.4}, RMSEC = {rmse:.4}", model.n_lv()));
    Ok(outcome)
}

pub(crate) fn predictions_csv(ids: &[String], y: Option<&[f64]>, yhat: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    match y {
        Some(y) => {
            w.write_record(["id", "y_true", "y_pred"])?;
            for ((id, t), p) in ids.iter().zip(y).zip(yhat) {
                w.write_record([id.as_str(), &t.to_string(), &p.to_string()])?;
            }
        }
        None => {
            w.write_record(["id", "y_pred"])?;
            for (id, p) in ids.iter().zip(yhat) {
                w.write_record([id.as_str(), &p.to_string()])?;
            }
        }
    }
    w.into_inner().map_err(|e| PipelineError::Input(e.to_string()))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Outcome> {
    let model_path = cfg.require(&cfg.model, "--model")?;
    let bytes = std::fs::read(model_path).map_err(|e| io_error(model_path, e))?;
    let model = decode_model(&bytes).map_err(|e| PipelineError::Input(format!("{}: {e}", model_path.display())))?;
    let features = cfg.require(&cfg.features, "--features")?;
    let x = load_block(features, "features")?;
    let yhat = model.predict(x.x())?;
    let y = match &cfg.responses {
        Some(p) => Some(load_responses(p)?.aligned_to(&x)?),
        None => None,
    };
    let mut outcome = Outcome::default();
    write_output(&mut outcome, cfg.out_file("predictions.csv"), &predictions_csv(x.ids(), y.as_deref(), &yhat)?)?;
    if let Some(y) = &y {
        let (r, rmse) = fit_stats(y, &yhat)?;
        let mut kv = KeyValues::default();
        kv.push("lv", model.n_lv());
        kv.real("r", r);
        kv.real("rmse", rmse);
        kv.push("n", y.len());
        provenance(cfg, &mut kv, features);
        write_output(&mut outcome, cfg.out_file("metrics.txt"), kv.render().as_bytes())?;
        let panel = ScatterPanel { title: format!("R = {r:.3}, RMSE = {rmse:.3}"), measured: y, predicted: &yhat };
        write_output(&mut outcome, cfg.out_file("scatter.svg"), scatter_svg(&[panel], cfg.timestamp).as_bytes())?;
        outcome.summary.push(format!("{} predictions: R = {r:.4}, RMSE = {rmse:.4}", y.len()));
    } else {
        outcome.summary.push(format!("{} predictions (no responses, scatter omitted)", yhat.len()));
    }
    Ok(outcome)
}

/// Rows of `b` reordered to match `a`'s ids.
pub(crate) fn align_blocks(a: &DataBlock, b: &DataBlock) -> Result<DataBlock> {
    if a.n_samples() != b.n_samples() {
        let extra: Vec<&String> = b.ids().iter().filter(|id| !a.ids().contains(id)).collect();
        return Err(PipelineError::Input(format!(
            "blocks hold {} and {} samples; ids only in block 2: {extra:?}",
            a.n_samples(),
            b.n_samples()
        )));
    }
    Ok(b.select(a.ids())?)
}

/// The three comparison models of a fusion run.
struct FusionSet {
    block1: PlsModel,
    block2: PlsModel,
    fused: SoplsModel,
}

impl FusionSet {
    fn predict(&self, x1: &DataBlock, x2: &DataBlock) -> Result<[Vec<f64>; 3]> {
        Ok([self.block1.predict(x1.x())?, self.block2.predict(x2.x())?, self.fused.predict(x1.x(), x2.x())?])
    }
}

pub fn cmd_fuse(cfg: &RunConfig) -> Result<Outcome> {
    let f1 = cfg.require(&cfg.features, "--features")?;
    let f2 = cfg.require(&cfg.features2, "--features2")?;
    let x1 = load_block(f1, "spatial")?;
    let x2 = align_blocks(&x1, &load_block(f2, "spectral")?)?;
    let y = load_responses(cfg.require(&cfg.responses, "--responses")?)?.aligned_to(&x1)?;
    let n = x1.n_samples();
    let (c1, c2) = match cfg.max_lv.as_deref() {
        Some([a]) => (*a, *a),
        Some([a, b, ..]) => (*a, *b),
        _ => (
            lv_cap(cfg.cv, n, x1.n_vars(), RunConfig::DEFAULT_LV_CAP)?,
            lv_cap(cfg.cv, n, x2.n_vars(), RunConfig::DEFAULT_LV_CAP)?,
        ),
    };
    info!("SO-PLS grid {c1} x {c2} with {}", cfg.cv);
    let grid = sopls_cv_matrix(x1.x(), x2.x(), &y, c1, c2, cfg.cv)?;
    let (a1, a2) = grid.selected();
    let mut outcome = Outcome::default();
    write_output(&mut outcome, cfg.out_file("sopls_grid.csv"), grid.to_csv().as_bytes())?;
    if grid.block2_only() {
        warn!("selected pair ({a1}, {a2}) uses block 2 only");
    }

    // Single-block references: best order along each grid edge.
    let col0: Vec<f64> = (1..=c1).map(|a| grid.get(a, 0)).collect();
    let row0: Vec<f64> = (1..=c2).map(|a| grid.get(0, a)).collect();
    let best = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, &x)| if x < v[b] { i } else { b }) + 1;
    let (b1, b2) = (best(&col0), best(&row0));
    let mut fused = SoplsModel::fit_any(x1.x(), x2.x(), &y, a1, a2)?;
    fused.tags = [x1.tag().to_string(), x2.tag().to_string()];
    let set = FusionSet { block1: PlsModel::fit(x1.x(), &y, b1)?, block2: PlsModel::fit(x2.x(), &y, b2)?, fused };
    write_output(&mut outcome, cfg.out_file("model.sopl"), &encode_sopls(&set.fused))?;

    let test = match (&cfg.test_features, &cfg.test_features2, &cfg.test_responses) {
        (Some(t1), Some(t2), Some(ty)) => {
            let t1 = load_block(t1, "spatial")?;
            let t2 = align_blocks(&t1, &load_block(t2, "spectral")?)?;
            let ty = load_responses(ty)?.aligned_to(&t1)?;
            Some((t1, t2, ty))
        }
        (None, None, None) => None,
        _ => {
            return Err(PipelineError::Usage(
                "--test-features, --test-features2 and --test-responses go together".into(),
            ))
        }
    };
    let (label, ey, preds) = match &test {
        Some((t1, t2, ty)) => ("prediction", ty.clone(), set.predict(t1, t2)?),
        None => ("calibration", y.clone(), set.predict(&x1, &x2)?),
    };

    let mut kv = KeyValues::default();
    kv.push("selected_a1", a1);
    kv.push("selected_a2", a2);
    kv.real("selected_rmsecv", grid.get(a1, a2));
    kv.push("block2_only", grid.block2_only());
    kv.push("block1_lv", b1);
    kv.push("block2_lv", b2);
    kv.push("evaluated_on", label);
    let names = ["block1", "block2", "fused"];
    let titles = [
        format!("{} only ({b1} LV)", x1.tag()),
        format!("{} only ({b2} LV)", x2.tag()),
        format!("SO-PLS ({a1}, {a2})"),
    ];
    let mut panels = Vec::new();
    for i in 0..3 {
        let (r, rmse) = fit_stats(&ey, &preds[i])?;
        kv.real(&format!("{}_r", names[i]), r);
        kv.real(&format!("{}_rmse", names[i]), rmse);
        panels.push(ScatterPanel {
            title: format!("{}: R = {r:.3}, RMSE = {rmse:.3}", titles[i]),
            measured: &ey,
            predicted: &preds[i],
        });
        outcome.summary.push(format!("{}: R = {r:.4}, RMSE = {rmse:.4} ({label})", titles[i]));
    }
    provenance(cfg, &mut kv, f1);
    kv.push("features2", f2.display());
    write_output(&mut outcome, cfg.out_file("fuse_metrics.txt"), kv.render().as_bytes())?;
    write_output(&mut outcome, cfg.out_file("fuse_report.svg"), scatter_svg(&panels, cfg.timestamp).as_bytes())?;
    outcome.summary.insert(0, format!("selected (a1, a2) = ({a1}, {a2}), RMSECV {}", grid.get(a1, a2)));
    Ok(outcome)
}
