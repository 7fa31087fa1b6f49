use crate::demo::texture_dataset;
use crate::net::synthetic_resnet18;
use crate::plot::{scatter_svg, ScatterPanel};
use crate::pls::encode_model;

use super::model::{fit_stats, load_block, load_responses, load_training, predictions_csv, provenance, train_model};
use super::{write_output, KeyValues, Outcome, Result, RunConfig};

/// CV, training and held-out prediction in one bundle.
pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let features = cfg.require(&cfg.features, "--features")?;
    let (x, y) = load_training(features, cfg.require(&cfg.responses, "--responses")?, "features")?;
    let xt = load_block(cfg.require(&cfg.test_features, "--test-features")?, "features")?;
    let yt = load_responses(cfg.require(&cfg.test_responses, "--test-responses")?)?.aligned_to(&xt)?;

    let mut outcome = Outcome::default();
    let model = train_model(cfg, &mut outcome, &x, &y)?;
    write_output(&mut outcome, cfg.out_file("model.pls"), &encode_model(&model))?;
    let fitted = model.predict(x.x())?;
    let predicted = model.predict(xt.x())?;
    let (rc, rmsec) = fit_stats(&y, &fitted)?;
    let (rp, rmsep) = fit_stats(&yt, &predicted)?;
    write_output(&mut outcome, cfg.out_file("predictions.csv"), &predictions_csv(xt.ids(), Some(&yt), &predicted)?)?;

    let panels = [
        ScatterPanel { title: format!("Calibration: R_c = {rc:.3}, RMSEC = {rmsec:.3}"), measured: &y, predicted: &fitted },
        ScatterPanel { title: format!("Prediction: R_p = {rp:.3}, RMSEP = {rmsep:.3}"), measured: &yt, predicted: &predicted },
    ];
    write_output(&mut outcome, cfg.out_file("scatter.svg"), scatter_svg(&panels, cfg.timestamp).as_bytes())?;

    let mut kv = KeyValues::default();
    kv.push("lv", model.n_lv());
    kv.real("r_c", rc);
    kv.real("r_p", rp);
    kv.real("rmsec", rmsec);
    kv.real("rmsep", rmsep);
    kv.push("n_train", x.n_samples());
    kv.push("n_test", xt.n_samples());
    provenance(cfg, &mut kv, features);
    write_output(&mut outcome, cfg.out_file("report.txt"), kv.render().as_bytes())?;
    outcome.summary.push(format!(
        "{} LV: R_c = {rc:.4}, RMSEC = {rmsec:.4}, R_p = {rp:.4}, RMSEP = {rmsep:.4}",
        model.n_lv()
    ));
    Ok(outcome)
}

/// Writes the seeded synthetic ResNet-18 archive to `<out>/resnet18-synthetic.nnw`.
pub fn cmd_synth_archive(cfg: &RunConfig) -> Result<Outcome> {
    let archive = synthetic_resnet18(cfg.seed);
    let mut outcome = Outcome::default();
    let path = cfg.out_file("resnet18-synthetic.nnw");
    write_output(&mut outcome, path, &archive.to_bytes())?;
    outcome.summary.push(format!("seed {}: sha256 {}", cfg.seed, archive.sha256_hex()));
    Ok(outcome)
}

/// Textured images with known scores, split 3:1 into train and test manifests.
pub fn cmd_synth_dataset(cfg: &RunConfig) -> Result<Outcome> {
    let data = texture_dataset(cfg.count, cfg.seed);
    let mut outcome = Outcome::default();
    let (mut train_m, mut test_m) = (String::from("id,path\n"), String::from("id,path\n"));
    let (mut train_y, mut test_y) = (String::from("id,value\n"), String::from("id,value\n"));
    for (i, (id, params)) in data.iter().enumerate() {
        let rel = format!("images/{id}.ppm");
        write_output(&mut outcome, cfg.out_file(&rel), &params.render().to_ppm())?;
        let (m, y) = if i % 4 == 3 { (&mut test_m, &mut test_y) } else { (&mut train_m, &mut train_y) };
        m.push_str(&format!("{id},{rel}\n"));
        y.push_str(&format!("{id},{}\n", params.score()));
    }
    for (name, text) in
        [("train_manifest.csv", train_m), ("test_manifest.csv", test_m), ("train_y.csv", train_y), ("test_y.csv", test_y)]
    {
        write_output(&mut outcome, cfg.out_file(name), text.as_bytes())?;
    }
    outcome.summary.push(format!("{} images written under {}", data.len(), cfg.out.display()));
    Ok(outcome)
}
