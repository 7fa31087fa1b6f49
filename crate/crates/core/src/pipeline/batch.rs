use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cube::{load_cube, mean_spectrum, pca_compress, select_bands, PseudoRgb};
use crate::image::{decode_image, prepare};
use crate::net::{build_resnet18, load_archive, INPUT_DIMS};

use super::{io_error, write_output, Compression, KeyValues, Outcome, PipelineError, Result, RunConfig};

/// Appended to a feature CSV's path to name its provenance sidecar.
pub const EXTRACT_PROVENANCE_SUFFIX: &str = ".provenance";

/// `id,path` rows; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| {
        PipelineError::Input(format!("{}: {e}", path.display()))
    })?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(PipelineError::Input(format!(
                "{}: line {}: expected id,path",
                path.display(),
                rec.position().map_or(0, |p| p.line())
            )));
        }
        let id = rec[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(PipelineError::Input(format!("{}: duplicate id `{id}`", path.display())));
        }
        rows.push((id, base.join(rec[1].trim())));
    }
    Ok(rows)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| PipelineError::Input(e.to_string()))
}

/// One feature row per readable image, in manifest order.
pub fn cmd_extract(cfg: &RunConfig) -> Result<Outcome> {
    let manifest = read_manifest(cfg.require(&cfg.manifest, "--manifest")?)?;
    let archive_path = cfg.require(&cfg.archive, "--archive")?;
    let bytes = std::fs::read(archive_path).map_err(|e| io_error(archive_path, e))?;
    let archive = load_archive(&bytes)?;
    let archive_hash = sha256_hex(&bytes);
    drop(bytes);
    let stats = archive.normalization_stats()?;
    let graph = build_resnet18(&archive)?;
    drop(archive);
    info!("extracting tap {} from {} images", cfg.tap, manifest.len());

    let results: Vec<std::result::Result<Vec<f32>, String>> = manifest
        .par_iter()
        .map(|(_, path)| {
            let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let img = decode_image(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            let input = prepare(&img, &stats, INPUT_DIMS.1).map_err(|e| e.to_string())?;
            graph.forward(&input, cfg.tap).map(|f| f.values).map_err(|e| e.to_string())
        })
        .collect();

    let mut outcome = Outcome::default();
    let mut w = csv_writer();
    let width = cfg.tap.feature_len();
    let mut header = vec!["id".to_string()];
    header.extend((1..=width).map(|j| format!("v{j}")));
    w.write_record(&header)?;
    for ((id, _), res) in manifest.iter().zip(results) {
        match res {
            Ok(values) => {
                let mut row = Vec::with_capacity(width + 1);
                row.push(id.clone());
                row.extend(values.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            Err(reason) => {
                warn!("{id}: {reason}");
                outcome.failures.push((id.clone(), reason));
            }
        }
    }
    let features = cfg.out_file("features.csv");
    write_output(&mut outcome, features.clone(), &finish_csv(w)?)?;

    let mut prov = KeyValues::default();
    prov.push("archive", archive_path.display());
    prov.push("archive_sha256", &archive_hash);
    prov.push("tap", cfg.tap);
    prov.push("manifest", cfg.manifest.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
    prov.push("images", manifest.len());
    prov.push("failed", outcome.failures.len());
    let mut sidecar = features.into_os_string();
    sidecar.push(EXTRACT_PROVENANCE_SUFFIX);
    write_output(&mut outcome, PathBuf::from(sidecar), prov.render().as_bytes())?;
    outcome.summary.push(format!(
        "{} of {} images extracted at tap {} ({} values each)",
        manifest.len() - outcome.failures.len(),
        manifest.len(),
        cfg.tap,
        width
    ));
    Ok(outcome)
}

fn safe_file_stem(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && !id.contains(['/', '\\'])
}

/// A rendered cube with its wavelength axis and mean spectrum.
type Compressed = (PseudoRgb, Vec<f32>, Vec<f64>);

/// Pseudo-RGB PPM per cube plus a mean-spectra CSV, in one pass.
pub fn cmd_compress(cfg: &RunConfig) -> Result<Outcome> {
    let manifest = read_manifest(cfg.require(&cfg.manifest, "--manifest")?)?;
    let results: Vec<std::result::Result<Compressed, String>> = manifest
        .par_iter()
        .map(|(id, path)| {
            if !safe_file_stem(id) {
                return Err(format!("id `{id}` cannot be used as a file name"));
            }
            let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cube = load_cube(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            let rgb = match cfg.compression {
                Compression::Bands(t) => select_bands(&cube, &t),
                Compression::Pca => pca_compress(&cube).map(|c| c.rgb),
            }
            .map_err(|e| e.to_string())?;
            let spectrum = mean_spectrum(&cube).map_err(|e| e.to_string())?;
            Ok((rgb, cube.wavelengths().to_vec(), spectrum))
        })
        .collect();

    let mut outcome = Outcome::default();
    let mut axis: Option<Vec<f32>> = None;
    let mut spectra = csv_writer();
    for ((id, _), res) in manifest.iter().zip(results) {
        let (rgb, wavelengths, spectrum) = match res {
            Ok(v) => v,
            Err(reason) => {
                warn!("{id}: {reason}");
                outcome.failures.push((id.clone(), reason));
                continue;
            }
        };
        if rgb.has_degenerate_channel() {
            warn!("{id}: degenerate channel(s) {:?} rendered as zero", rgb.degenerate);
        }
        write_output(&mut outcome, cfg.out_file(&format!("{id}.ppm")), &rgb.image.to_ppm())?;
        match &axis {
            None => {
                let mut header = vec!["id".to_string()];
                header.extend(wavelengths.iter().map(|w| format!("w{w}")));
                spectra.write_record(&header)?;
                axis = Some(wavelengths);
            }
            Some(a) if *a != wavelengths => {
                let reason = "wavelength axis differs from the first cube; spectrum not written".to_string();
                warn!("{id}: {reason}");
                outcome.failures.push((id.clone(), reason));
                continue;
            }
            Some(_) => {}
        }
        let mut row = vec![id.clone()];
        row.extend(spectrum.iter().map(|v| v.to_string()));
        spectra.write_record(&row)?;
    }
    if axis.is_none() {
        spectra.write_record(["id"])?;
    }
    write_output(&mut outcome, cfg.out_file("mean_spectra.csv"), &finish_csv(spectra)?)?;
    outcome.summary.push(format!("{} of {} cubes compressed", manifest.len() - outcome.failures.len(), manifest.len()));
    Ok(outcome)
}
