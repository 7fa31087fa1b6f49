use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use deepchem::cube::BandTriplet;
use deepchem::net::{Tap, FIXTURE_SEED};
use deepchem::pipeline::{
    config_to_args, parse_config_file, parse_cv_spec, parse_lv_caps, run, Command, Compression, PipelineError, RunConfig,
    EXIT_INPUT, EXIT_USAGE,
};
use deepchem::plot::timestamp_from_env;

#[derive(Parser)]
#[command(name = "deepchem", version, about = "Deep features from a ResNet-18 forward pass, modelled with PLS and SO-PLS")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Feature CSV from a manifest of images.
    Extract(Opts),
    /// Pseudo-RGB PPMs and mean spectra from a manifest of cubes.
    Compress(Opts),
    /// Cross-validated RMSECV curve.
    Cv(Opts),
    /// Fit a PLS model (CV-selected order unless --lv is given).
    Train(Opts),
    /// Apply a PLS model to a feature CSV.
    Predict(Opts),
    /// Two-block SO-PLS grid search, model and comparison report.
    Fuse(Opts),
    /// CV, training and held-out prediction in one bundle.
    Report(Opts),
    /// Write the seeded synthetic ResNet-18 weight archive.
    SynthArchive(Opts),
    /// Write procedurally textured images with known scores.
    SynthDataset(Opts),
}

#[derive(Args)]
struct Opts {
    /// key=value file of flags; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// NNW1 weight archive.
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Feature tap: stem, stage1..stage4 (alias pool4), gap (alias pool5).
    #[arg(long, default_value = "gap")]
    tap: String,
    /// CSV `id,path`; paths are relative to the manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// loo, kfold:K or kfold:K:SEED.
    #[arg(long, default_value = "kfold:5")]
    cv: String,
    /// Latent-variable cap, or N1,N2 per block for fuse.
    #[arg(long)]
    max_lv: Option<String>,
    /// Fixed model order for train and report.
    #[arg(long)]
    lv: Option<usize>,
    /// Wavelengths in nm for pseudo-RGB.
    #[arg(long, conflicts_with = "pca")]
    bands: Option<String>,
    /// Render the first three principal components instead of bands.
    #[arg(long)]
    pca: bool,
    /// PRNG seed for k-fold assignment and synthetic data [default: 42; 2024 for synth-archive].
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Second block for fuse.
    #[arg(long)]
    features2: Option<PathBuf>,
    /// CSV `id,value`.
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    test_features: Option<PathBuf>,
    #[arg(long)]
    test_features2: Option<PathBuf>,
    #[arg(long)]
    test_responses: Option<PathBuf>,
    /// Images written by synth-dataset.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Omit the SVG timestamp (as does DEEPCHEM_NO_TIMESTAMP=1).
    #[arg(long)]
    no_timestamp: bool,
}

const BOOL_FLAGS: &[&str] = &["pca", "no-timestamp"];

fn parse_bands(s: &str) -> Result<BandTriplet, PipelineError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::Usage(format!("--bands `{s}`: {e}")))?;
    match v.as_slice() {
        [r, g, b] if v.iter().all(|w| w.is_finite() && *w > 0.0) => Ok(BandTriplet::new(*r, *g, *b)),
        _ => Err(PipelineError::Usage(format!("--bands `{s}`: expected three positive wavelengths R,G,B"))),
    }
}

fn to_config(command: Command, o: Opts) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::new(command, o.out);
    cfg.tap = o.tap.parse::<Tap>().map_err(|e| PipelineError::Usage(e.to_string()))?;
    cfg.compression = match (&o.bands, o.pca) {
        (_, true) => Compression::Pca,
        (Some(b), false) => Compression::Bands(parse_bands(b)?),
        (None, false) => Compression::Bands(BandTriplet::VISIBLE_DEFAULT),
    };
    let default_seed = if command == Command::SynthArchive { FIXTURE_SEED } else { RunConfig::DEFAULT_SEED };
    cfg.seed = o.seed.unwrap_or(default_seed);
    cfg.cv = parse_cv_spec(&o.cv, cfg.seed)?;
    cfg.max_lv = o.max_lv.as_deref().map(parse_lv_caps).transpose()?;
    cfg.lv = o.lv;
    cfg.manifest = o.manifest;
    cfg.archive = o.archive;
    cfg.features = o.features;
    cfg.features2 = o.features2;
    cfg.responses = o.responses;
    cfg.model = o.model;
    cfg.test_features = o.test_features;
    cfg.test_features2 = o.test_features2;
    cfg.test_responses = o.test_responses;
    cfg.count = o.count;
    cfg.timestamp = if o.no_timestamp { None } else { timestamp_from_env() };
    Ok(cfg)
}

/// Splices `--config` file entries in ahead of the user's own flags, so the
/// later command-line values override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, PipelineError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Input(format!("{path}: {e}")))?;
    let extra = config_to_args(&parse_config_file(&text)?, BOOL_FLAGS)?;
    let mut out = args;
    let at = 2.min(out.len());
    out.splice(at..at, extra);
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return ExitCode::from(if ok { 0 } else { EXIT_USAGE as u8 });
        }
    };
    let (command, opts) = match cli.command {
        Cmd::Extract(o) => (Command::Extract, o),
        Cmd::Compress(o) => (Command::Compress, o),
        Cmd::Cv(o) => (Command::Cv, o),
        Cmd::Train(o) => (Command::Train, o),
        Cmd::Predict(o) => (Command::Predict, o),
        Cmd::Fuse(o) => (Command::Fuse, o),
        Cmd::Report(o) => (Command::Report, o),
        Cmd::SynthArchive(o) => (Command::SynthArchive, o),
        Cmd::SynthDataset(o) => (Command::SynthDataset, o),
    };
    let result = to_config(command, opts).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for (id, reason) in &outcome.failures {
                eprintln!("error: {id}: {reason}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_USAGE || code == EXIT_INPUT);
            ExitCode::from(code as u8)
        }
    }
}
