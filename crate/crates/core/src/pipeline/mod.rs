//! The batch commands behind the `deepchem` binary.
//!
//! Each command reads its inputs, writes every output through a temporary file
//! and an atomic rename, and returns an [`Outcome`]. Per-item failures in batch
//! commands (bad images, bad cubes) are collected rather than aborting the run.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 partial failure.

mod batch;
mod config;
mod model;
mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cube::BandTriplet;
use crate::net::Tap;
use crate::pls::FoldSpec;

pub use batch::{cmd_compress, cmd_extract, read_manifest, EXTRACT_PROVENANCE_SUFFIX};
pub use config::{config_to_args, parse_config_file, parse_cv_spec, parse_lv_caps};
pub use model::{cmd_cv, cmd_fuse, cmd_predict, cmd_train};
pub use report::{cmd_report, cmd_synth_archive, cmd_synth_dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => EXIT_USAGE,
            PipelineError::Input(_) => EXIT_INPUT,
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Input(e.to_string())
            }
        }
    )*};
}

input_error!(
    crate::data::DataError,
    crate::pls::PlsError,
    crate::sopls::SoplsError,
    crate::net::ArchiveError,
    crate::net::GraphError,
    crate::cube::CubeError,
    crate::image::ImageError,
    csv::Error
);

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Input(format!("{}: {e}", path.display()))
}

/// What a command produced.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    /// Files written, in write order.
    pub written: Vec<PathBuf>,
    /// `(item id, reason)` for items skipped in batch commands.
    pub failures: Vec<(String, String)>,
    /// Short human-readable summary lines.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Extract,
    Compress,
    Cv,
    Train,
    Predict,
    Fuse,
    Report,
    SynthArchive,
    SynthDataset,
}

/// How `compress` renders a cube as RGB. The two modes are exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compression {
    Bands(BandTriplet),
    Pca,
}

/// Fully resolved parameters of one command run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub manifest: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    pub tap: Tap,
    pub compression: Compression,
    pub cv: FoldSpec,
    /// Per-block caps on latent variables; `None` picks a data-driven cap.
    pub max_lv: Option<Vec<usize>>,
    /// Fixed model order for `train`, bypassing CV.
    pub lv: Option<usize>,
    pub out: PathBuf,
    pub features: Option<PathBuf>,
    pub features2: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub test_features: Option<PathBuf>,
    pub test_features2: Option<PathBuf>,
    pub test_responses: Option<PathBuf>,
    pub seed: u64,
    pub count: usize,
    /// Unix seconds stamped into SVGs; `None` omits the stamp.
    pub timestamp: Option<u64>,
}

impl RunConfig {
    pub const DEFAULT_SEED: u64 = 42;
    pub const DEFAULT_LV_CAP: usize = 10;

    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        Self {
            command,
            manifest: None,
            archive: None,
            tap: Tap::Gap,
            compression: Compression::Bands(BandTriplet::VISIBLE_DEFAULT),
            cv: FoldSpec::KFold { k: 5, seed: Self::DEFAULT_SEED },
            max_lv: None,
            lv: None,
            out: out.into(),
            features: None,
            features2: None,
            responses: None,
            model: None,
            test_features: None,
            test_features2: None,
            test_responses: None,
            seed: Self::DEFAULT_SEED,
            count: 200,
            timestamp: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(caps) = &self.max_lv {
            if caps.is_empty() || caps.contains(&0) {
                return Err(PipelineError::Usage("--max-lv values must be at least 1".into()));
            }
        }
        if self.lv == Some(0) {
            return Err(PipelineError::Usage("--lv must be at least 1".into()));
        }
        if let FoldSpec::KFold { k, .. } = self.cv {
            if k < 2 {
                return Err(PipelineError::Usage("k-fold needs k >= 2".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value.as_deref().ok_or_else(|| PipelineError::Usage(format!("{flag} is required for this command")))
    }

    pub(crate) fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.command {
        Command::Extract => cmd_extract(cfg),
        Command::Compress => cmd_compress(cfg),
        Command::Cv => cmd_cv(cfg),
        Command::Train => cmd_train(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::Fuse => cmd_fuse(cfg),
        Command::Report => cmd_report(cfg),
        Command::SynthArchive => cmd_synth_archive(cfg),
        Command::SynthDataset => cmd_synth_dataset(cfg),
    }
}

/// Writes `bytes` atomically, creating parent directories.
pub(crate) fn write_output(outcome: &mut Outcome, path: PathBuf, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    crate::io::write_atomic(&path, bytes).map_err(|e| io_error(&path, e))?;
    outcome.written.push(path);
    Ok(())
}

/// `key=value` lines. Non-finite values are written as `undefined`.
#[derive(Debug, Default, Clone)]
pub(crate) struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub(crate) fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub(crate) fn real(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.push(key, value);
        } else {
            self.push(key, "undefined");
        }
    }

    pub(crate) fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
