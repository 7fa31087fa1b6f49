//! Weight archives and the ResNet-18 feature extractor.

pub mod archive;
pub mod graph;
pub mod synthetic;

pub use archive::{load_archive, ArchiveError, ArchiveTensor, WeightArchive};
pub use graph::{build_resnet18, residual_block, BasicBlockParams, GraphError, NetworkGraph, Projection, Tap, INPUT_DIMS};
pub use synthetic::{synthetic_resnet18, FIXTURE_SEED};
