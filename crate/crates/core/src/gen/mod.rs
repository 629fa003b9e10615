//! Procedural story generation with a deterministic belief oracle.
//!
//! Ground-truth labels never come from the templates themselves: every scene
//! is replayed through [`update_beliefs`] and labelled by [`derive_labels`].

mod belief;
mod dataset;
mod stats;
mod templates;
mod visibility;

pub use belief::{derive_labels, update_beliefs, BeliefState, Observation};
pub use dataset::{
    dataset_priors, generate_dataset, generate_dataset_with_mix, read_dataset, scene_file_name, write_dataset, Dataset,
    GenTargets, Manifest,
    ManifestEntry, TemplateMix,
};
pub use stats::{dataset_stats, StatsReport};
pub use templates::generate_scene;
pub use visibility::{is_visible, segment_hits_rect};

use crate::scene::{CharacterId, CodecError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("observer {0} is not present")]
    AbsentObserver(CharacterId),
    #[error("frame index {got} out of order (expected {expected})")]
    OutOfOrderFrame { expected: usize, got: usize },
    #[error("dataset count must be at least 1")]
    EmptyDataset,
    #[error(
        "targets infeasible after {adjustments} mix adjustments: mistaken fraction {fraction:.4} \
         (target {target_fraction} ± {fraction_tol}), characters per frame {chars:.3} (target {target_chars} ± {chars_tol})"
    )]
    Infeasible {
        adjustments: usize,
        fraction: f64,
        target_fraction: f64,
        fraction_tol: f64,
        chars: f64,
        target_chars: f64,
        chars_tol: f64,
        /// The closest dataset found, for callers that accept a miss.
        best: Box<Dataset>,
    },
    #[error("scene {index}: {source}")]
    Codec { index: usize, source: CodecError },
    #[error("{0}")]
    Manifest(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
