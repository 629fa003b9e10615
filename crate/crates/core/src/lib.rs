//! Core library for a desk-scale lab on recognizing mistaken beliefs in
//! 8-frame abstract scenes.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`scene`]: scene types, validation, the JSON codec, interpolation and SVG rendering.
//! - [`gen`]: visibility, the per-character belief oracle, story templates and datasets.
//! - [`repr`]: person-centric transform, semantic rasterization and feature sequences.
//! - [`learn`]: temporal convolutional logistic regression trained with Adam.
//! - [`eval`]: who / when / joint tasks, baselines and ablations over repeated splits.
//! - [`config`]: run configuration and run manifests.

pub mod config;
pub mod eval;
pub mod gen;
pub mod learn;
pub mod repr;
pub mod rng;
pub mod scene;
pub mod svg;

/// Version string recorded in every manifest this crate writes.
pub const ARTIFACT_VERSION: &str = concat!("mistaken-core ", env!("CARGO_PKG_VERSION"));
