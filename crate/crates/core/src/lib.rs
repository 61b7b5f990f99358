//! Target-tailored coreset selection for efficient model benchmarking.
//!
//! Given source models with full correctness on a benchmark, the pipeline
//! picks a small global probe set, finds for each target model the source
//! models that agree with it most on that probe, extends the probe into a
//! per-target coreset by anchored K-Medoids over those sources, and turns
//! the target's predictions on that coreset into a calibrated estimate of
//! its full-benchmark accuracy.

pub mod baselines;
pub mod cluster;
pub mod distance;
pub mod error;
pub mod estimation;
pub mod gset;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod native;
pub mod nset;
pub mod seed;
pub mod synthetic;

pub use cluster::{scalable_kmedoids, Coreset};
pub use distance::{pairwise_distances, Metric};
pub use error::{Error, Result};
pub use estimation::{estimate_calibrated, estimate_weighted, PerformanceEstimate};
pub use gset::{build_gset, kmedoids};
pub use matrix::{split_models, CorrectnessMatrix, ExamplesEmbedding, MatrixFormat, MatrixKind, ModelSplit};
pub use native::{NativeMode, NativeSelection};
pub use nset::{build_nset, NSetResult};
pub use harness::{run_experiment, run_trial, ExperimentConfig, Method};
pub use synthetic::{generate_population, PopulationSpec};
