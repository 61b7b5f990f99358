//! Target-agnostic reference estimators: a random subset and a static
//! K-Medoids coreset weighted by cluster size.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::Coreset;
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::estimation::{estimate_weighted, EstimateMethod, PerformanceEstimate};
use crate::gset::kmedoids;
use crate::matrix::{CorrectnessMatrix, ModelSplit};

/// Default metric of the static-coreset baseline.
pub const ANCHOR_POINTS_METRIC: Metric = Metric::Correlation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Random,
    AnchorPoints,
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(BaselineMethod::Random),
            "anchor-points" | "anchor_points" => Ok(BaselineMethod::AnchorPoints),
            _ => Err(Error::out_of_range("baseline method", s, "random|anchor-points")),
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineMethod::Random => "random",
            BaselineMethod::AnchorPoints => "anchor-points",
        })
    }
}

fn check_budget(matrix: &CorrectnessMatrix, budget: usize) -> Result<()> {
    if budget == 0 || budget > matrix.n_examples() {
        return Err(Error::out_of_range(
            "budget",
            budget,
            format!("[1, {}]", matrix.n_examples()),
        ));
    }
    Ok(())
}

/// Seeded uniform subset of `budget` examples, ascending.
pub fn random_subset(n_examples: usize, budget: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = index::sample(&mut rng, n_examples, budget).into_vec();
    subset.sort_unstable();
    subset
}

/// Mean correctness of each target on one shared random subset.
pub fn random_baseline(
    matrix: &CorrectnessMatrix,
    split: &ModelSplit,
    budget: usize,
    seed: u64,
) -> Result<Vec<PerformanceEstimate>> {
    check_budget(matrix, budget)?;
    let subset = random_subset(matrix.n_examples(), budget, seed);
    split
        .target_ids
        .iter()
        .map(|id| {
            let m = matrix.model_index(id)?;
            let predictions: Vec<f64> = subset.iter().map(|&k| matrix.get(m, k)).collect();
            Ok(random_estimate(id, &predictions))
        })
        .collect()
}

/// Mean of the target's correctness on the subset, in subset order.
pub fn random_estimate(target_id: &str, predictions: &[f64]) -> PerformanceEstimate {
    let mut sum = 0.0;
    for &v in predictions {
        sum += v;
    }
    PerformanceEstimate {
        target_id: target_id.to_string(),
        method: EstimateMethod::Weighted,
        estimate: sum / predictions.len() as f64,
        inference_count: predictions.len(),
        raw_estimate: None,
        per_example: None,
    }
}

/// Static coreset over all source models, shared by every target.
pub fn anchor_points_coreset(
    matrix: &CorrectnessMatrix,
    split: &ModelSplit,
    budget: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
) -> Result<Coreset> {
    check_budget(matrix, budget)?;
    let embedding = matrix.embed_examples(&split.source_ids, None)?;
    kmedoids(&embedding, budget, metric, seed, max_iter)
}

pub fn anchor_points_baseline(
    matrix: &CorrectnessMatrix,
    split: &ModelSplit,
    budget: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<PerformanceEstimate>> {
    let coreset = anchor_points_coreset(matrix, split, budget, metric, seed, max_iter)?;
    split
        .target_ids
        .iter()
        .map(|id| {
            let m = matrix.model_index(id)?;
            let predictions: BTreeMap<usize, f64> = coreset
                .medoid_indices
                .iter()
                .map(|&k| (k, matrix.get(m, k)))
                .collect();
            estimate_weighted(id, &coreset, &predictions)
        })
        .collect()
}
