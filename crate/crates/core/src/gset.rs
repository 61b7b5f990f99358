//! Global probe coreset built by K-Medoids over all source models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{scalable_kmedoids, Coreset};
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::matrix::{CorrectnessMatrix, ExamplesEmbedding, ModelSplit};

pub const DEFAULT_GSET_SIZE: usize = 10;

/// Plain K-Medoids: a single seeded initialization followed by alternation.
pub fn kmedoids(
    embedding: &ExamplesEmbedding,
    k: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
) -> Result<Coreset> {
    scalable_kmedoids(embedding, &[], k, metric, seed, max_iter)
}

/// Clusters every example on its source-model correctness vector and
/// returns `k` medoids, none of them anchored.
pub fn build_gset(
    matrix: &CorrectnessMatrix,
    split: &ModelSplit,
    k: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
) -> Result<Coreset> {
    if split.source_ids.is_empty() {
        return Err(Error::InvalidSplit("empty source set".into()));
    }
    if k == 0 || k > matrix.n_examples() {
        return Err(Error::out_of_range("k", k, format!("[1, {}]", matrix.n_examples())));
    }
    let embedding = matrix.embed_examples(&split.source_ids, None)?;
    kmedoids(&embedding, k, metric, seed, max_iter)
}

/// JSON form of a coreset, keyed by example ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetRecord {
    pub medoid_example_ids: Vec<String>,
    pub anchored: Vec<bool>,
    /// Example id to the id of its medoid.
    pub assignment: BTreeMap<String, String>,
    pub objective: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub converged: bool,
}

impl CoresetRecord {
    pub fn from_coreset(coreset: &Coreset, matrix: &CorrectnessMatrix) -> Self {
        let ids = matrix.example_ids();
        Self {
            medoid_example_ids: coreset.medoid_indices.iter().map(|&k| ids[k].clone()).collect(),
            anchored: coreset.anchored.clone(),
            assignment: (0..coreset.n_examples())
                .map(|k| (ids[k].clone(), ids[coreset.medoid_of(k)].clone()))
                .collect(),
            objective: coreset.objective,
            iterations: coreset.iterations,
            converged: coreset.converged,
        }
    }

    pub fn to_coreset(&self, matrix: &CorrectnessMatrix) -> Result<Coreset> {
        let medoids: Vec<usize> = self
            .medoid_example_ids
            .iter()
            .map(|id| matrix.example_index(id))
            .collect::<Result<_>>()?;
        if self.anchored.len() != medoids.len() {
            return Err(Error::DimensionMismatch {
                left: self.anchored.len(),
                right: medoids.len(),
            });
        }
        let position: BTreeMap<usize, usize> = medoids.iter().enumerate().map(|(p, &m)| (m, p)).collect();
        if position.len() != medoids.len() {
            return Err(Error::InvalidConfig("duplicate medoid ids".into()));
        }
        let mut assignment = vec![usize::MAX; matrix.n_examples()];
        for (example, medoid) in &self.assignment {
            let k = matrix.example_index(example)?;
            let m = matrix.example_index(medoid)?;
            assignment[k] = *position
                .get(&m)
                .ok_or_else(|| Error::InvalidConfig(format!("{medoid:?} is not a medoid")))?;
        }
        if let Some(k) = assignment.iter().position(|&p| p == usize::MAX) {
            return Err(Error::InvalidConfig(format!(
                "example {:?} has no assignment",
                matrix.example_ids()[k]
            )));
        }
        Ok(Coreset {
            medoid_indices: medoids,
            anchored: self.anchored.clone(),
            assignment,
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            trace: Vec::new(),
        })
    }
}
