//! Per-target extension of the probe set into a native coreset.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cluster::{alternate, scalable_kmedoids, seeded_initialization, Coreset};
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::gset::CoresetRecord;
use crate::matrix::CorrectnessMatrix;
use crate::native::NativeSelection;

#[derive(Debug, Clone, PartialEq)]
pub struct NSetResult {
    pub target_id: String,
    pub coreset: Coreset,
    /// Native source ids the examples were embedded over.
    pub basis: Vec<String>,
    /// Probe medoids, in probe order.
    pub gset_indices: Vec<usize>,
}

impl NSetResult {
    /// Distinct examples the target must be run on: probe set plus N-set.
    pub fn evaluated_examples(&self) -> BTreeSet<usize> {
        self.gset_indices
            .iter()
            .chain(&self.coreset.medoid_indices)
            .copied()
            .collect()
    }

    pub fn inference_count(&self) -> usize {
        self.evaluated_examples().len()
    }
}

/// Clusters the target's native-source embedding of every example into
/// `nset_size` medoids.
///
/// With `fixed_gset` the probe medoids are anchored; otherwise they only
/// seed the initialization and may move during refinement.
#[allow(clippy::too_many_arguments)]
pub fn build_nset(
    matrix: &CorrectnessMatrix,
    gset: &Coreset,
    selection: &NativeSelection,
    target_id: &str,
    nset_size: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
    fixed_gset: bool,
) -> Result<NSetResult> {
    let g = gset.k();
    if nset_size < g || nset_size > matrix.n_examples() {
        return Err(Error::out_of_range(
            "nset_size",
            nset_size,
            format!("[{g}, {}]", matrix.n_examples()),
        ));
    }
    let basis = selection.sources_for(target_id)?.to_vec();
    let embedding = matrix.embed_examples(&basis, None)?;
    let anchors = &gset.medoid_indices;
    let coreset = if fixed_gset {
        scalable_kmedoids(&embedding, anchors, nset_size, metric, seed, max_iter)?
    } else {
        let initial = seeded_initialization(embedding.len(), anchors, nset_size, seed)?;
        alternate(&embedding, initial, vec![false; nset_size], metric, max_iter)?
    };
    Ok(NSetResult {
        target_id: target_id.to_string(),
        coreset,
        basis,
        gset_indices: anchors.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSetRecord {
    pub target_id: String,
    pub basis: Vec<String>,
    pub gset_example_ids: Vec<String>,
    pub inference_count: usize,
    #[serde(flatten)]
    pub coreset: CoresetRecord,
}

impl NSetRecord {
    pub fn from_result(result: &NSetResult, matrix: &CorrectnessMatrix) -> Self {
        Self {
            target_id: result.target_id.clone(),
            basis: result.basis.clone(),
            gset_example_ids: result
                .gset_indices
                .iter()
                .map(|&k| matrix.example_ids()[k].clone())
                .collect(),
            inference_count: result.inference_count(),
            coreset: CoresetRecord::from_coreset(&result.coreset, matrix),
        }
    }

    pub fn to_result(&self, matrix: &CorrectnessMatrix) -> Result<NSetResult> {
        Ok(NSetResult {
            target_id: self.target_id.clone(),
            coreset: self.coreset.to_coreset(matrix)?,
            basis: self.basis.clone(),
            gset_indices: self
                .gset_example_ids
                .iter()
                .map(|id| matrix.example_index(id))
                .collect::<Result<_>>()?,
        })
    }
}
