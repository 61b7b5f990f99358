//! Full-benchmark accuracy estimates from a target's coreset predictions.
//!
//! The calibrated estimator transfers the target's correctness on each
//! medoid to the other members of its cluster, rescaled by how the native
//! sources' mean correctness on the member compares with the medoid. The
//! weighted estimator simply weights each medoid by its cluster size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::Coreset;
use crate::error::{Error, Result};
use crate::matrix::CorrectnessMatrix;
use crate::nset::NSetResult;

/// Offset added to both correctness means before taking their ratio.
pub const CALIBRATION_OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    Calibrated,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEstimate {
    pub target_id: String,
    pub method: EstimateMethod,
    pub estimate: f64,
    pub inference_count: usize,
    /// Mean of the unclamped calibrated values; differs from `estimate` only when clamping kicked in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_estimate: Option<f64>,
    /// Calibrated correctness per example, in matrix example order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_example: Option<Vec<f64>>,
}

/// Ratio of offset native-source means: non-medoid over medoid. Lies in `[1/3, 3]`.
pub fn scale_factor(mean_src_nonmedoid: f64, mean_src_medoid: f64) -> f64 {
    (mean_src_nonmedoid + CALIBRATION_OFFSET) / (mean_src_medoid + CALIBRATION_OFFSET)
}

/// Unclamped transfer of medoid correctness through a scale factor.
pub fn calibrate_raw(target_on_medoid: f64, scale: f64) -> f64 {
    (target_on_medoid + CALIBRATION_OFFSET) * scale - CALIBRATION_OFFSET
}

/// [`calibrate_raw`] clamped to `[0, 1]`.
pub fn calibrate_correctness(target_on_medoid: f64, scale: f64) -> f64 {
    calibrate_raw(target_on_medoid, scale).clamp(0.0, 1.0)
}

fn check_predictions(coreset: &Coreset, predictions: &BTreeMap<usize, f64>) -> Result<()> {
    for &m in &coreset.medoid_indices {
        match predictions.get(&m) {
            None => return Err(Error::MissingPrediction(m)),
            Some(v) if !(0.0..=1.0).contains(v) => {
                return Err(Error::out_of_range("prediction", v, "[0, 1]"))
            }
            Some(_) => {}
        }
    }
    if predictions.len() != coreset.k() {
        let extra = predictions
            .keys()
            .find(|k| !coreset.medoid_indices.contains(k))
            .copied()
            .unwrap_or_default();
        return Err(Error::UnexpectedPrediction(extra));
    }
    Ok(())
}

/// Mean correctness of `basis` models on every example.
pub fn native_means(matrix: &CorrectnessMatrix, basis: &[String]) -> Result<Vec<f64>> {
    if basis.is_empty() {
        return Err(Error::out_of_range("native source count", 0, ">= 1"));
    }
    let mut sums = vec![0.0; matrix.n_examples()];
    for id in basis {
        let row = matrix.row(matrix.model_index(id)?);
        for (s, v) in sums.iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    let n = basis.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Calibrated estimate; `predictions` must cover exactly the N-set medoids.
pub fn estimate_calibrated(
    matrix: &CorrectnessMatrix,
    nset: &NSetResult,
    predictions: &BTreeMap<usize, f64>,
) -> Result<PerformanceEstimate> {
    let coreset = &nset.coreset;
    if coreset.n_examples() != matrix.n_examples() {
        return Err(Error::DimensionMismatch {
            left: coreset.n_examples(),
            right: matrix.n_examples(),
        });
    }
    check_predictions(coreset, predictions)?;
    let means = native_means(matrix, &nset.basis)?;
    let n = matrix.n_examples();
    let mut per_example = Vec::with_capacity(n);
    let (mut sum, mut raw_sum) = (0.0, 0.0);
    for k in 0..n {
        let medoid = coreset.medoid_of(k);
        let observed = predictions[&medoid];
        let (value, raw) = if medoid == k {
            (observed, observed)
        } else {
            let raw = calibrate_raw(observed, scale_factor(means[k], means[medoid]));
            (raw.clamp(0.0, 1.0), raw)
        };
        per_example.push(value);
        sum += value;
        raw_sum += raw;
    }
    Ok(PerformanceEstimate {
        target_id: nset.target_id.clone(),
        method: EstimateMethod::Calibrated,
        estimate: sum / n as f64,
        inference_count: nset.inference_count(),
        raw_estimate: Some(raw_sum / n as f64),
        per_example: Some(per_example),
    })
}

/// Cluster-size weighted mean of medoid predictions.
pub fn estimate_weighted(
    target_id: &str,
    coreset: &Coreset,
    predictions: &BTreeMap<usize, f64>,
) -> Result<PerformanceEstimate> {
    check_predictions(coreset, predictions)?;
    let by_position: Vec<f64> = coreset.medoid_indices.iter().map(|m| predictions[m]).collect();
    // Summed per example so that all-singleton clusters reproduce the row mean bit for bit.
    let mut sum = 0.0;
    for &p in &coreset.assignment {
        sum += by_position[p];
    }
    Ok(PerformanceEstimate {
        target_id: target_id.to_string(),
        method: EstimateMethod::Weighted,
        estimate: sum / coreset.n_examples() as f64,
        inference_count: coreset.k(),
        raw_estimate: None,
        per_example: None,
    })
}
