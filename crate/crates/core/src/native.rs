//! Per-target native source selection using the probe set.
//!
//! Every model (source and target) is embedded by its correctness on the
//! probe examples. The mean pairwise distance over all models is the
//! consistency threshold; the floor of the mean number of sources below the
//! threshold per target fixes how many native sources each target gets.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::Coreset;
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::matrix::CorrectnessMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NativeMode {
    /// Exactly `n_bar` sources per target.
    #[default]
    Standardized,
    /// Every source under the threshold, with `n_bar` as a lower bound.
    Dynamic,
}

impl FromStr for NativeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardized" => Ok(NativeMode::Standardized),
            "dynamic" => Ok(NativeMode::Dynamic),
            _ => Err(Error::out_of_range("native mode", s, "standardized|dynamic")),
        }
    }
}

impl fmt::Display for NativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NativeMode::Standardized => "standardized",
            NativeMode::Dynamic => "dynamic",
        })
    }
}

/// A model's correctness on the probe examples, in probe order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEmbedding {
    pub model_id: String,
    pub vector: Vec<f64>,
}

/// Reads each listed model's correctness on the probe medoids.
pub fn embed_models_on_gset(
    matrix: &CorrectnessMatrix,
    gset: &Coreset,
    model_ids: &[String],
) -> Result<Vec<ModelEmbedding>> {
    model_ids
        .iter()
        .map(|id| {
            let m = matrix.model_index(id)?;
            Ok(ModelEmbedding {
                model_id: id.clone(),
                vector: gset.medoid_indices.iter().map(|&k| matrix.get(m, k)).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeSelection {
    pub d_bar: f64,
    pub n_bar: usize,
    pub mode: NativeMode,
    /// Target id to its native source ids, most consistent first.
    pub per_target: BTreeMap<String, Vec<String>>,
}

impl NativeSelection {
    pub fn sources_for(&self, target_id: &str) -> Result<&[String]> {
        self.per_target
            .get(target_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownModel(target_id.to_string()))
    }
}

fn check_dims(models: &[&ModelEmbedding]) -> Result<()> {
    if let Some(first) = models.first() {
        if first.vector.is_empty() {
            return Err(Error::out_of_range("probe dimension", 0, ">= 1"));
        }
        for m in models {
            if m.vector.len() != first.vector.len() {
                return Err(Error::DimensionMismatch {
                    left: first.vector.len(),
                    right: m.vector.len(),
                });
            }
        }
    }
    Ok(())
}

/// Mean distance over all unordered model pairs.
pub fn mean_pairwise_model_distance(models: &[ModelEmbedding], metric: Metric) -> Result<f64> {
    let n = models.len();
    if n < 2 {
        return Err(Error::out_of_range("model count", n, ">= 2"));
    }
    check_dims(&models.iter().collect::<Vec<_>>())?;
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += metric.eval(&models[i].vector, &models[j].vector);
        }
    }
    Ok(2.0 * sum / (n as f64 * (n as f64 - 1.0)))
}

/// Sources of one target sorted by distance, ties by source id.
fn ranked_sources<'a>(
    sources: &'a [ModelEmbedding],
    target: &ModelEmbedding,
    metric: Metric,
) -> Vec<(&'a str, f64)> {
    let mut ranked: Vec<(&str, f64)> = sources
        .iter()
        .map(|s| (s.model_id.as_str(), metric.eval(&s.vector, &target.vector)))
        .collect();
    ranked.sort_by(|a, b| match a.1.total_cmp(&b.1) {
        Ordering::Equal => a.0.cmp(b.0),
        other => other,
    });
    ranked
}

/// Floor of the mean per-target count of sources strictly closer than `d_bar`,
/// clamped to at least 1.
pub fn compute_n_bar(
    sources: &[ModelEmbedding],
    targets: &[ModelEmbedding],
    metric: Metric,
    d_bar: f64,
) -> Result<usize> {
    if d_bar.is_nan() || d_bar < 0.0 {
        return Err(Error::out_of_range("d_bar", d_bar, ">= 0"));
    }
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::InvalidSplit("empty source or target set".into()));
    }
    check_dims(&sources.iter().chain(targets).collect::<Vec<_>>())?;
    let total: usize = targets
        .iter()
        .map(|t| {
            sources
                .iter()
                .filter(|s| metric.eval(&s.vector, &t.vector) < d_bar)
                .count()
        })
        .sum();
    Ok((total / targets.len()).max(1))
}

pub fn select_native(
    sources: &[ModelEmbedding],
    targets: &[ModelEmbedding],
    metric: Metric,
    d_bar: f64,
    n_bar: usize,
    mode: NativeMode,
) -> Result<NativeSelection> {
    if n_bar == 0 || n_bar > sources.len() {
        return Err(Error::out_of_range("n_bar", n_bar, format!("[1, {}]", sources.len())));
    }
    check_dims(&sources.iter().chain(targets).collect::<Vec<_>>())?;
    let per_target = targets
        .iter()
        .map(|t| {
            let ranked = ranked_sources(sources, t, metric);
            let take = match mode {
                NativeMode::Standardized => n_bar,
                NativeMode::Dynamic => ranked.iter().take_while(|(_, d)| *d < d_bar).count().max(n_bar),
            };
            let ids = ranked[..take].iter().map(|(id, _)| id.to_string()).collect();
            (t.model_id.clone(), ids)
        })
        .collect();
    Ok(NativeSelection {
        d_bar,
        n_bar,
        mode,
        per_target,
    })
}

/// Threshold, native count and selection in one pass.
pub fn adaptive_selection(
    sources: &[ModelEmbedding],
    targets: &[ModelEmbedding],
    metric: Metric,
    mode: NativeMode,
) -> Result<NativeSelection> {
    let all: Vec<ModelEmbedding> = sources.iter().chain(targets).cloned().collect();
    let d_bar = mean_pairwise_model_distance(&all, metric)?;
    let n_bar = compute_n_bar(sources, targets, metric, d_bar)?.min(sources.len());
    select_native(sources, targets, metric, d_bar, n_bar, mode)
}

/// Forced selection from a slice of each target's consistency ranking.
///
/// `start..end` are positions in the ranking, most consistent first.
/// Used for controlled sweeps of native-source quantity and consistency.
pub fn select_ranked_range(
    sources: &[ModelEmbedding],
    targets: &[ModelEmbedding],
    metric: Metric,
    start: usize,
    end: usize,
) -> Result<NativeSelection> {
    if start >= end || end > sources.len() {
        return Err(Error::out_of_range(
            "ranking range",
            format!("{start}..{end}"),
            format!("non-empty within 0..{}", sources.len()),
        ));
    }
    check_dims(&sources.iter().chain(targets).collect::<Vec<_>>())?;
    let all: Vec<ModelEmbedding> = sources.iter().chain(targets).cloned().collect();
    let d_bar = if all.len() >= 2 {
        mean_pairwise_model_distance(&all, metric)?
    } else {
        0.0
    };
    let per_target = targets
        .iter()
        .map(|t| {
            let ranked = ranked_sources(sources, t, metric);
            (
                t.model_id.clone(),
                ranked[start..end].iter().map(|(id, _)| id.to_string()).collect(),
            )
        })
        .collect();
    Ok(NativeSelection {
        d_bar,
        n_bar: end - start,
        mode: NativeMode::Standardized,
        per_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn me(id: &str, v: &[f64]) -> ModelEmbedding {
        ModelEmbedding {
            model_id: id.into(),
            vector: v.to_vec(),
        }
    }

    #[test]
    fn d_bar_cases() {
        let same = vec![me("a", &[1.0, 0.0]), me("b", &[1.0, 0.0]), me("c", &[1.0, 0.0])];
        assert_eq!(mean_pairwise_model_distance(&same, Metric::Manhattan).unwrap(), 0.0);
        let two = vec![me("a", &[0.0, 0.0]), me("b", &[1.0, 1.0])];
        assert_eq!(mean_pairwise_model_distance(&two, Metric::Manhattan).unwrap(), 2.0);
        assert!(mean_pairwise_model_distance(&two[..1], Metric::Manhattan).is_err());
    }

    #[test]
    fn d_bar_matches_double_loop() {
        let models: Vec<ModelEmbedding> = (0..5)
            .map(|i| me(&format!("m{i}"), &[(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0, 0.5]))
            .collect();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..5 {
            for j in 0..5 {
                if i < j {
                    sum += Metric::Manhattan.distance(&models[i].vector, &models[j].vector).unwrap();
                    pairs += 1;
                }
            }
        }
        let d = mean_pairwise_model_distance(&models, Metric::Manhattan).unwrap();
        assert!((d - sum / pairs as f64).abs() < 1e-14);
    }

    #[test]
    fn n_bar_cases() {
        let sources = vec![me("s0", &[1.0, 0.0]), me("s1", &[1.0, 0.0])];
        let targets = vec![me("t0", &[1.0, 0.0])];
        // identical everywhere: threshold 0, strict inequality leaves 0, clamped to 1
        assert_eq!(compute_n_bar(&sources, &targets, Metric::Manhattan, 0.0).unwrap(), 1);
        assert_eq!(compute_n_bar(&sources, &targets, Metric::Manhattan, 0.5).unwrap(), 2);

        let far = vec![me("t0", &[0.0, 1.0])];
        assert_eq!(compute_n_bar(&sources, &far, Metric::Manhattan, 1.0).unwrap(), 1);

        // counts {2, 3, 4} -> floor(3) = 3
        let sources: Vec<ModelEmbedding> = (0..4).map(|i| me(&format!("s{i}"), &[i as f64])).collect();
        let targets = [me("a", &[-0.5]), me("b", &[0.5]), me("c", &[1.5])];
        let counts: Vec<usize> = targets
            .iter()
            .map(|t| sources.iter().filter(|s| (s.vector[0] - t.vector[0]).abs() < 2.6).count())
            .collect();
        assert_eq!(counts, vec![3, 4, 4]);
        let targets = vec![me("a", &[-1.0]), me("b", &[0.0]), me("c", &[1.5])];
        let counts: Vec<usize> = targets
            .iter()
            .map(|t| sources.iter().filter(|s| (s.vector[0] - t.vector[0]).abs() < 2.2).count())
            .collect();
        assert_eq!(counts, vec![2, 3, 4]);
        assert_eq!(compute_n_bar(&sources, &targets, Metric::Manhattan, 2.2).unwrap(), 3);
        assert!(compute_n_bar(&sources, &targets, Metric::Manhattan, -1.0).is_err());
    }

    #[test]
    fn duplicate_source_ranks_first() {
        let sources = vec![
            me("s1", &[0.0, 0.0, 1.0]),
            me("s2", &[1.0, 1.0, 1.0]),
            me("s3", &[0.0, 1.0, 0.0]),
        ];
        let targets = vec![me("t", &[0.0, 1.0, 0.0])];
        let sel = select_native(&sources, &targets, Metric::Manhattan, 1.0, 1, NativeMode::Standardized).unwrap();
        assert_eq!(sel.per_target["t"], vec!["s3".to_string()]);
    }

    #[test]
    fn saturation_orders_all_sources() {
        let sources = vec![me("a", &[1.0]), me("b", &[0.2]), me("c", &[0.6])];
        let targets = vec![me("t", &[0.0])];
        let sel = select_native(&sources, &targets, Metric::Manhattan, 0.5, 3, NativeMode::Standardized).unwrap();
        assert_eq!(sel.per_target["t"], vec!["b", "c", "a"]);
        assert!(select_native(&sources, &targets, Metric::Manhattan, 0.5, 4, NativeMode::Standardized).is_err());
        assert!(select_native(&sources, &targets, Metric::Manhattan, 0.5, 0, NativeMode::Standardized).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let sources = vec![me("z", &[0.5]), me("a", &[0.5]), me("m", &[0.5])];
        let targets = vec![me("t", &[0.0])];
        let sel = select_native(&sources, &targets, Metric::Manhattan, 1.0, 2, NativeMode::Standardized).unwrap();
        assert_eq!(sel.per_target["t"], vec!["a", "m"]);
    }

    #[test]
    fn six_sources_match_full_sort() {
        let vals = [0.9, 0.15, 0.42, 0.77, 0.05, 0.6];
        let sources: Vec<ModelEmbedding> = vals.iter().enumerate().map(|(i, &v)| me(&format!("s{i}"), &[v, 1.0 - v])).collect();
        let targets = vec![me("t", &[0.3, 0.7])];
        let mut oracle: Vec<(f64, String)> = sources
            .iter()
            .map(|s| ((s.vector[0] - 0.3).abs() + (s.vector[1] - 0.7).abs(), s.model_id.clone()))
            .collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for n in 1..=6 {
            let sel = select_native(&sources, &targets, Metric::Manhattan, 0.0, n, NativeMode::Standardized).unwrap();
            let expected: Vec<String> = oracle[..n].iter().map(|x| x.1.clone()).collect();
            assert_eq!(sel.per_target["t"], expected);
        }
    }

    #[test]
    fn dynamic_is_superset_of_standardized_prefix() {
        let sources: Vec<ModelEmbedding> = (0..6).map(|i| me(&format!("s{i}"), &[i as f64 * 0.2])).collect();
        let targets = vec![me("t0", &[0.0]), me("t1", &[1.0])];
        let std_sel = select_native(&sources, &targets, Metric::Manhattan, 0.5, 2, NativeMode::Standardized).unwrap();
        let dyn_sel = select_native(&sources, &targets, Metric::Manhattan, 0.5, 2, NativeMode::Dynamic).unwrap();
        for (t, list) in &dyn_sel.per_target {
            assert!(list.len() >= 2);
            assert_eq!(&list[..2], std_sel.per_target[t].as_slice());
        }
        // s0, s1, s2 are within 0.5 of t0 (0.0, 0.2, 0.4)
        assert_eq!(dyn_sel.per_target["t0"].len(), 3);
        // padding when fewer qualify
        let dyn_small = select_native(&sources, &targets, Metric::Manhattan, 0.1, 2, NativeMode::Dynamic).unwrap();
        assert_eq!(dyn_small.per_target["t0"], vec!["s0", "s1"]);
    }

    #[test]
    fn ranked_range_bands() {
        let sources: Vec<ModelEmbedding> = (0..10).map(|i| me(&format!("s{i}"), &[i as f64 * 0.1])).collect();
        let targets = vec![me("t", &[0.0])];
        let top = select_ranked_range(&sources, &targets, Metric::Manhattan, 0, 2).unwrap();
        assert_eq!(top.per_target["t"], vec!["s0", "s1"]);
        let bottom = select_ranked_range(&sources, &targets, Metric::Manhattan, 8, 10).unwrap();
        assert_eq!(bottom.per_target["t"], vec!["s8", "s9"]);
        assert!(select_ranked_range(&sources, &targets, Metric::Manhattan, 3, 3).is_err());
        assert!(select_ranked_range(&sources, &targets, Metric::Manhattan, 0, 11).is_err());
    }

    #[test]
    fn adaptive_pipeline() {
        let sources = vec![me("s0", &[0.0, 0.0]), me("s1", &[1.0, 1.0]), me("s2", &[0.0, 1.0])];
        let targets = vec![me("t0", &[0.0, 0.0]), me("t1", &[1.0, 1.0])];
        let sel = adaptive_selection(&sources, &targets, Metric::Manhattan, NativeMode::Standardized).unwrap();
        // pairs: s0s1 2, s0s2 1, s0t0 0, s0t1 2, s1s2 1, s1t0 2, s1t1 0, s2t0 1, s2t1 1, t0t1 2 -> 12/10
        assert!((sel.d_bar - 1.2).abs() < 1e-15);
        // t0: s0 (0), s2 (1) below 1.2 -> 2; t1: s1, s2 -> 2
        assert_eq!(sel.n_bar, 2);
        assert_eq!(sel.per_target["t0"], vec!["s0", "s2"]);
        assert_eq!(sel.per_target["t1"], vec!["s1", "s2"]);
    }
}
