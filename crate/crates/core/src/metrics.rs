//! Agreement between estimated and true target performance.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

fn check_aligned(estimates: &[f64], truths: &[f64], min: usize) -> Result<()> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    if estimates.len() < min {
        return Err(Error::out_of_range("target count", estimates.len(), format!(">= {min}")));
    }
    Ok(())
}

/// Pairs two id-keyed score maps into aligned vectors (id order).
pub fn align_by_id(
    estimates: &BTreeMap<String, f64>,
    truths: &BTreeMap<String, f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if estimates.len() != truths.len() || estimates.keys().ne(truths.keys()) {
        let missing = truths
            .keys()
            .find(|k| !estimates.contains_key(*k))
            .or_else(|| estimates.keys().find(|k| !truths.contains_key(*k)));
        return Err(Error::IdMismatch(format!("first differing id: {missing:?}")));
    }
    Ok((estimates.values().copied().collect(), truths.values().copied().collect()))
}

fn sign(a: f64, b: f64) -> i8 {
    match a.partial_cmp(&b) {
        Some(Ordering::Greater) => 1,
        Some(Ordering::Less) => -1,
        _ => 0,
    }
}

/// Pair counts behind the rank statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in the estimates only.
    pub ties_estimate: u64,
    /// Tied in the truths only.
    pub ties_truth: u64,
    pub ties_both: u64,
}

pub fn pair_counts(estimates: &[f64], truths: &[f64]) -> PairCounts {
    let mut c = PairCounts::default();
    let n = estimates.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let se = sign(estimates[i], estimates[j]);
            let st = sign(truths[i], truths[j]);
            match (se, st) {
                (0, 0) => c.ties_both += 1,
                (0, _) => c.ties_estimate += 1,
                (_, 0) => c.ties_truth += 1,
                _ if se == st => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// Tie-corrected Kendall's tau-b. `None` when either side is entirely tied.
pub fn kendall_tau(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    check_aligned(estimates, truths, 2)?;
    let c = pair_counts(estimates, truths);
    let cd = (c.concordant + c.discordant) as f64;
    let denom = ((cd + c.ties_estimate as f64) * (cd + c.ties_truth as f64)).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((c.concordant as f64 - c.discordant as f64) / denom))
}

pub fn mae(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_aligned(estimates, truths, 1)?;
    let total: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).abs()).sum();
    Ok(total / estimates.len() as f64)
}

/// Fraction of pairs (untied in truth) whose estimated order matches the
/// true order. Pairs tied only in the estimate count as wrong. `None` when
/// every truth pair is tied.
pub fn pairwise_accuracy(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    check_aligned(estimates, truths, 2)?;
    let c = pair_counts(estimates, truths);
    let total = c.concordant + c.discordant + c.ties_estimate;
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(c.concordant as f64 / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// `None` when the sample has zero variance.
    pub z: Option<f64>,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Standard normal upper tail `1 - Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// One-sided Z-test of H1: mean difference > 0.
///
/// A zero-variance sample gives p = 0 for a positive mean and p = 1
/// otherwise, flagged as degenerate.
pub fn one_sided_z_test(diffs: &[f64]) -> Result<ZTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::out_of_range("trial count", n, ">= 2"));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    // An all-equal sample can still yield a tiny nonzero sd through rounding in the mean.
    let constant = diffs.iter().all(|&d| d == diffs[0]);
    let sd = if constant { 0.0 } else { var.sqrt() };
    if sd == 0.0 {
        return Ok(ZTest {
            n,
            mean,
            sd,
            z: None,
            p_value: if mean > 0.0 { 0.0 } else { 1.0 },
            degenerate: true,
        });
    }
    let z = mean / (sd / (n as f64).sqrt());
    Ok(ZTest {
        n,
        mean,
        sd,
        z: Some(z),
        p_value: normal_sf(z),
        degenerate: false,
    })
}
