//! Distances between correctness vectors.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Manhattan,
    Cosine,
    Correlation,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
            Metric::Correlation => "correlation",
        }
    }

    /// Checked distance between two vectors.
    pub fn distance(self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: v.len(),
            });
        }
        if u.is_empty() {
            return Err(Error::out_of_range("vector dimension", 0, ">= 1"));
        }
        Ok(self.eval(u, v))
    }

    /// Unchecked distance for hot loops; callers guarantee equal, non-zero length.
    #[inline]
    pub(crate) fn eval(self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self {
            Metric::Manhattan => manhattan(u, v),
            Metric::Cosine => cosine(u, v),
            Metric::Correlation => correlation(u, v),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "manhattan" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            "correlation" => Ok(Metric::Correlation),
            _ => Err(Error::out_of_range("metric", s, "manhattan|cosine|correlation")),
        }
    }
}

#[inline]
fn manhattan(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()
}

fn is_constant(u: &[f64]) -> bool {
    u.iter().all(|&x| x == u[0])
}

// Degenerate inputs: 0 when the vectors are equal, 1 otherwise.
fn degenerate(u: &[f64], v: &[f64]) -> f64 {
    if u == v {
        0.0
    } else {
        1.0
    }
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return degenerate(u, v);
    }
    if u == v {
        return 0.0;
    }
    (1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0)
}

fn correlation(u: &[f64], v: &[f64]) -> f64 {
    if is_constant(u) || is_constant(v) {
        return degenerate(u, v);
    }
    if u == v {
        return 0.0;
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut cov, mut su, mut sv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        cov += da * db;
        su += da * da;
        sv += db * db;
    }
    if su == 0.0 || sv == 0.0 {
        return degenerate(u, v);
    }
    (1.0 - cov / (su.sqrt() * sv.sqrt())).clamp(0.0, 2.0)
}

/// Full symmetric distance matrix with a zero diagonal.
pub fn pairwise_distances(metric: Metric, vectors: &[&[f64]]) -> Result<Array2<f64>> {
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    left: first.len(),
                    right: v.len(),
                });
            }
        }
        if first.is_empty() {
            return Err(Error::out_of_range("vector dimension", 0, ">= 1"));
        }
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.eval(vectors[i], vectors[j]);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    Ok(out)
}
