//! Alternating K-Medoids with optional anchored (fixed) medoids.
//!
//! One engine serves both the global probe set and the per-target
//! extension: seed the medoids, then alternate nearest-medoid assignment
//! with a per-cluster medoid update until the medoid list stops changing
//! or the iteration budget runs out. Anchored medoids are never updated.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::matrix::ExamplesEmbedding;

pub const DEFAULT_MAX_ITER: usize = 100;

// Above this cluster size the Manhattan medoid update uses sorted prefix sums.
const FAST_MANHATTAN_MIN_CLUSTER: usize = 64;

/// A clustering of the embedded examples around a set of medoids.
///
/// Indices are embedding rows; for full-benchmark embeddings these equal
/// matrix example indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coreset {
    pub medoid_indices: Vec<usize>,
    pub anchored: Vec<bool>,
    /// For each example, the position in `medoid_indices` of its medoid.
    pub assignment: Vec<usize>,
    /// Sum over non-medoid examples of the distance to their medoid.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Medoids and objective after each assignment step, starting with the initialization.
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub medoids: Vec<usize>,
    pub objective: f64,
}

impl Coreset {
    pub fn k(&self) -> usize {
        self.medoid_indices.len()
    }

    pub fn n_examples(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &p in &self.assignment {
            sizes[p] += 1;
        }
        sizes
    }

    /// Medoid example index of each example's cluster.
    pub fn medoid_of(&self, example: usize) -> usize {
        self.medoid_indices[self.assignment[example]]
    }

    pub fn is_medoid(&self, example: usize) -> bool {
        self.medoid_indices[self.assignment[example]] == example
    }
}

/// Seeded medoid initialization: `anchors` first, then `total_k - |anchors|`
/// distinct non-anchor examples drawn uniformly without replacement.
pub fn seeded_initialization(
    n_examples: usize,
    anchors: &[usize],
    total_k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    validate_anchors(n_examples, anchors, total_k)?;
    let mut is_anchor = vec![false; n_examples];
    for &a in anchors {
        is_anchor[a] = true;
    }
    let candidates: Vec<usize> = (0..n_examples).filter(|&k| !is_anchor[k]).collect();
    let extra = total_k - anchors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = anchors.to_vec();
    medoids.extend(
        index::sample(&mut rng, candidates.len(), extra)
            .into_iter()
            .map(|i| candidates[i]),
    );
    Ok(medoids)
}

fn validate_anchors(n_examples: usize, anchors: &[usize], total_k: usize) -> Result<()> {
    if total_k == 0 || total_k > n_examples {
        return Err(Error::out_of_range("k", total_k, format!("[1, {n_examples}]")));
    }
    if anchors.len() > total_k {
        return Err(Error::out_of_range(
            "anchor count",
            anchors.len(),
            format!("<= k = {total_k}"),
        ));
    }
    let mut seen = vec![false; n_examples];
    for &a in anchors {
        if a >= n_examples {
            return Err(Error::out_of_range("anchor index", a, format!("< {n_examples}")));
        }
        if std::mem::replace(&mut seen[a], true) {
            return Err(Error::InvalidConfig(format!("anchor {a} listed twice")));
        }
    }
    Ok(())
}

/// Anchored K-Medoids: anchors stay fixed, the remaining medoids are seeded
/// at random and refined.
pub fn scalable_kmedoids(
    embedding: &ExamplesEmbedding,
    anchors: &[usize],
    total_k: usize,
    metric: Metric,
    seed: u64,
    max_iter: usize,
) -> Result<Coreset> {
    let initial = seeded_initialization(embedding.len(), anchors, total_k, seed)?;
    let fixed: Vec<bool> = (0..total_k).map(|p| p < anchors.len()).collect();
    alternate(embedding, initial, fixed, metric, max_iter)
}

/// Runs assignment/refinement from explicit initial medoids.
///
/// `fixed[p]` marks medoid position `p` as anchored.
pub fn alternate(
    embedding: &ExamplesEmbedding,
    initial: Vec<usize>,
    fixed: Vec<bool>,
    metric: Metric,
    max_iter: usize,
) -> Result<Coreset> {
    let n = embedding.len();
    validate_anchors(n, &initial, initial.len())?;
    if fixed.len() != initial.len() {
        return Err(Error::DimensionMismatch {
            left: fixed.len(),
            right: initial.len(),
        });
    }
    if embedding.dim() == 0 {
        return Err(Error::out_of_range("embedding dimension", 0, ">= 1"));
    }

    let mut medoids = initial;
    let mut slot_of = vec![usize::MAX; n];
    let mut assignment = vec![0usize; n];
    let mut objective = assign(embedding, metric, &medoids, &mut slot_of, &mut assignment);
    let mut trace = vec![IterationRecord {
        medoids: medoids.clone(),
        objective,
    }];
    let mut iterations = 0;
    let mut converged = false;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); medoids.len()];

    while iterations < max_iter {
        iterations += 1;
        for m in members.iter_mut() {
            m.clear();
        }
        for (k, &p) in assignment.iter().enumerate() {
            members[p].push(k);
        }
        let mut updated = medoids.clone();
        for (p, cluster) in members.iter().enumerate() {
            if fixed[p] || cluster.len() <= 1 {
                continue;
            }
            updated[p] = best_medoid(embedding, metric, cluster);
        }
        if updated == medoids {
            converged = true;
            break;
        }
        medoids = updated;
        objective = assign(embedding, metric, &medoids, &mut slot_of, &mut assignment);
        trace.push(IterationRecord {
            medoids: medoids.clone(),
            objective,
        });
    }

    Ok(Coreset {
        anchored: fixed,
        medoid_indices: medoids,
        assignment,
        objective,
        iterations,
        converged,
        trace,
    })
}

/// Nearest-medoid assignment; medoids own themselves, other ties go to the
/// smallest medoid position. Returns the objective.
fn assign(
    embedding: &ExamplesEmbedding,
    metric: Metric,
    medoids: &[usize],
    slot_of: &mut [usize],
    assignment: &mut [usize],
) -> f64 {
    slot_of.fill(usize::MAX);
    for (p, &m) in medoids.iter().enumerate() {
        slot_of[m] = p;
    }
    let medoid_vectors: Vec<&[f64]> = medoids.iter().map(|&m| embedding.vector(m)).collect();
    let mut objective = 0.0;
    for k in 0..embedding.len() {
        if slot_of[k] != usize::MAX {
            assignment[k] = slot_of[k];
            continue;
        }
        let x = embedding.vector(k);
        let mut best = (0, f64::INFINITY);
        for (p, mv) in medoid_vectors.iter().enumerate() {
            let d = metric.eval(x, mv);
            if d < best.1 {
                best = (p, d);
            }
        }
        assignment[k] = best.0;
        objective += best.1;
    }
    objective
}

/// Member minimizing total distance to the rest of the cluster; ties go to
/// the smallest example index. `cluster` is in ascending example order.
fn best_medoid(embedding: &ExamplesEmbedding, metric: Metric, cluster: &[usize]) -> usize {
    let costs = if metric == Metric::Manhattan && cluster.len() >= FAST_MANHATTAN_MIN_CLUSTER {
        manhattan_costs_sorted(embedding, cluster)
    } else {
        cluster_costs(embedding, metric, cluster)
    };
    let mut best = (cluster[0], costs[0]);
    for (&k, &c) in cluster.iter().zip(&costs).skip(1) {
        if c < best.1 {
            best = (k, c);
        }
    }
    best.0
}

/// Total distance from each member to every other member.
pub(crate) fn cluster_costs(embedding: &ExamplesEmbedding, metric: Metric, cluster: &[usize]) -> Vec<f64> {
    let m = cluster.len();
    let mut costs = vec![0.0; m];
    for i in 0..m {
        let xi = embedding.vector(cluster[i]);
        for j in (i + 1)..m {
            let d = metric.eval(xi, embedding.vector(cluster[j]));
            costs[i] += d;
            costs[j] += d;
        }
    }
    costs
}

// Per dimension, the summed absolute deviation of each member from all
// others follows from a sort and prefix sums: O(d * m log m) instead of O(d * m^2).
fn manhattan_costs_sorted(embedding: &ExamplesEmbedding, cluster: &[usize]) -> Vec<f64> {
    let m = cluster.len();
    let mut costs = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut values = vec![0.0; m];
    let mut prefix = vec![0.0; m + 1];
    for d in 0..embedding.dim() {
        for (i, &k) in cluster.iter().enumerate() {
            values[i] = embedding.vectors[[k, d]];
        }
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        for (r, &i) in order.iter().enumerate() {
            prefix[r + 1] = prefix[r] + values[i];
        }
        let total = prefix[m];
        for (r, &i) in order.iter().enumerate() {
            let v = values[i];
            let below = v * r as f64 - prefix[r];
            let above = (total - prefix[r + 1]) - v * (m - 1 - r) as f64;
            costs[i] += below + above;
        }
    }
    costs
}
