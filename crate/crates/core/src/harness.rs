//! Seeded experiments: trials, methods, budgets, ablation toggles and reports.
//!
//! The source/target split is fixed once per experiment (unless
//! `resplit_per_trial` is set); each trial derives its own seed from the
//! base seed and trial index, and every clustering inside the trial derives
//! from that. Target predictions are only ever read through a
//! [`TargetOracle`], which records every example a target was queried on,
//! so the reported inference counts are the counts actually consumed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{anchor_points_coreset, random_estimate, random_subset, ANCHOR_POINTS_METRIC};
use crate::cluster::{Coreset, DEFAULT_MAX_ITER};
use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::estimation::{estimate_calibrated, estimate_weighted};
use crate::gset::{build_gset, DEFAULT_GSET_SIZE};
use crate::matrix::{split_models, CorrectnessMatrix, MatrixFormat, MatrixKind, ModelSplit};
use crate::metrics::{kendall_tau, mae, one_sided_z_test, pairwise_accuracy};
use crate::native::{
    adaptive_selection, embed_models_on_gset, select_ranked_range, ModelEmbedding, NativeMode,
    NativeSelection,
};
use crate::nset::build_nset;
use crate::seed::{derive, derive_index};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tailored,
    TailoredUncalibrated,
    AnchorPoints,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Tailored,
        Method::TailoredUncalibrated,
        Method::AnchorPoints,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tailored => "tailored",
            Method::TailoredUncalibrated => "tailored_uncalibrated",
            Method::AnchorPoints => "anchor_points",
            Method::Random => "random",
        }
    }

    fn is_tailored(self) -> bool {
        matches!(self, Method::Tailored | Method::TailoredUncalibrated)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == normalized)
            .ok_or_else(|| {
                Error::out_of_range(
                    "method",
                    s,
                    "tailored|tailored_uncalibrated|anchor_points|random",
                )
            })
    }
}

/// Replaces the adaptive native-source choice with a fixed slice of each
/// target's consistency ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NativeOverride {
    /// The `count` most consistent sources.
    Count { count: usize },
    /// Sources whose ranking position falls in `[lower, upper)`, as fractions of the source count.
    Band { lower: f64, upper: f64 },
}

impl NativeOverride {
    /// Ranking positions `start..end` this override selects among `n_sources`.
    pub fn range(&self, n_sources: usize) -> Result<(usize, usize)> {
        let (start, end) = match *self {
            NativeOverride::Count { count } => (0, count),
            NativeOverride::Band { lower, upper } => {
                if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower >= upper {
                    return Err(Error::out_of_range(
                        "consistency band",
                        format!("{lower}-{upper}"),
                        "0 <= lower < upper <= 1",
                    ));
                }
                let n = n_sources as f64;
                ((lower * n).round() as usize, (upper * n).round() as usize)
            }
        };
        if start >= end || end > n_sources {
            return Err(Error::out_of_range(
                "native source range",
                format!("{start}..{end}"),
                format!("non-empty within 0..{n_sources}"),
            ));
        }
        Ok((start, end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub matrix_path: Option<PathBuf>,
    pub matrix_kind: Option<MatrixKind>,
    pub source_fraction: f64,
    pub source_ids: Option<Vec<String>>,
    pub target_ids: Option<Vec<String>>,
    pub gset_size: usize,
    pub budgets: Vec<usize>,
    pub metric: Metric,
    pub anchor_points_metric: Metric,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub native_mode: NativeMode,
    pub native_override: Option<NativeOverride>,
    pub fixed_gset: bool,
    pub max_iter: usize,
    pub resplit_per_trial: bool,
    /// Keep per-target estimates in the per-trial records.
    pub record_estimates: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            matrix_path: None,
            matrix_kind: None,
            source_fraction: 0.5,
            source_ids: None,
            target_ids: None,
            gset_size: DEFAULT_GSET_SIZE,
            budgets: vec![20, 25, 30, 35, 40],
            metric: Metric::Manhattan,
            anchor_points_metric: ANCHOR_POINTS_METRIC,
            methods: Method::ALL.to_vec(),
            trials: 100,
            base_seed: 0,
            native_mode: NativeMode::Standardized,
            native_override: None,
            fixed_gset: true,
            max_iter: DEFAULT_MAX_ITER,
            resplit_per_trial: false,
            record_estimates: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn uses_tailored(&self) -> bool {
        self.methods.iter().any(|m| m.is_tailored())
    }

    /// Checks the config against the matrix it will run on.
    pub fn validate(&self, matrix: &CorrectnessMatrix) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return invalid("trials must be >= 1".into());
        }
        if self.methods.is_empty() {
            return invalid("no methods enabled".into());
        }
        if self.budgets.is_empty() {
            return invalid("no budgets given".into());
        }
        let n = matrix.n_examples();
        if self.gset_size == 0 || self.gset_size > n {
            return invalid(format!("gset_size {} outside [1, {n}]", self.gset_size));
        }
        for &b in &self.budgets {
            if b == 0 || b > n {
                return invalid(format!("budget {b} outside [1, {n}]"));
            }
            if self.uses_tailored() && b < self.gset_size {
                return invalid(format!(
                    "budget {b} is smaller than gset_size {} with tailored methods enabled",
                    self.gset_size
                ));
            }
        }
        if self.source_ids.is_some() != self.target_ids.is_some() {
            return invalid("source_ids and target_ids must be given together".into());
        }
        if self.source_ids.is_none() && !(self.source_fraction > 0.0 && self.source_fraction < 1.0) {
            return invalid(format!("source_fraction {} outside (0, 1)", self.source_fraction));
        }
        if self.resplit_per_trial && self.source_ids.is_some() {
            return invalid("resplit_per_trial conflicts with explicit source/target ids".into());
        }
        Ok(())
    }

    /// The experiment-wide split: explicit ids, or a seeded split derived from `base_seed`.
    pub fn split(&self, matrix: &CorrectnessMatrix) -> Result<ModelSplit> {
        match (&self.source_ids, &self.target_ids) {
            (Some(s), Some(t)) => ModelSplit::new(matrix, s.clone(), t.clone()),
            _ => split_models(matrix, self.source_fraction, derive(self.base_seed, "split")),
        }
    }

    pub fn load_matrix(&self) -> Result<CorrectnessMatrix> {
        let path = self
            .matrix_path
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("matrix_path is not set".into()))?;
        CorrectnessMatrix::load_with_kind(path, MatrixFormat::from_path(path), self.matrix_kind)
    }
}

/// Read-recording access to one target model's correctness row.
#[derive(Debug)]
pub struct TargetOracle<'a> {
    matrix: &'a CorrectnessMatrix,
    row: usize,
    read: BTreeSet<usize>,
}

impl<'a> TargetOracle<'a> {
    pub fn new(matrix: &'a CorrectnessMatrix, target_id: &str) -> Result<Self> {
        Ok(Self {
            matrix,
            row: matrix.model_index(target_id)?,
            read: BTreeSet::new(),
        })
    }

    /// Simulated inference of the target on one example.
    pub fn query(&mut self, example: usize) -> f64 {
        self.read.insert(example);
        self.matrix.get(self.row, example)
    }

    pub fn examples_read(&self) -> &BTreeSet<usize> {
        &self.read
    }

    pub fn inference_count(&self) -> usize {
        self.read.len()
    }

    /// Union of read sets; order of merging never changes the result.
    pub fn merge(&mut self, other: &TargetOracle<'_>) {
        self.read.extend(other.read.iter().copied());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub budget: usize,
    pub kendall_tau: Option<f64>,
    pub mae: f64,
    pub pairwise_accuracy: Option<f64>,
    /// Mean over targets of distinct examples each target was evaluated on.
    pub inference_count: f64,
    pub max_inference_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_index: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<ModelSplit>,
    /// Native-source count chosen in this trial (tailored methods only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<usize>,
    pub results: Vec<MethodResult>,
}

impl TrialReport {
    pub fn result(&self, method: Method, budget: usize) -> Option<&MethodResult> {
        self.results
            .iter()
            .find(|r| r.method == method && r.budget == budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two values.
    pub sd: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: None,
                sd: None,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n >= 2).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        });
        Stat {
            mean: Some(mean),
            sd,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub budget: usize,
    pub kendall_tau: Stat,
    pub mae: Stat,
    pub pairwise_accuracy: Stat,
    pub inference_count: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTestRow {
    pub method: Method,
    pub baseline: Method,
    pub budget: usize,
    /// `kendall_tau` (diff = method - baseline) or `mae` (diff = baseline - method).
    pub metric: String,
    pub n: usize,
    pub mean_diff: Option<f64>,
    pub z: Option<f64>,
    pub z_test_p: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Wall-clock creation time; the only non-deterministic field.
    pub generated_at: String,
    pub config: ExperimentConfig,
    pub n_models: usize,
    pub n_examples: usize,
    pub split: ModelSplit,
    pub rows: Vec<AggregateRow>,
    pub z_tests: Vec<ZTestRow>,
    pub trials: Vec<TrialReport>,
}

impl AggregateReport {
    pub fn row(&self, method: Method, budget: usize) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.budget == budget)
    }

    pub fn z_test(&self, baseline: Method, budget: usize, metric: &str) -> Option<&ZTestRow> {
        self.z_tests
            .iter()
            .find(|z| z.baseline == baseline && z.budget == budget && z.metric == metric)
    }

    /// JSON with the timestamp blanked, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.generated_at = String::new();
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    /// One line per (method, budget) with the mean and sd of each metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,budget,kendall_tau_mean,kendall_tau_sd,mae_mean,mae_sd,pairwise_accuracy_mean,pairwise_accuracy_sd,inference_count_mean\n",
        );
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.budget,
                f(r.kendall_tau.mean),
                f(r.kendall_tau.sd),
                f(r.mae.mean),
                f(r.mae.sd),
                f(r.pairwise_accuracy.mean),
                f(r.pairwise_accuracy.sd),
                f(r.inference_count.mean),
            );
        }
        out
    }
}

/// A configured experiment over one matrix.
#[derive(Debug)]
pub struct Experiment<'a> {
    config: ExperimentConfig,
    matrix: &'a CorrectnessMatrix,
    split: ModelSplit,
}

struct TargetRun {
    estimate: f64,
    inference_count: usize,
}

type RunsById = BTreeMap<String, TargetRun>;

impl<'a> Experiment<'a> {
    pub fn new(config: ExperimentConfig, matrix: &'a CorrectnessMatrix) -> Result<Self> {
        config.validate(matrix)?;
        let split = config.split(matrix)?;
        Ok(Self {
            config,
            matrix,
            split,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn split(&self) -> &ModelSplit {
        &self.split
    }

    pub fn trial_seed(&self, trial_index: usize) -> u64 {
        derive_index(self.config.base_seed, trial_index as u64)
    }

    pub fn run_trial(&self, trial_index: usize) -> Result<TrialReport> {
        let cfg = &self.config;
        let seed = self.trial_seed(trial_index);
        let resplit = if cfg.resplit_per_trial {
            Some(split_models(self.matrix, cfg.source_fraction, derive(seed, "split"))?)
        } else {
            None
        };
        let split = resplit.as_ref().unwrap_or(&self.split);
        let truths: BTreeMap<String, f64> = split
            .target_ids
            .iter()
            .map(|id| Ok((id.clone(), self.matrix.true_performance(id)?)))
            .collect::<Result<_>>()?;

        let mut results = Vec::new();
        let mut n_bar = None;
        let gset = if cfg.uses_tailored() {
            Some(build_gset(
                self.matrix,
                split,
                cfg.gset_size,
                cfg.metric,
                derive(seed, "gset"),
                cfg.max_iter,
            )?)
        } else {
            None
        };

        for &budget in &cfg.budgets {
            let mut per_method: BTreeMap<Method, BTreeMap<String, TargetRun>> = BTreeMap::new();
            if let Some(gset) = &gset {
                let (tailored, uncalibrated, chosen) = self.tailored_runs(split, gset, budget, seed)?;
                n_bar = Some(chosen);
                per_method.insert(Method::Tailored, tailored);
                per_method.insert(Method::TailoredUncalibrated, uncalibrated);
            }
            if cfg.methods.contains(&Method::AnchorPoints) {
                per_method.insert(Method::AnchorPoints, self.anchor_points_runs(split, budget, seed)?);
            }
            if cfg.methods.contains(&Method::Random) {
                per_method.insert(Method::Random, self.random_runs(split, budget, seed)?);
            }
            for &method in &cfg.methods {
                let runs = &per_method[&method];
                results.push(self.score(method, budget, runs, &truths)?);
            }
        }
        Ok(TrialReport {
            trial_index,
            seed,
            split: resplit,
            n_bar,
            results,
        })
    }

    fn score(
        &self,
        method: Method,
        budget: usize,
        runs: &BTreeMap<String, TargetRun>,
        truths: &BTreeMap<String, f64>,
    ) -> Result<MethodResult> {
        let estimates: BTreeMap<String, f64> = runs.iter().map(|(id, r)| (id.clone(), r.estimate)).collect();
        let (est, tru) = crate::metrics::align_by_id(&estimates, truths)?;
        let counts: Vec<usize> = runs.values().map(|r| r.inference_count).collect();
        Ok(MethodResult {
            method,
            budget,
            kendall_tau: if est.len() >= 2 { kendall_tau(&est, &tru)? } else { None },
            mae: mae(&est, &tru)?,
            pairwise_accuracy: if est.len() >= 2 { pairwise_accuracy(&est, &tru)? } else { None },
            inference_count: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
            max_inference_count: counts.iter().copied().max().unwrap_or(0),
            estimates: self.config.record_estimates.then_some(estimates),
        })
    }

    fn probe_selection(
        &self,
        split: &ModelSplit,
        gset: &Coreset,
        targets: &[ModelEmbedding],
    ) -> Result<NativeSelection> {
        let sources = embed_models_on_gset(self.matrix, gset, &split.source_ids)?;
        match self.config.native_override {
            None => adaptive_selection(&sources, targets, self.config.metric, self.config.native_mode),
            Some(o) => {
                let (start, end) = o.range(sources.len())?;
                select_ranked_range(&sources, targets, self.config.metric, start, end)
            }
        }
    }

    /// Calibrated and uncalibrated estimates for every target, sharing one N-set per target.
    fn tailored_runs(
        &self,
        split: &ModelSplit,
        gset: &Coreset,
        budget: usize,
        seed: u64,
    ) -> Result<(RunsById, RunsById, usize)> {
        let cfg = &self.config;
        let mut oracles: Vec<TargetOracle> = split
            .target_ids
            .iter()
            .map(|id| TargetOracle::new(self.matrix, id))
            .collect::<Result<_>>()?;
        let probes: Vec<ModelEmbedding> = split
            .target_ids
            .iter()
            .zip(oracles.iter_mut())
            .map(|(id, oracle)| ModelEmbedding {
                model_id: id.clone(),
                vector: gset.medoid_indices.iter().map(|&k| oracle.query(k)).collect(),
            })
            .collect();
        let selection = self.probe_selection(split, gset, &probes)?;

        let mut calibrated = BTreeMap::new();
        let mut uncalibrated = BTreeMap::new();
        for (id, oracle) in split.target_ids.iter().zip(oracles.iter_mut()) {
            let nset = build_nset(
                self.matrix,
                gset,
                &selection,
                id,
                budget,
                cfg.metric,
                derive(seed, id),
                cfg.max_iter,
                cfg.fixed_gset,
            )?;
            let predictions: BTreeMap<usize, f64> = nset
                .coreset
                .medoid_indices
                .iter()
                .map(|&k| (k, oracle.query(k)))
                .collect();
            let count = oracle.inference_count();
            debug_assert_eq!(count, nset.inference_count());
            let c = estimate_calibrated(self.matrix, &nset, &predictions)?;
            let w = estimate_weighted(id, &nset.coreset, &predictions)?;
            calibrated.insert(
                id.clone(),
                TargetRun {
                    estimate: c.estimate,
                    inference_count: count,
                },
            );
            uncalibrated.insert(
                id.clone(),
                TargetRun {
                    estimate: w.estimate,
                    inference_count: count,
                },
            );
        }
        Ok((calibrated, uncalibrated, selection.n_bar))
    }

    fn anchor_points_runs(&self, split: &ModelSplit, budget: usize, seed: u64) -> Result<RunsById> {
        let coreset = anchor_points_coreset(
            self.matrix,
            split,
            budget,
            self.config.anchor_points_metric,
            derive(seed, "anchor_points"),
            self.config.max_iter,
        )?;
        split
            .target_ids
            .iter()
            .map(|id| {
                let mut oracle = TargetOracle::new(self.matrix, id)?;
                let predictions: BTreeMap<usize, f64> = coreset
                    .medoid_indices
                    .iter()
                    .map(|&k| (k, oracle.query(k)))
                    .collect();
                let e = estimate_weighted(id, &coreset, &predictions)?;
                Ok((
                    id.clone(),
                    TargetRun {
                        estimate: e.estimate,
                        inference_count: oracle.inference_count(),
                    },
                ))
            })
            .collect()
    }

    fn random_runs(&self, split: &ModelSplit, budget: usize, seed: u64) -> Result<RunsById> {
        let subset = random_subset(self.matrix.n_examples(), budget, derive(seed, "random"));
        split
            .target_ids
            .iter()
            .map(|id| {
                let mut oracle = TargetOracle::new(self.matrix, id)?;
                let predictions: Vec<f64> = subset.iter().map(|&k| oracle.query(k)).collect();
                let e = random_estimate(id, &predictions);
                Ok((
                    id.clone(),
                    TargetRun {
                        estimate: e.estimate,
                        inference_count: oracle.inference_count(),
                    },
                ))
            })
            .collect()
    }

    /// Runs every trial (in parallel), then aggregates.
    pub fn run(&self) -> Result<AggregateReport> {
        let trials: Vec<TrialReport> = (0..self.config.trials)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect::<Result<_>>()?;
        Ok(self.aggregate(trials))
    }

    pub fn aggregate(&self, trials: Vec<TrialReport>) -> AggregateReport {
        let cfg = &self.config;
        let mut rows = Vec::new();
        for &method in &cfg.methods {
            for &budget in &cfg.budgets {
                let results: Vec<&MethodResult> = trials.iter().filter_map(|t| t.result(method, budget)).collect();
                rows.push(AggregateRow {
                    method,
                    budget,
                    kendall_tau: Stat::of(&results.iter().filter_map(|r| r.kendall_tau).collect::<Vec<_>>()),
                    mae: Stat::of(&results.iter().map(|r| r.mae).collect::<Vec<_>>()),
                    pairwise_accuracy: Stat::of(
                        &results.iter().filter_map(|r| r.pairwise_accuracy).collect::<Vec<_>>(),
                    ),
                    inference_count: Stat::of(&results.iter().map(|r| r.inference_count).collect::<Vec<_>>()),
                });
            }
        }

        let mut z_tests = Vec::new();
        if cfg.methods.contains(&Method::Tailored) {
            for &baseline in cfg.methods.iter().filter(|&&m| m != Method::Tailored) {
                for &budget in &cfg.budgets {
                    let pairs: Vec<(&MethodResult, &MethodResult)> = trials
                        .iter()
                        .filter_map(|t| Some((t.result(Method::Tailored, budget)?, t.result(baseline, budget)?)))
                        .collect();
                    let tau_diffs: Vec<f64> = pairs
                        .iter()
                        .filter_map(|(a, b)| Some(a.kendall_tau? - b.kendall_tau?))
                        .collect();
                    let mae_diffs: Vec<f64> = pairs.iter().map(|(a, b)| b.mae - a.mae).collect();
                    z_tests.push(z_row(baseline, budget, "kendall_tau", &tau_diffs));
                    z_tests.push(z_row(baseline, budget, "mae", &mae_diffs));
                }
            }
        }

        AggregateReport {
            generated_at: chrono::Utc::now().to_rfc3339(),
            config: cfg.clone(),
            n_models: self.matrix.n_models(),
            n_examples: self.matrix.n_examples(),
            split: self.split.clone(),
            rows,
            z_tests,
            trials,
        }
    }
}

fn z_row(baseline: Method, budget: usize, metric: &str, diffs: &[f64]) -> ZTestRow {
    let test = one_sided_z_test(diffs).ok();
    ZTestRow {
        method: Method::Tailored,
        baseline,
        budget,
        metric: metric.to_string(),
        n: diffs.len(),
        mean_diff: test.map(|t| t.mean),
        z: test.and_then(|t| t.z),
        z_test_p: test.map(|t| t.p_value),
        degenerate: test.is_some_and(|t| t.degenerate),
    }
}

pub fn run_trial(config: &ExperimentConfig, matrix: &CorrectnessMatrix, trial_index: usize) -> Result<TrialReport> {
    Experiment::new(config.clone(), matrix)?.run_trial(trial_index)
}

pub fn run_experiment(config: &ExperimentConfig, matrix: &CorrectnessMatrix) -> Result<AggregateReport> {
    Experiment::new(config.clone(), matrix)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GsetSize,
    NativeCount,
    NativeConsistencyBand,
    Budget,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gset_size" => Ok(SweepAxis::GsetSize),
            "native_count" => Ok(SweepAxis::NativeCount),
            "native_consistency_band" => Ok(SweepAxis::NativeConsistencyBand),
            "budget" => Ok(SweepAxis::Budget),
            _ => Err(Error::out_of_range(
                "sweep axis",
                s,
                "gset_size|native_count|native_consistency_band|budget",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Size(usize),
    /// Percentile band of the consistency ranking, e.g. 0-20 or 80-100.
    Band { lower_pct: f64, upper_pct: f64 },
}

impl SweepValue {
    /// Parses `N` for size axes or `LO-HI` (percent) for the band axis.
    pub fn parse(axis: SweepAxis, s: &str) -> Result<Self> {
        let bad = || Error::out_of_range("sweep value", s, "integer, or LO-HI percent band");
        match axis {
            SweepAxis::NativeConsistencyBand => {
                let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
                let lower_pct: f64 = lo.trim().parse().map_err(|_| bad())?;
                let upper_pct: f64 = hi.trim().parse().map_err(|_| bad())?;
                if !(0.0 <= lower_pct && lower_pct < upper_pct && upper_pct <= 100.0) {
                    return Err(bad());
                }
                Ok(SweepValue::Band { lower_pct, upper_pct })
            }
            _ => Ok(SweepValue::Size(s.trim().parse().map_err(|_| bad())?)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SweepValue::Size(n) => n.to_string(),
            SweepValue::Band { lower_pct, upper_pct } => format!("{lower_pct}-{upper_pct}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: SweepValue,
    pub report: AggregateReport,
}

/// Applies one sweep value to a copy of `base`.
pub fn sweep_config(base: &ExperimentConfig, axis: SweepAxis, value: SweepValue) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match (axis, value) {
        (SweepAxis::GsetSize, SweepValue::Size(n)) => cfg.gset_size = n,
        (SweepAxis::NativeCount, SweepValue::Size(n)) => cfg.native_override = Some(NativeOverride::Count { count: n }),
        (SweepAxis::NativeConsistencyBand, SweepValue::Band { lower_pct, upper_pct }) => {
            cfg.native_override = Some(NativeOverride::Band {
                lower: lower_pct / 100.0,
                upper: upper_pct / 100.0,
            })
        }
        (SweepAxis::Budget, SweepValue::Size(n)) => cfg.budgets = vec![n],
        _ => {
            return Err(Error::InvalidConfig(format!(
                "value {} does not fit axis {axis:?}",
                value.label()
            )))
        }
    }
    Ok(cfg)
}

pub fn sweep(
    base: &ExperimentConfig,
    matrix: &CorrectnessMatrix,
    axis: SweepAxis,
    values: &[SweepValue],
) -> Result<Vec<SweepPoint>> {
    // Validate every point before running any of them.
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let cfg = sweep_config(base, axis, v)?;
            cfg.validate(matrix)?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    configs
        .into_iter()
        .zip(values)
        .map(|(cfg, &value)| {
            Ok(SweepPoint {
                axis,
                value,
                report: run_experiment(&cfg, matrix)?,
            })
        })
        .collect()
}
