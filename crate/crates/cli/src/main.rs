use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tailored_bench::baselines::{anchor_points_baseline, random_baseline, BaselineMethod};
use tailored_bench::estimation::{estimate_calibrated, estimate_weighted, PerformanceEstimate};
use tailored_bench::gset::{build_gset, CoresetRecord};
use tailored_bench::harness::{
    run_experiment, sweep, ExperimentConfig, Method, NativeOverride, SweepAxis, SweepValue, TargetOracle,
};
use tailored_bench::matrix::{CorrectnessMatrix, MatrixFormat, MatrixKind, ModelSplit};
use tailored_bench::metrics::{align_by_id, kendall_tau, mae, pairwise_accuracy};
use tailored_bench::native::{adaptive_selection, embed_models_on_gset, select_ranked_range, NativeMode, NativeSelection};
use tailored_bench::nset::{build_nset, NSetRecord};
use tailored_bench::seed::{derive, derive_index};
use tailored_bench::synthetic::{generate_population, PopulationSpec};
use tailored_bench::{Error, Metric};

#[derive(Parser)]
#[command(name = "tailored-bench", version, about = "Target-tailored coreset selection for model benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Continuous,
    Binary,
}

impl From<KindArg> for MatrixKind {
    fn from(value: KindArg) -> Self {
        match value {
            KindArg::Continuous => MatrixKind::Continuous,
            KindArg::Binary => MatrixKind::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Calibrated,
    Weighted,
}

/// Flags shared by every subcommand. Anything given here overrides the `--config` file.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (JSON, keys as in the report's `config` echo)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Correctness matrix (.csv or .json)
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    source_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    source_ids: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    target_ids: Option<Vec<String>>,
    /// Base seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.matrix {
            cfg.matrix_path = Some(p.clone());
        }
        if let Some(k) = self.kind {
            cfg.matrix_kind = Some(k.into());
        }
        if let Some(f) = self.source_fraction {
            cfg.source_fraction = f;
        }
        if self.source_ids.is_some() || self.target_ids.is_some() {
            cfg.source_ids = self.source_ids.clone();
            cfg.target_ids = self.target_ids.clone();
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(m) = self.metric {
            cfg.metric = m;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        Ok(cfg)
    }

    fn load(&self) -> Result<(ExperimentConfig, CorrectnessMatrix)> {
        let cfg = self.config()?;
        let matrix = cfg.load_matrix()?;
        Ok((cfg, matrix))
    }
}

/// Experiment flags for `run` and `sweep`.
#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    gset_size: Option<usize>,
    #[arg(long)]
    native_mode: Option<NativeMode>,
    /// Let the probe medoids move during N-set refinement
    #[arg(long)]
    unfixed_gset: bool,
    #[arg(long)]
    resplit_per_trial: bool,
    /// Leave per-target estimates out of the per-trial records
    #[arg(long)]
    no_estimates: bool,
}

impl RunArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(b) = &self.budgets {
            cfg.budgets = b.clone();
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(g) = self.gset_size {
            cfg.gset_size = g;
        }
        if let Some(m) = self.native_mode {
            cfg.native_mode = m;
        }
        if self.unfixed_gset {
            cfg.fixed_gset = false;
        }
        if self.resplit_per_trial {
            cfg.resplit_per_trial = true;
        }
        if self.no_estimates {
            cfg.record_estimates = false;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a matrix (and config, if given) and print a summary
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic model population
    Synth {
        #[arg(long)]
        families: Option<usize>,
        #[arg(long)]
        models_per_family: Option<usize>,
        #[arg(long)]
        examples: Option<usize>,
        #[arg(long)]
        ability_spread: Option<f64>,
        #[arg(long)]
        difficulty_spread: Option<f64>,
        #[arg(long)]
        family_effect_scale: Option<f64>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Matrix output (.csv or .json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the global probe set over all source models
    Gset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        /// Trial index whose seeds to use
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Pick native source models for every target from a probe set
    SelectNative {
        #[command(flatten)]
        common: Common,
        /// Output of `gset`
        #[arg(long)]
        gset: PathBuf,
        #[arg(long)]
        mode: Option<NativeMode>,
        /// Force the N most consistent sources
        #[arg(long, conflicts_with = "band")]
        native_count: Option<usize>,
        /// Force a percentile band of the consistency ranking, e.g. 0-20
        #[arg(long)]
        band: Option<String>,
    },
    /// Build per-target coresets
    Nset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gset: PathBuf,
        /// Output of `select-native`
        #[arg(long)]
        selection: PathBuf,
        /// Targets to build for; all targets when omitted
        #[arg(long, value_delimiter = ',')]
        target: Option<Vec<String>>,
        /// Total coreset size (the inference budget)
        #[arg(long)]
        size: usize,
        #[arg(long)]
        unfixed_gset: bool,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Estimate target accuracy from per-target coresets
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Output of `nset`
        #[arg(long)]
        nsets: PathBuf,
        #[arg(long, value_enum, default_value = "calibrated")]
        method: EstimatorArg,
        /// Keep per-example calibrated values in the output
        #[arg(long)]
        per_example: bool,
    },
    /// Run a reference estimator
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: BaselineMethod,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run a full experiment and write the aggregate report
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Also write per-(method, budget) means as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run one experiment per value of a swept setting
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; bands as LO-HI percent
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
struct GsetOutput {
    trial: usize,
    trial_seed: u64,
    split: ModelSplit,
    gset: CoresetRecord,
}

#[derive(Serialize)]
struct EstimateOutput {
    estimates: Vec<PerformanceEstimate>,
    truths: BTreeMap<String, f64>,
    mae: f64,
    kendall_tau: Option<f64>,
    pairwise_accuracy: Option<f64>,
}

impl EstimateOutput {
    fn new(matrix: &CorrectnessMatrix, estimates: Vec<PerformanceEstimate>) -> Result<Self> {
        let truths: BTreeMap<String, f64> = estimates
            .iter()
            .map(|e| Ok((e.target_id.clone(), matrix.true_performance(&e.target_id)?)))
            .collect::<Result<_>>()?;
        let by_id: BTreeMap<String, f64> = estimates.iter().map(|e| (e.target_id.clone(), e.estimate)).collect();
        let (est, tru) = align_by_id(&by_id, &truths)?;
        let ranked = est.len() >= 2;
        Ok(Self {
            mae: mae(&est, &tru)?,
            kendall_tau: if ranked { kendall_tau(&est, &tru)? } else { None },
            pairwise_accuracy: if ranked { pairwise_accuracy(&est, &tru)? } else { None },
            estimates,
            truths,
        })
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_index(cfg.base_seed, trial as u64)
}

fn cmd_validate(common: &Common) -> Result<()> {
    let (cfg, matrix) = common.load()?;
    if common.config.is_some() {
        cfg.validate(&matrix)?;
    }
    let split = cfg.split(&matrix)?;
    write_json(
        common.out.as_deref(),
        &serde_json::json!({
            "n_models": matrix.n_models(),
            "n_examples": matrix.n_examples(),
            "kind": matrix.kind(),
            "n_sources": split.source_ids.len(),
            "n_targets": split.target_ids.len(),
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    families: Option<usize>,
    models_per_family: Option<usize>,
    examples: Option<usize>,
    ability_spread: Option<f64>,
    difficulty_spread: Option<f64>,
    family_effect_scale: Option<f64>,
    noise_scale: Option<f64>,
    kind: Option<KindArg>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let d = PopulationSpec::default();
    let spec = PopulationSpec {
        families: families.unwrap_or(d.families),
        models_per_family: models_per_family.unwrap_or(d.models_per_family),
        examples: examples.unwrap_or(d.examples),
        ability_spread: ability_spread.unwrap_or(d.ability_spread),
        difficulty_spread: difficulty_spread.unwrap_or(d.difficulty_spread),
        family_effect_scale: family_effect_scale.unwrap_or(d.family_effect_scale),
        noise_scale: noise_scale.unwrap_or(d.noise_scale),
        kind: kind.map(Into::into).unwrap_or(d.kind),
        seed: seed.unwrap_or(d.seed),
    };
    let matrix = generate_population(&spec)?;
    matrix.save(out, MatrixFormat::from_path(out))?;
    eprintln!(
        "wrote {} models x {} examples to {}",
        matrix.n_models(),
        matrix.n_examples(),
        out.display()
    );
    Ok(())
}

fn cmd_gset(common: &Common, k: Option<usize>, trial: usize) -> Result<()> {
    let (cfg, matrix) = common.load()?;
    let split = cfg.split(&matrix)?;
    let seed = trial_seed(&cfg, trial);
    let k = k.unwrap_or(cfg.gset_size);
    let coreset = build_gset(&matrix, &split, k, cfg.metric, derive(seed, "gset"), cfg.max_iter)?;
    write_json(
        common.out.as_deref(),
        &GsetOutput {
            trial,
            trial_seed: seed,
            split,
            gset: CoresetRecord::from_coreset(&coreset, &matrix),
        },
    )
}

fn parse_band(s: &str) -> Result<NativeOverride> {
    match SweepValue::parse(SweepAxis::NativeConsistencyBand, s)? {
        SweepValue::Band { lower_pct, upper_pct } => Ok(NativeOverride::Band {
            lower: lower_pct / 100.0,
            upper: upper_pct / 100.0,
        }),
        SweepValue::Size(_) => bail!("band must look like LO-HI"),
    }
}

fn cmd_select_native(
    common: &Common,
    gset_path: &Path,
    mode: Option<NativeMode>,
    native_count: Option<usize>,
    band: Option<&str>,
) -> Result<()> {
    let (cfg, matrix) = common.load()?;
    let g: GsetOutput = read_json(gset_path)?;
    let gset = g.gset.to_coreset(&matrix)?;
    let sources = embed_models_on_gset(&matrix, &gset, &g.split.source_ids)?;
    // Target rows are only read on the probe examples.
    let targets = g
        .split
        .target_ids
        .iter()
        .map(|id| {
            let mut oracle = TargetOracle::new(&matrix, id)?;
            Ok(tailored_bench::native::ModelEmbedding {
                model_id: id.clone(),
                vector: gset.medoid_indices.iter().map(|&k| oracle.query(k)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let forced = match (native_count, band) {
        (Some(count), _) => Some(NativeOverride::Count { count }),
        (None, Some(b)) => Some(parse_band(b)?),
        (None, None) => None,
    };
    let selection = match forced {
        None => adaptive_selection(&sources, &targets, cfg.metric, mode.unwrap_or(cfg.native_mode))?,
        Some(o) => {
            let (start, end) = o.range(sources.len())?;
            select_ranked_range(&sources, &targets, cfg.metric, start, end)?
        }
    };
    write_json(common.out.as_deref(), &selection)
}

fn cmd_nset(
    common: &Common,
    gset_path: &Path,
    selection_path: &Path,
    targets: Option<&[String]>,
    size: usize,
    unfixed_gset: bool,
    trial: usize,
) -> Result<()> {
    let (cfg, matrix) = common.load()?;
    let g: GsetOutput = read_json(gset_path)?;
    let gset = g.gset.to_coreset(&matrix)?;
    let selection: NativeSelection = read_json(selection_path)?;
    let seed = trial_seed(&cfg, trial);
    let ids: Vec<String> = match targets {
        Some(t) => t.to_vec(),
        None => selection.per_target.keys().cloned().collect(),
    };
    let records = ids
        .iter()
        .map(|id| {
            let nset = build_nset(
                &matrix,
                &gset,
                &selection,
                id,
                size,
                cfg.metric,
                derive(seed, id),
                cfg.max_iter,
                !unfixed_gset,
            )?;
            Ok(NSetRecord::from_result(&nset, &matrix))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(common.out.as_deref(), &records)
}

fn cmd_estimate(common: &Common, nsets_path: &Path, method: EstimatorArg, per_example: bool) -> Result<()> {
    let (_, matrix) = common.load()?;
    let records: Vec<NSetRecord> = read_json(nsets_path)?;
    let estimates = records
        .iter()
        .map(|r| {
            let nset = r.to_result(&matrix)?;
            let mut oracle = TargetOracle::new(&matrix, &nset.target_id)?;
            for &k in &nset.gset_indices {
                oracle.query(k);
            }
            let predictions: BTreeMap<usize, f64> = nset
                .coreset
                .medoid_indices
                .iter()
                .map(|&k| (k, oracle.query(k)))
                .collect();
            let mut e = match method {
                EstimatorArg::Calibrated => estimate_calibrated(&matrix, &nset, &predictions)?,
                EstimatorArg::Weighted => estimate_weighted(&nset.target_id, &nset.coreset, &predictions)?,
            };
            e.inference_count = oracle.inference_count();
            if !per_example {
                e.per_example = None;
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(common.out.as_deref(), &EstimateOutput::new(&matrix, estimates)?)
}

fn cmd_baseline(common: &Common, method: BaselineMethod, budget: usize, trial: usize) -> Result<()> {
    let (cfg, matrix) = common.load()?;
    let split = cfg.split(&matrix)?;
    let seed = trial_seed(&cfg, trial);
    let estimates = match method {
        BaselineMethod::Random => random_baseline(&matrix, &split, budget, derive(seed, "random"))?,
        BaselineMethod::AnchorPoints => anchor_points_baseline(
            &matrix,
            &split,
            budget,
            cfg.anchor_points_metric,
            derive(seed, "anchor_points"),
            cfg.max_iter,
        )?,
    };
    write_json(common.out.as_deref(), &EstimateOutput::new(&matrix, estimates)?)
}

fn cmd_run(common: &Common, args: &RunArgs, csv: Option<&Path>) -> Result<()> {
    let (mut cfg, matrix) = common.load()?;
    args.apply(&mut cfg);
    let report = run_experiment(&cfg, &matrix)?;
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    for row in &report.rows {
        eprintln!(
            "{:<22} budget {:>4}  tau {}  mae {}",
            row.method.name(),
            row.budget,
            fmt_opt(row.kendall_tau.mean),
            fmt_opt(row.mae.mean)
        );
    }
    write_json(common.out.as_deref(), &report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "  n/a ".to_string(), |x| format!("{x:.4}"))
}

fn cmd_sweep(common: &Common, args: &RunArgs, axis: SweepAxis, values: &[String]) -> Result<()> {
    let (mut cfg, matrix) = common.load()?;
    args.apply(&mut cfg);
    let values = values
        .iter()
        .map(|v| SweepValue::parse(axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let points = sweep(&cfg, &matrix, axis, &values)?;
    write_json(common.out.as_deref(), &points)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { common } => cmd_validate(&common),
        Command::Synth {
            families,
            models_per_family,
            examples,
            ability_spread,
            difficulty_spread,
            family_effect_scale,
            noise_scale,
            kind,
            seed,
            out,
        } => cmd_synth(
            families,
            models_per_family,
            examples,
            ability_spread,
            difficulty_spread,
            family_effect_scale,
            noise_scale,
            kind,
            seed,
            &out,
        ),
        Command::Gset { common, k, trial } => cmd_gset(&common, k, trial),
        Command::SelectNative {
            common,
            gset,
            mode,
            native_count,
            band,
        } => cmd_select_native(&common, &gset, mode, native_count, band.as_deref()),
        Command::Nset {
            common,
            gset,
            selection,
            target,
            size,
            unfixed_gset,
            trial,
        } => cmd_nset(&common, &gset, &selection, target.as_deref(), size, unfixed_gset, trial),
        Command::Estimate {
            common,
            nsets,
            method,
            per_example,
        } => cmd_estimate(&common, &nsets, method, per_example),
        Command::Baseline {
            common,
            method,
            budget,
            trial,
        } => cmd_baseline(&common, method, budget, trial),
        Command::Run { common, run, csv } => cmd_run(&common, &run, csv.as_deref()),
        Command::Sweep {
            common,
            run,
            axis,
            values,
        } => cmd_sweep(&common, &run, axis, &values),
    }
}

/// Library validation failures exit with 2; I/O and everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err
        .chain()
        .filter_map(|e| e.downcast_ref::<Error>())
        .any(|e| !matches!(e, Error::Io { .. }));
    if validation {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
