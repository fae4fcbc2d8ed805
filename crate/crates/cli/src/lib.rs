//! The `dam` command line: pattern file tools, diagnostics, and the experiment
//! runners. [`dispatch`] is the whole program; `main` only forwards `argv`.
//!
//! Settings resolve as flag, then `--config` file, then default. The master
//! seed additionally honours `DAM_SEED` between the config file and the
//! default. Exit codes: 0 success, 1 usage error, 2 runtime failure.

pub mod config;
pub mod output;
mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use dam_core::adversary::{corrupt_count, AdversaryModel};
use dam_core::diagnostics::{self, contraction_probe, estimate_separation};
use dam_core::dynamics::{retrieve, SweepConfig, UpdateMode};
use dam_core::ensembles::{
    binarize_median, load_patterns, save_patterns, EnsembleKind, EnsembleSpec, PatternFormat,
    DEFAULT_COPY_FRACTION, DEFAULT_COPY_PROB,
};
use dam_core::experiments::{
    adversarial_thresholds, basin_average, basin_boundaries, capacity_scaling, run_experiment,
    CapacitySearchConfig, ExperimentGrid, ExperimentKind, GridAxes, TrialSettings,
};
use dam_core::{DamError, DamRng, ModelParams};

use config::{ConfigFile, Resolver};
use output::{emit, fmt_num, render_capacity, render_records, OutputFormat};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ORDER: u32 = 3;
pub const DEFAULT_TRIALS: usize = 60;
pub const SEED_ENV: &str = "DAM_SEED";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Errors found while validating settings are usage errors, except failures to
/// read or decode input files.
fn invalid(e: DamError) -> CliError {
    match e {
        DamError::Io { .. }
        | DamError::MalformedHeader(_)
        | DamError::InvalidEntry { .. }
        | DamError::Truncated { .. } => CliError::Runtime(e.into()),
        other => CliError::Usage(other.to_string()),
    }
}

fn runtime(e: DamError) -> CliError {
    CliError::Runtime(e.into())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "dam",
    version,
    about = "Dense associative memory retrieval experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a pattern file (random, correlated, or median-binarized vectors).
    Generate(GenerateArgs),
    /// Run one retrieval from a corrupted copy of a stored pattern.
    Retrieve(RetrieveArgs),
    /// Print separation diagnostics and theory thresholds for a pattern file.
    Verify(VerifyArgs),
    /// Sweeps to convergence across N and loading.
    ExpConvergence(ConvergenceArgs),
    /// Success rate over a corruption grid (basin of attraction).
    ExpBasin(BasinArgs),
    /// Success under strong/weak adversaries across the corruption budget ρ.
    ExpAdversarial(AdversarialArgs),
    /// Capacity search and power-law fit of p_max against N.
    ExpCapacity(CapacityArgs),
    /// Asynchronous versus synchronous updates.
    ExpUpdateCompare(UpdateCompareArgs),
    /// Random versus correlated pattern ensembles.
    ExpPatternCompare(PatternCompareArgs),
    /// Retrieval on pattern files, e.g. binarized real data.
    ExpRealdata(RealdataArgs),
    /// Brute-force and exact-identity oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// key = value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (default: $DAM_SEED, else 42).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads for trial fan-out (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or markdown.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Interaction order n.
    #[arg(long)]
    order: Option<u32>,
    /// Matching fraction that counts as retrieval.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long = "max-sweeps")]
    max_sweeps: Option<usize>,
    /// Bootstrap resamples for confidence intervals.
    #[arg(long)]
    resamples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct RangeArgs {
    #[arg(long = "corruption", value_delimiter = ',')]
    corruption: Option<Vec<f64>>,
    #[arg(long = "corruption-min")]
    corruption_min: Option<f64>,
    #[arg(long = "corruption-max")]
    corruption_max: Option<f64>,
    #[arg(long = "corruption-step")]
    corruption_step: Option<f64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Loading p/N^{n-1}; alternative to --p.
    #[arg(long)]
    alpha: Option<f64>,
    /// random or correlated.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long = "copy-prob")]
    copy_prob: Option<f64>,
    #[arg(long = "copy-fraction")]
    copy_fraction: Option<f64>,
    /// Binarize real-valued vectors (one per line) at their median instead.
    #[arg(long = "from-vectors")]
    from_vectors: Option<PathBuf>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
    /// binary or text (default: text for .txt, else binary).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    patterns: PathBuf,
    /// Pattern index (0-based).
    #[arg(long)]
    target: Option<usize>,
    /// Fraction of coordinates flipped in the initial state.
    #[arg(long)]
    corruption: Option<f64>,
    /// Exact number of flipped coordinates; alternative to --corruption.
    #[arg(long)]
    flips: Option<usize>,
    /// async or sync.
    #[arg(long)]
    mode: Option<UpdateMode>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long = "max-sweeps")]
    max_sweeps: Option<usize>,
    /// Print the potential numerator after every sweep.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    patterns: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    target: Option<usize>,
    /// Basin-boundary samples for the separation estimate.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long = "corruption", value_delimiter = ',')]
    corruption: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct BasinArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[command(flatten)]
    range: RangeArgs,
}

#[derive(Args, Debug)]
struct AdversarialArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Initial overlap γ₀ before the first adversary round.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long = "rho-min")]
    rho_min: Option<f64>,
    #[arg(long = "rho-max")]
    rho_max: Option<f64>,
    #[arg(long = "rho-step")]
    rho_step: Option<f64>,
    /// strong, weak, none.
    #[arg(long, value_delimiter = ',')]
    adversary: Option<Vec<AdversaryModel>>,
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Required fraction of converging trials per probe.
    #[arg(long = "pass-fraction")]
    pass_fraction: Option<f64>,
    #[arg(long)]
    corruption: Option<f64>,
    /// Upper end of the search bracket (default ⌈2N^{n-1}/n⌉).
    #[arg(long)]
    upper: Option<usize>,
}

#[derive(Args, Debug)]
struct UpdateCompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Loading n·p/N^{n-1}.
    #[arg(long = "alpha-prime", value_delimiter = ',')]
    alpha_prime: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    m0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mode: Option<Vec<UpdateMode>>,
}

#[derive(Args, Debug)]
struct PatternCompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ensemble: Option<Vec<EnsembleKind>>,
    #[arg(long = "corruption", value_delimiter = ',')]
    corruption: Option<Vec<f64>>,
    #[arg(long = "copy-prob")]
    copy_prob: Option<f64>,
    #[arg(long = "copy-fraction")]
    copy_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct RealdataArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<PathBuf>>,
    #[arg(long = "corruption", value_delimiter = ',')]
    corruption: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long)]
    seed: Option<u64>,
}

/// Runs the program on `argv` (including the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `dam --help` for usage");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Retrieve(args) => retrieve_cmd(args),
        Command::Verify(args) => verify(args),
        Command::ExpConvergence(args) => exp_convergence(args),
        Command::ExpBasin(args) => exp_basin(args),
        Command::ExpAdversarial(args) => exp_adversarial(args),
        Command::ExpCapacity(args) => exp_capacity(args),
        Command::ExpUpdateCompare(args) => exp_update_compare(args),
        Command::ExpPatternCompare(args) => exp_pattern_compare(args),
        Command::ExpRealdata(args) => exp_realdata(args),
        Command::Selftest(args) => selftest_cmd(args),
    }
}

fn resolver(config: &Option<PathBuf>) -> CliResult<Resolver> {
    let file = match config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    Ok(Resolver::new(file))
}

fn resolve_seed(r: &Resolver, flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = r.opt(flag, "seed")? {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn resolve_order(r: &Resolver, flag: Option<u32>) -> CliResult<u32> {
    r.scalar(flag, "order", DEFAULT_ORDER)
}

/// Evenly spaced grid `min, min+step, …, ≤ max`, rounded to kill float drift.
fn range_axis(min: f64, max: f64, step: f64, name: &str) -> CliResult<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || max.is_nan() || min.is_nan() || max < min {
        return Err(CliError::Usage(format!(
            "{name} range needs step > 0 and max ≥ min (got {min}..{max} step {step})"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// A list axis given either explicitly or as a min/max/step range, not both.
fn list_or_range(
    r: &Resolver,
    list: Option<Vec<f64>>,
    (min, max, step): (Option<f64>, Option<f64>, Option<f64>),
    name: &str,
    default_range: (f64, f64, f64),
) -> CliResult<Vec<f64>> {
    let list = r.opt_list(list, name)?;
    let min = r.opt(min, &format!("{name}-min"))?;
    let max = r.opt(max, &format!("{name}-max"))?;
    let step = r.opt(step, &format!("{name}-step"))?;
    let any_range = min.is_some() || max.is_some() || step.is_some();
    match (list, any_range) {
        (Some(_), true) => Err(CliError::Usage(format!(
            "--{name} conflicts with --{name}-min/--{name}-max/--{name}-step"
        ))),
        (Some(list), false) => Ok(list),
        (None, _) => range_axis(
            min.unwrap_or(default_range.0),
            max.unwrap_or(default_range.1),
            step.unwrap_or(default_range.2),
            name,
        ),
    }
}

/// Loadings or explicit counts, which are mutually exclusive.
fn loadings_or_counts(
    r: &Resolver,
    loading_key: &str,
    loadings: Option<Vec<f64>>,
    counts: Option<Vec<usize>>,
    default: Vec<f64>,
) -> CliResult<(Vec<f64>, Vec<usize>)> {
    let loadings = r.opt_list(loadings, loading_key)?;
    let counts = r.opt_list(counts, "p")?;
    match (loadings, counts) {
        (Some(_), Some(_)) => Err(CliError::Usage(format!(
            "--{loading_key} conflicts with --p"
        ))),
        (None, Some(counts)) => Ok((Vec::new(), counts)),
        (loadings, None) => Ok((loadings.unwrap_or(default), Vec::new())),
    }
}

/// Settings shared by every experiment subcommand.
struct RunContext {
    seed: u64,
    trials: usize,
    threads: Option<usize>,
    output: Option<PathBuf>,
    format: OutputFormat,
    order: u32,
    settings: TrialSettings,
}

fn run_context(r: &Resolver, run: &RunArgs, default_trials: usize) -> CliResult<RunContext> {
    let seed = resolve_seed(r, run.seed)?;
    let trials = r.scalar(run.trials, "trials", default_trials)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let threads = r.opt(run.threads, "threads")?;
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let output = r.opt(run.output.clone(), "output")?;
    let format = r.scalar(run.format, "format", OutputFormat::Csv)?;
    let order = resolve_order(r, run.order)?;
    let defaults = TrialSettings::default();
    let settings = TrialSettings {
        omega: r.scalar(run.omega, "omega", defaults.omega)?,
        max_sweeps: r.scalar(run.max_sweeps, "max-sweeps", defaults.max_sweeps)?,
        resamples: r.scalar(run.resamples, "resamples", defaults.resamples)?,
        ..defaults
    };
    SweepConfig {
        omega: settings.omega,
        max_sweeps: settings.max_sweeps,
        ..SweepConfig::new(0)
    }
    .validate()
    .map_err(invalid)?;
    if settings.resamples == 0 {
        return Err(CliError::Usage("--resamples must be at least 1".into()));
    }
    Ok(RunContext {
        seed,
        trials,
        threads,
        output,
        format,
        order,
        settings,
    })
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building the worker pool")?;
            Ok(pool.install(job))
        }
    }
}

/// Validates the grid, runs it, writes the records, and returns them for
/// subcommand-specific summaries.
fn run_grid(
    r: &Resolver,
    ctx: &RunContext,
    kind: ExperimentKind,
    axes: GridAxes,
) -> CliResult<Vec<dam_core::experiments::ExperimentRecord>> {
    r.finish()?;
    let mut grid = ExperimentGrid::new(kind, axes, ctx.trials, ctx.seed);
    grid.settings = ctx.settings.clone();
    grid.points().map_err(invalid)?;
    let records = in_pool(ctx.threads, || run_experiment(&grid))?.map_err(runtime)?;
    let text = render_records(kind, &records, ctx.format);
    emit(&text, ctx.output.as_deref()).with_context(|| {
        format!(
            "writing {}",
            ctx.output
                .as_deref()
                .map_or("stdout".into(), |p| p.display().to_string())
        )
    })?;
    Ok(records)
}

fn exp_convergence(args: ConvergenceArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let ctx = run_context(&r, &args.run, DEFAULT_TRIALS)?;
    let (loadings, pattern_counts) =
        loadings_or_counts(&r, "alpha", args.alpha, args.p, vec![0.01, 0.02, 0.03])?;
    let axes = GridAxes {
        order: ctx.order,
        neurons: r.list(args.n, "N", vec![200, 300, 400, 500])?,
        loadings,
        pattern_counts,
        corruptions: r.list(args.corruption, "corruption", vec![0.15, 0.30])?,
        ..GridAxes::default()
    };
    run_grid(&r, &ctx, ExperimentKind::Convergence, axes)?;
    Ok(())
}

fn exp_basin(args: BasinArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let ctx = run_context(&r, &args.run, DEFAULT_TRIALS)?;
    let (loadings, pattern_counts) =
        loadings_or_counts(&r, "alpha", args.alpha, args.p, vec![0.005, 0.01, 0.02])?;
    let range = &args.range;
    let corruptions = list_or_range(
        &r,
        range.corruption.clone(),
        (
            range.corruption_min,
            range.corruption_max,
            range.corruption_step,
        ),
        "corruption",
        (0.30, 0.50, 0.01),
    )?;
    let axes = GridAxes {
        order: ctx.order,
        neurons: r.list(args.n, "N", vec![200, 400, 600])?,
        loadings,
        pattern_counts,
        corruptions,
        ..GridAxes::default()
    };
    let records = run_grid(&r, &ctx, ExperimentKind::Basin, axes)?;
    let cells = basin_average(&records);
    for (loading, t) in basin_boundaries(&cells, 0.01).map_err(runtime)? {
        eprintln!(
            "basin: loading {} crosses 50% at corruption {} (interpolated {}{})",
            fmt_num(loading),
            fmt_num(t.reported),
            fmt_num(t.raw),
            if t.crossed {
                ""
            } else {
                ", no crossing in grid"
            }
        );
    }
    Ok(())
}

fn exp_adversarial(args: AdversarialArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let ctx = run_context(&r, &args.run, 80)?;
    let (loadings, mut pattern_counts) =
        loadings_or_counts(&r, "alpha", args.alpha, args.p, Vec::new())?;
    if loadings.is_empty() && pattern_counts.is_empty() {
        pattern_counts = vec![1250];
    }
    let rhos = list_or_range(
        &r,
        args.rho,
        (args.rho_min, args.rho_max, args.rho_step),
        "rho",
        (0.0, 0.35, 0.01),
    )?;
    let axes = GridAxes {
        order: ctx.order,
        neurons: r.list(args.n, "N", vec![500])?,
        loadings,
        pattern_counts,
        rhos,
        adversaries: r.list(
            args.adversary,
            "adversary",
            vec![AdversaryModel::Strong, AdversaryModel::Weak],
        )?,
        gamma0: r.scalar(args.gamma, "gamma", diagnostics::DEFAULT_GAMMA)?,
        rounds: r.scalar(args.rounds, "rounds", GridAxes::default().rounds)?,
        ..GridAxes::default()
    };
    let records = run_grid(&r, &ctx, ExperimentKind::Adversarial, axes)?;
    for s in adversarial_thresholds(&records, 0.01).map_err(runtime)? {
        eprintln!(
            "adversarial: N={} p={} {} rho_hat={} (interpolated {}{}) rho_star_beta={} rho_star_gamma={}",
            s.neurons,
            s.patterns,
            s.model.name(),
            fmt_num(s.threshold.reported),
            fmt_num(s.threshold.raw),
            if s.threshold.crossed { "" } else { ", no crossing in grid" },
            s.rho_star_beta.map_or("--".into(), fmt_num),
            fmt_num(s.rho_star_gamma),
        );
    }
    Ok(())
}

fn exp_capacity(args: CapacityArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let defaults = CapacitySearchConfig::default();
    let ctx = run_context(&r, &args.run, defaults.trials)?;
    let neurons: Vec<usize> = r.list(args.n, "N", vec![100, 150, 200, 300])?;
    let config = CapacitySearchConfig {
        order: ctx.order,
        trials: ctx.trials,
        pass_fraction: r.scalar(args.pass_fraction, "pass-fraction", defaults.pass_fraction)?,
        corruption: r.scalar(args.corruption, "corruption", defaults.corruption)?,
        max_sweeps: ctx.settings.max_sweeps,
        omega: ctx.settings.omega,
        upper: r.opt(args.upper, "upper")?,
    };
    r.finish()?;
    if !(config.pass_fraction > 0.0 && config.pass_fraction <= 1.0) {
        return Err(CliError::Usage("--pass-fraction must lie in (0, 1]".into()));
    }
    if !(0.0..=1.0).contains(&config.corruption) {
        return Err(CliError::Usage("--corruption must lie in [0, 1]".into()));
    }
    if neurons.is_empty() {
        return Err(CliError::Usage("--N needs at least one value".into()));
    }
    for &n in &neurons {
        ModelParams::new(config.order, n, 1).map_err(invalid)?;
    }
    let result = in_pool(ctx.threads, || {
        capacity_scaling(&neurons, &config, ctx.seed)
    })?
    .map_err(runtime)?;
    emit(&render_capacity(&result, ctx.format), ctx.output.as_deref())
        .context("writing capacity table")?;
    if let Some(fit) = &result.fit {
        eprintln!(
            "capacity: p_max ≈ {} · N^{}, R² = {}",
            fmt_num(fit.prefactor),
            fmt_num(fit.exponent),
            fmt_num(fit.r_squared)
        );
    }
    Ok(())
}

fn exp_update_compare(args: UpdateCompareArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let ctx = run_context(&r, &args.run, 50)?;
    let (loadings, pattern_counts) = loadings_or_counts(
        &r,
        "alpha-prime",
        args.alpha_prime,
        args.p,
        vec![0.10, 0.15, 0.20, 0.25, 0.30],
    )?;
    let axes = GridAxes {
        order: ctx.order,
        neurons: r.list(args.n, "N", vec![500])?,
        loadings,
        pattern_counts,
        initial_overlaps: r.list(args.m0, "m0", vec![0.3, 0.5, 0.7])?,
        modes: r.list(
            args.mode,
            "mode",
            vec![UpdateMode::Asynchronous, UpdateMode::Synchronous],
        )?,
        ..GridAxes::default()
    };
    run_grid(&r, &ctx, ExperimentKind::UpdateCompare, axes)?;
    Ok(())
}

fn exp_pattern_compare(args: PatternCompareArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let mut ctx = run_context(&r, &args.run, 50)?;
    let (loadings, pattern_counts) = loadings_or_counts(
        &r,
        "alpha",
        args.alpha,
        args.p,
        vec![
            0.002, 0.004, 0.006, 0.008, 0.010, 0.015, 0.020, 0.030, 0.050,
        ],
    )?;
    ctx.settings.copy_prob = r.scalar(args.copy_prob, "copy-prob", DEFAULT_COPY_PROB)?;
    ctx.settings.copy_fraction =
        r.scalar(args.copy_fraction, "copy-fraction", DEFAULT_COPY_FRACTION)?;
    let axes = GridAxes {
        order: ctx.order,
        neurons: r.list(args.n, "N", vec![500])?,
        loadings,
        pattern_counts,
        ensembles: r.list(
            args.ensemble,
            "ensemble",
            vec![EnsembleKind::RandomIid, EnsembleKind::Correlated],
        )?,
        corruptions: r.list(args.corruption, "corruption", vec![0.20])?,
        ..GridAxes::default()
    };
    run_grid(&r, &ctx, ExperimentKind::PatternCompare, axes)?;
    Ok(())
}

fn exp_realdata(args: RealdataArgs) -> CliResult<()> {
    let r = resolver(&args.run.config)?;
    let ctx = run_context(&r, &args.run, 40)?;
    let sources = r
        .opt_list(args.patterns, "patterns")?
        .ok_or_else(|| CliError::Usage("exp-realdata needs --patterns FILE[,FILE...]".into()))?;
    let axes = GridAxes {
        order: ctx.order,
        sources,
        corruptions: r.list(
            args.corruption,
            "corruption",
            vec![0.10, 0.20, 0.30, 0.35, 0.40, 0.45],
        )?,
        ..GridAxes::default()
    };
    run_grid(&r, &ctx, ExperimentKind::RealData, axes)?;
    Ok(())
}

fn pattern_format_for(path: &Path, explicit: Option<String>) -> CliResult<PatternFormat> {
    match explicit {
        Some(f) => f.parse().map_err(invalid),
        None => Ok(match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => PatternFormat::Text,
            _ => PatternFormat::Binary,
        }),
    }
}

fn read_vectors(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Runtime(anyhow::anyhow!(
                        "{}:{}: not a number: {s:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let r = resolver(&args.config)?;
    let order = resolve_order(&r, args.order)?;
    let format = pattern_format_for(&args.output, r.opt(args.format, "format")?)?;
    let from_vectors = r.opt(args.from_vectors, "from-vectors")?;
    let patterns = if let Some(path) = from_vectors {
        for (flag, set) in [
            ("N", args.n.is_some()),
            ("p", args.p.is_some()),
            ("alpha", args.alpha.is_some()),
        ] {
            if set {
                return Err(CliError::Usage(format!(
                    "--{flag} conflicts with --from-vectors"
                )));
            }
        }
        r.finish()?;
        let vectors = read_vectors(&path)?;
        binarize_median(&vectors, order).map_err(runtime)?
    } else {
        let seed = resolve_seed(&r, args.seed)?;
        let neurons: usize = r
            .opt(args.n, "N")?
            .ok_or_else(|| CliError::Usage("generate needs --N (or --from-vectors)".into()))?;
        let count = match (r.opt(args.p, "p")?, r.opt(args.alpha, "alpha")?) {
            (Some(_), Some(_)) => return Err(CliError::Usage("--p conflicts with --alpha".into())),
            (Some(p), None) => p,
            (None, Some(a)) => diagnostics::patterns_for_loading(order, neurons, a),
            (None, None) => return Err(CliError::Usage("generate needs --p or --alpha".into())),
        };
        let kind: EnsembleKind = r
            .scalar(args.ensemble, "ensemble", "random".to_string())?
            .parse()
            .map_err(invalid)?;
        let params = ModelParams::new(order, neurons, count).map_err(invalid)?;
        let spec = EnsembleSpec {
            kind,
            params,
            copy_prob: r.scalar(args.copy_prob, "copy-prob", DEFAULT_COPY_PROB)?,
            copy_fraction: r.scalar(args.copy_fraction, "copy-fraction", DEFAULT_COPY_FRACTION)?,
        };
        r.finish()?;
        spec.validate().map_err(invalid)?;
        spec.generate(&mut DamRng::new(seed)).map_err(runtime)?
    };
    let bytes = save_patterns(&patterns, &args.output, format).map_err(runtime)?;
    eprintln!(
        "wrote {} patterns of length {} to {} ({bytes} bytes)",
        patterns.len(),
        patterns.neurons(),
        args.output.display()
    );
    Ok(())
}

fn retrieve_cmd(args: RetrieveArgs) -> CliResult<()> {
    let r = resolver(&args.config)?;
    let order = resolve_order(&r, args.order)?;
    let seed = resolve_seed(&r, args.seed)?;
    let target = r.scalar(args.target, "target", 0)?;
    let corruption = r.opt(args.corruption, "corruption")?;
    let flips = r.opt(args.flips, "flips")?;
    let mode = r.scalar(args.mode, "mode", UpdateMode::Asynchronous)?;
    let sweep = SweepConfig {
        mode,
        max_sweeps: r.scalar(
            args.max_sweeps,
            "max-sweeps",
            SweepConfig::DEFAULT_MAX_SWEEPS,
        )?,
        omega: r.scalar(args.omega, "omega", SweepConfig::DEFAULT_OMEGA)?,
        target,
        record_potential: args.trace,
    };
    r.finish()?;
    sweep.validate().map_err(invalid)?;
    let patterns = load_patterns(&args.patterns, order).map_err(invalid)?;
    patterns.check_pattern(target).map_err(invalid)?;
    let n = patterns.neurons();
    let k = match (corruption, flips) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--corruption conflicts with --flips".into(),
            ))
        }
        (None, Some(k)) => k,
        (c, None) => {
            let c = c.unwrap_or(0.15);
            if !(0.0..=1.0).contains(&c) {
                return Err(CliError::Usage("--corruption must lie in [0, 1]".into()));
            }
            (c * n as f64).round() as usize
        }
    };
    if k > n {
        return Err(CliError::Usage(format!(
            "cannot flip {k} of {n} coordinates"
        )));
    }
    let mut rng = DamRng::new(seed);
    let state = corrupt_count(&patterns, target, k, &mut rng).map_err(runtime)?;
    let start = state.overlap(&patterns, target).map_err(runtime)?;
    let outcome = retrieve(&patterns, state, &sweep, &mut rng).map_err(runtime)?;
    println!("N: {n}");
    println!("p: {}", patterns.len());
    println!("target: {target}");
    println!("mode: {}", mode.name());
    println!("initial_flips: {k}");
    println!("initial_overlap: {}", fmt_num(start));
    println!("converged: {}", outcome.converged);
    println!("sweeps: {}", outcome.sweeps_used);
    println!("flips: {}", outcome.flips_total);
    println!("final_overlap: {}", fmt_num(outcome.final_overlap));
    println!("final_potential_numerator: {}", outcome.final_potential);
    if let Some(trace) = outcome.potential_trace {
        let trace: Vec<String> = trace.iter().map(i128::to_string).collect();
        println!("potential_trace: {}", trace.join(","));
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult<()> {
    let r = resolver(&args.config)?;
    let order = resolve_order(&r, args.order)?;
    let seed = resolve_seed(&r, args.seed)?;
    let gamma = r.scalar(args.gamma, "gamma", diagnostics::DEFAULT_GAMMA)?;
    let target = r.scalar(args.target, "target", 0)?;
    let samples = r.scalar(args.samples, "samples", 50usize)?;
    r.finish()?;
    let patterns = load_patterns(&args.patterns, order).map_err(invalid)?;
    patterns.check_pattern(target).map_err(invalid)?;
    let mut rng = DamRng::new(seed);
    let sep = estimate_separation(&patterns, target, gamma, samples, &mut rng).map_err(invalid)?;
    let t = diagnostics::theory(patterns.params(), Some(gamma), Some(sep.beta_patterns));
    let probe = contraction_probe(&patterns, target, gamma, samples, &mut rng).map_err(runtime)?;
    let opt = |v: Option<f64>| v.map_or("--".to_string(), fmt_num);
    println!("order: {}", t.order);
    println!("N: {}", t.neurons);
    println!("p: {}", t.patterns);
    println!("alpha: {}", fmt_num(t.loading));
    println!("alpha_prime: {}", fmt_num(t.mimura_alpha3));
    println!("alpha_rate: {}", fmt_num(t.alpha_rate));
    println!("gamma: {}", fmt_num(gamma));
    println!("beta: {}", fmt_num(sep.beta_patterns));
    println!("beta_state_hat: {}", fmt_num(sep.beta_state_hat));
    println!("lambda_hat: {}", fmt_num(sep.lambda_hat));
    println!("signal_dominates: {}", sep.dominant);
    println!("margin: {}", fmt_num(sep.margin));
    println!("samples: {}", sep.samples_used);
    println!("rho_star_alpha: {}", fmt_num(t.rho_star_alpha));
    println!("rho_star_gamma: {}", opt(t.rho_star_gamma));
    println!("rho_star_beta: {}", opt(t.rho_star_beta));
    println!("capacity_lower: {}", fmt_num(t.cap_lower));
    println!("capacity_upper: {}", fmt_num(t.cap_upper));
    println!(
        "probe_gain_per_update: {}",
        fmt_num(probe.mean_gain_per_update)
    );
    println!(
        "probe_predicted_gain: {}",
        fmt_num(probe.predicted_gain_per_update)
    );
    println!("probe_ratio: {}", opt(probe.ratio));
    Ok(())
}

fn selftest_cmd(args: SelftestArgs) -> CliResult<()> {
    let seed = match args.seed {
        Some(seed) => seed,
        None => resolve_seed(&Resolver::new(ConfigFile::default()), None)?,
    };
    let results = selftest::run_all(seed);
    let failed = results.iter().filter(|c| !c.passed).count();
    for check in &results {
        println!(
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    println!(
        "selftest: {}/{} checks passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!(
            "{failed} selftest check(s) failed"
        )))
    }
}
