//! Grid runners for the convergence, basin, adversarial, capacity,
//! update-rule, pattern-structure and real-data studies.
//!
//! Every trial is a pure function of `(point, trial index, master seed)`: the
//! trial seed comes from [`derive_seed`] and nothing else is shared, so results
//! do not depend on how many threads run them. Trials fan out over the current
//! rayon pool and are collected in trial-index order.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use crate::adversary::{corrupt_count, robustness_protocol, AdversaryConfig, AdversaryModel};
use crate::diagnostics::{
    self, beta_patterns, patterns_for_loading, patterns_for_mimura, TheoryQuantities,
};
use crate::dynamics::{retrieve, SweepConfig, TrialOutcome, UpdateMode};
use crate::ensembles::{
    generate_correlated, generate_random, load_patterns, EnsembleKind, DEFAULT_COPY_FRACTION,
    DEFAULT_COPY_PROB,
};
use crate::model::{ModelParams, PatternSet};
use crate::stats::{
    self, bootstrap_ci, estimate_threshold, fit_power_law, PowerLawFit, ThresholdEstimate,
};
use crate::{derive_seed, DamError, DamRng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Convergence,
    Basin,
    Adversarial,
    Capacity,
    UpdateCompare,
    PatternCompare,
    RealData,
}

impl ExperimentKind {
    /// Stable tag; also feeds seed derivation.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Basin => "basin",
            ExperimentKind::Adversarial => "adversarial",
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::UpdateCompare => "update_compare",
            ExperimentKind::PatternCompare => "pattern_compare",
            ExperimentKind::RealData => "realdata",
        }
    }
}

/// Knobs shared by every trial of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub omega: f64,
    pub max_sweeps: usize,
    pub copy_prob: f64,
    pub copy_fraction: f64,
    pub resamples: usize,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            omega: SweepConfig::DEFAULT_OMEGA,
            max_sweeps: SweepConfig::DEFAULT_MAX_SWEEPS,
            copy_prob: DEFAULT_COPY_PROB,
            copy_fraction: DEFAULT_COPY_FRACTION,
            resamples: stats::DEFAULT_RESAMPLES,
        }
    }
}

/// The axes a grid is expanded from. Which axes matter depends on the kind.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub order: u32,
    pub neurons: Vec<usize>,
    /// `α = p/N^{n-1}`, or Mimura `α'_n` for update comparisons.
    pub loadings: Vec<f64>,
    /// Explicit pattern counts; used instead of `loadings` when non-empty.
    pub pattern_counts: Vec<usize>,
    /// Initial corruption fractions.
    pub corruptions: Vec<f64>,
    /// Initial overlaps `m₀` (update comparisons).
    pub initial_overlaps: Vec<f64>,
    pub rhos: Vec<f64>,
    pub adversaries: Vec<AdversaryModel>,
    pub gamma0: f64,
    pub rounds: usize,
    pub modes: Vec<UpdateMode>,
    pub ensembles: Vec<EnsembleKind>,
    pub sources: Vec<PathBuf>,
}

impl Default for GridAxes {
    fn default() -> Self {
        Self {
            order: 3,
            neurons: Vec::new(),
            loadings: Vec::new(),
            pattern_counts: Vec::new(),
            corruptions: Vec::new(),
            initial_overlaps: Vec::new(),
            rhos: Vec::new(),
            adversaries: vec![AdversaryModel::Strong, AdversaryModel::Weak],
            gamma0: AdversaryConfig::DEFAULT_GAMMA0,
            rounds: AdversaryConfig::DEFAULT_ROUNDS,
            modes: vec![UpdateMode::Asynchronous, UpdateMode::Synchronous],
            ensembles: vec![EnsembleKind::RandomIid, EnsembleKind::Correlated],
            sources: Vec::new(),
        }
    }
}

/// One fully specified grid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub kind: ExperimentKind,
    pub order: u32,
    pub neurons: usize,
    pub patterns: usize,
    /// The loading value the point was built from (`α` or `α'_n`).
    pub loading: f64,
    /// Initial corruption fraction (`flips / N` before rounding).
    pub corruption: f64,
    /// Exact number of coordinates flipped in the initial state.
    pub initial_flips: usize,
    pub mode: UpdateMode,
    pub ensemble: EnsembleKind,
    pub adversary: Option<AdversaryConfig>,
    pub source: Option<PathBuf>,
    pub settings: TrialSettings,
}

impl GridPoint {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.order, self.neurons, self.patterns)
    }

    /// `m₀ = 1 − 2k/N`.
    pub fn initial_overlap(&self) -> f64 {
        1.0 - 2.0 * self.initial_flips as f64 / self.neurons as f64
    }

    fn sweep_config(&self, target: usize) -> SweepConfig {
        SweepConfig {
            mode: self.mode,
            max_sweeps: self.settings.max_sweeps,
            omega: self.settings.omega,
            target,
            record_potential: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub kind: ExperimentKind,
    pub axes: GridAxes,
    pub trials: usize,
    pub master_seed: u64,
    pub settings: TrialSettings,
    /// Measure β on each point's first pattern set.
    pub measure_beta: bool,
}

impl ExperimentGrid {
    pub fn new(kind: ExperimentKind, axes: GridAxes, trials: usize, master_seed: u64) -> Self {
        Self {
            kind,
            axes,
            trials,
            master_seed,
            settings: TrialSettings::default(),
            measure_beta: true,
        }
    }

    /// Expands the axes into points, in a fixed nested order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.trials == 0 {
            return Err(DamError::InvalidConfig("trials must be at least 1".into()));
        }
        let axes = &self.axes;
        let order = axes.order;
        let mut points = Vec::new();
        let mut push = |neurons: usize,
                        patterns: usize,
                        loading: f64,
                        corruption: f64,
                        initial_flips: usize,
                        mode: UpdateMode,
                        ensemble: EnsembleKind,
                        adversary: Option<AdversaryConfig>,
                        source: Option<PathBuf>|
         -> Result<()> {
            ModelParams::new(order, neurons, patterns)?;
            if let Some(adv) = &adversary {
                adv.validate()?;
            }
            if initial_flips > neurons {
                return Err(DamError::InvalidConfig(format!(
                    "initial corruption {corruption} exceeds N = {neurons}"
                )));
            }
            if ensemble == EnsembleKind::Correlated && patterns < 3 {
                return Err(DamError::InvalidConfig(
                    "correlated ensembles need p ≥ 3".into(),
                ));
            }
            points.push(GridPoint {
                index: points.len(),
                kind: self.kind,
                order,
                neurons,
                patterns,
                loading,
                corruption,
                initial_flips,
                mode,
                ensemble,
                adversary,
                source,
                settings: self.settings.clone(),
            });
            Ok(())
        };
        let flips_for = |c: f64, n: usize| -> Result<usize> {
            if !(0.0..=1.0).contains(&c) {
                return Err(DamError::InvalidConfig(format!(
                    "corruption {c} must lie in [0, 1]"
                )));
            }
            Ok((c * n as f64).round() as usize)
        };
        let counts = |n: usize, mimura: bool| -> Vec<(usize, f64)> {
            if axes.pattern_counts.is_empty() {
                axes.loadings
                    .iter()
                    .map(|&a| {
                        let p = if mimura {
                            patterns_for_mimura(order, n, a)
                        } else {
                            patterns_for_loading(order, n, a)
                        };
                        (p, a)
                    })
                    .collect()
            } else {
                let scale = (n as f64).powi(order as i32 - 1);
                let factor = if mimura { f64::from(order) } else { 1.0 };
                axes.pattern_counts
                    .iter()
                    .map(|&p| (p, factor * p as f64 / scale))
                    .collect()
            }
        };
        let require = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(DamError::InvalidConfig(format!(
                    "{} grid needs a non-empty {what} axis",
                    self.kind.name()
                )))
            }
        };
        let has_patterns = !axes.loadings.is_empty() || !axes.pattern_counts.is_empty();

        match self.kind {
            ExperimentKind::Convergence | ExperimentKind::Basin => {
                require(!axes.neurons.is_empty(), "N")?;
                require(has_patterns, "loading")?;
                require(!axes.corruptions.is_empty(), "corruption")?;
                // Loading outermost so each α block lists every N.
                let n_loadings = axes.loadings.len().max(axes.pattern_counts.len());
                for li in 0..n_loadings {
                    for &n in &axes.neurons {
                        let (p, a) = counts(n, false)[li];
                        for &c in &axes.corruptions {
                            push(
                                n,
                                p,
                                a,
                                c,
                                flips_for(c, n)?,
                                UpdateMode::Asynchronous,
                                EnsembleKind::RandomIid,
                                None,
                                None,
                            )?;
                        }
                    }
                }
            }
            ExperimentKind::Adversarial => {
                require(!axes.neurons.is_empty(), "N")?;
                require(has_patterns, "loading or p")?;
                require(!axes.rhos.is_empty(), "rho")?;
                require(!axes.adversaries.is_empty(), "adversary")?;
                let corruption = (1.0 - axes.gamma0) / 2.0;
                for &n in &axes.neurons {
                    for (p, a) in counts(n, false) {
                        for &model in &axes.adversaries {
                            for &rho in &axes.rhos {
                                let adversary = AdversaryConfig {
                                    model,
                                    rho,
                                    rounds: axes.rounds,
                                    gamma0: axes.gamma0,
                                };
                                let flips = (n as f64 * corruption).round() as usize;
                                push(
                                    n,
                                    p,
                                    a,
                                    corruption,
                                    flips,
                                    UpdateMode::Asynchronous,
                                    EnsembleKind::RandomIid,
                                    Some(adversary),
                                    None,
                                )?;
                            }
                        }
                    }
                }
            }
            ExperimentKind::UpdateCompare => {
                require(!axes.neurons.is_empty(), "N")?;
                require(has_patterns, "loading")?;
                require(!axes.initial_overlaps.is_empty(), "m0")?;
                require(!axes.modes.is_empty(), "mode")?;
                for &n in &axes.neurons {
                    for (p, a) in counts(n, true) {
                        for &m0 in &axes.initial_overlaps {
                            if !(-1.0..=1.0).contains(&m0) {
                                return Err(DamError::InvalidConfig(format!(
                                    "m0 = {m0} must lie in [-1, 1]"
                                )));
                            }
                            let corruption = (1.0 - m0) / 2.0;
                            let flips = (n as f64 * corruption).round() as usize;
                            for &mode in &axes.modes {
                                push(
                                    n,
                                    p,
                                    a,
                                    corruption,
                                    flips,
                                    mode,
                                    EnsembleKind::RandomIid,
                                    None,
                                    None,
                                )?;
                            }
                        }
                    }
                }
            }
            ExperimentKind::PatternCompare => {
                require(!axes.neurons.is_empty(), "N")?;
                require(has_patterns, "loading")?;
                require(!axes.corruptions.is_empty(), "corruption")?;
                require(!axes.ensembles.is_empty(), "ensemble")?;
                for &n in &axes.neurons {
                    for (p, a) in counts(n, false) {
                        for &ensemble in &axes.ensembles {
                            if ensemble == EnsembleKind::File {
                                return Err(DamError::InvalidConfig(
                                    "pattern comparisons use generated ensembles".into(),
                                ));
                            }
                            for &c in &axes.corruptions {
                                push(
                                    n,
                                    p,
                                    a,
                                    c,
                                    flips_for(c, n)?,
                                    UpdateMode::Asynchronous,
                                    ensemble,
                                    None,
                                    None,
                                )?;
                            }
                        }
                    }
                }
            }
            ExperimentKind::RealData => {
                require(!axes.sources.is_empty(), "source")?;
                require(!axes.corruptions.is_empty(), "corruption")?;
                for source in &axes.sources {
                    let patterns = load_patterns(source, order)?;
                    let (n, p) = (patterns.neurons(), patterns.len());
                    let loading = patterns.params().loading();
                    for &c in &axes.corruptions {
                        push(
                            n,
                            p,
                            loading,
                            c,
                            flips_for(c, n)?,
                            UpdateMode::Asynchronous,
                            EnsembleKind::File,
                            None,
                            Some(source.clone()),
                        )?;
                    }
                }
            }
            ExperimentKind::Capacity => {
                return Err(DamError::InvalidConfig(
                    "capacity is a search, run it with capacity_scaling".into(),
                ))
            }
        }
        Ok(points)
    }
}

/// Aggregate over the trials of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub point: GridPoint,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean sweeps over successful trials; `None` without successes.
    pub mean_sweeps: Option<f64>,
    /// Bootstrap CI of mean sweeps (convergence) or of the success rate (all
    /// other kinds). `None` when there is nothing to resample.
    pub ci: Option<(f64, f64)>,
    pub beta_measured: Option<f64>,
    pub theory: TheoryQuantities,
}

/// Runs one trial; fully determined by its arguments.
pub fn run_trial(point: &GridPoint, trial_index: usize, master_seed: u64) -> Result<TrialOutcome> {
    let file = match (&point.ensemble, &point.source) {
        (EnsembleKind::File, Some(path)) => Some(load_patterns(path, point.order)?),
        (EnsembleKind::File, None) => {
            return Err(DamError::InvalidConfig(
                "file ensemble without a source".into(),
            ))
        }
        _ => None,
    };
    Ok(run_trial_on(point, trial_index, master_seed, file.as_ref(), false)?.0)
}

/// The pattern set trial `trial_index` of `point` runs on.
fn trial_patterns(
    point: &GridPoint,
    rng: &mut DamRng,
    file: Option<&PatternSet>,
) -> Result<PatternSet> {
    let params = point.params()?;
    match point.ensemble {
        EnsembleKind::RandomIid => generate_random(params, rng),
        EnsembleKind::Correlated => generate_correlated(
            params,
            point.settings.copy_prob,
            point.settings.copy_fraction,
            rng,
        ),
        EnsembleKind::File => file
            .cloned()
            .ok_or_else(|| DamError::InvalidConfig("file ensemble without patterns".into())),
    }
}

fn run_trial_on(
    point: &GridPoint,
    trial_index: usize,
    master_seed: u64,
    file: Option<&PatternSet>,
    want_beta: bool,
) -> Result<(TrialOutcome, Option<f64>)> {
    let seed = derive_seed(
        master_seed,
        point.kind.name(),
        point.index as u64,
        trial_index as u64,
    );
    let mut rng = DamRng::new(seed);
    let generated;
    let patterns = match (point.ensemble, file) {
        (EnsembleKind::File, Some(p)) => p,
        _ => {
            generated = trial_patterns(point, &mut rng, file)?;
            &generated
        }
    };
    let target = trial_index % patterns.len();
    let sweep = point.sweep_config(target);
    let outcome = match &point.adversary {
        Some(adversary) => robustness_protocol(patterns, target, adversary, &sweep, &mut rng)?,
        None => {
            let state = corrupt_count(patterns, target, point.initial_flips, &mut rng)?;
            retrieve(patterns, state, &sweep, &mut rng)?
        }
    };
    let beta = want_beta.then(|| beta_patterns(patterns));
    Ok((outcome, beta))
}

/// Runs every point of the grid; records come back in grid order.
pub fn run_experiment(grid: &ExperimentGrid) -> Result<Vec<ExperimentRecord>> {
    let points = grid.points()?;
    let mut files: Vec<(PathBuf, Arc<PatternSet>)> = Vec::new();
    let mut records = Vec::with_capacity(points.len());
    for point in points {
        let file = match &point.source {
            Some(path) => {
                if let Some((_, set)) = files.iter().find(|(p, _)| p == path) {
                    Some(Arc::clone(set))
                } else {
                    let set = Arc::new(load_patterns(path, point.order)?);
                    files.push((path.clone(), Arc::clone(&set)));
                    Some(set)
                }
            }
            None => None,
        };
        records.push(run_point(grid, point, file.as_deref())?);
    }
    Ok(records)
}

fn run_point(
    grid: &ExperimentGrid,
    point: GridPoint,
    file: Option<&PatternSet>,
) -> Result<ExperimentRecord> {
    let results: Vec<(TrialOutcome, Option<f64>)> = (0..grid.trials)
        .into_par_iter()
        .map(|t| {
            run_trial_on(
                &point,
                t,
                grid.master_seed,
                file,
                grid.measure_beta && t == 0,
            )
        })
        .collect::<Result<_>>()?;
    let beta_measured = results.first().and_then(|r| r.1);
    let outcomes: Vec<TrialOutcome> = results.into_iter().map(|r| r.0).collect();

    let successes = outcomes.iter().filter(|o| o.converged).count();
    let success_rate = successes as f64 / grid.trials as f64;
    let success_sweeps: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.converged)
        .map(|o| o.sweeps_used as f64)
        .collect();
    let mean_sweeps = (!success_sweeps.is_empty()).then(|| stats::mean(&success_sweeps));

    let mut ci_rng = DamRng::new(derive_seed(
        grid.master_seed,
        &format!("{}/bootstrap", point.kind.name()),
        point.index as u64,
        0,
    ));
    let ci = if point.kind == ExperimentKind::Convergence {
        if success_sweeps.is_empty() {
            None
        } else {
            Some(bootstrap_ci(
                &success_sweeps,
                stats::DEFAULT_LEVEL,
                grid.settings.resamples,
                &mut ci_rng,
            )?)
        }
    } else {
        let indicators: Vec<f64> = outcomes
            .iter()
            .map(|o| f64::from(u8::from(o.converged)))
            .collect();
        Some(bootstrap_ci(
            &indicators,
            stats::DEFAULT_LEVEL,
            grid.settings.resamples,
            &mut ci_rng,
        )?)
    };

    let gamma = point.adversary.as_ref().map(|a| a.gamma0);
    let theory = diagnostics::theory(&point.params()?, gamma, beta_measured);
    Ok(ExperimentRecord {
        point,
        trials: grid.trials,
        successes,
        success_rate,
        mean_sweeps,
        ci,
        beta_measured,
        theory,
    })
}

/// Success rate for one `(loading, corruption)` cell, averaged with equal
/// weight over the N values of a basin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinCell {
    pub loading: f64,
    pub corruption: f64,
    pub mean_rate: f64,
    pub sizes: usize,
}

pub fn basin_average(records: &[ExperimentRecord]) -> Vec<BasinCell> {
    let mut cells: Vec<BasinCell> = Vec::new();
    for r in records {
        let key = (r.point.loading, r.point.corruption);
        match cells.iter_mut().find(|c| (c.loading, c.corruption) == key) {
            Some(cell) => {
                cell.mean_rate += r.success_rate;
                cell.sizes += 1;
            }
            None => cells.push(BasinCell {
                loading: key.0,
                corruption: key.1,
                mean_rate: r.success_rate,
                sizes: 1,
            }),
        }
    }
    for cell in &mut cells {
        cell.mean_rate /= cell.sizes as f64;
    }
    cells.sort_by(|a, b| {
        a.loading
            .total_cmp(&b.loading)
            .then(a.corruption.total_cmp(&b.corruption))
    });
    cells
}

/// 50% crossing of the averaged basin curve at each loading.
pub fn basin_boundaries(
    cells: &[BasinCell],
    grid_step: f64,
) -> Result<Vec<(f64, ThresholdEstimate)>> {
    let mut loadings: Vec<f64> = cells.iter().map(|c| c.loading).collect();
    loadings.dedup();
    loadings
        .into_iter()
        .map(|a| {
            let curve: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.loading == a)
                .map(|c| (c.corruption, c.mean_rate))
                .collect();
            Ok((a, estimate_threshold(&curve, grid_step)?))
        })
        .collect()
}

/// Empirical adversarial threshold for one `(N, p, adversary)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSummary {
    pub neurons: usize,
    pub patterns: usize,
    pub model: AdversaryModel,
    pub gamma: f64,
    /// Mean of the per-point β measurements along the curve.
    pub beta: Option<f64>,
    pub rho_star_gamma: f64,
    pub rho_star_beta: Option<f64>,
    pub threshold: ThresholdEstimate,
}

pub fn adversarial_thresholds(
    records: &[ExperimentRecord],
    grid_step: f64,
) -> Result<Vec<AdversarialSummary>> {
    let mut keys: Vec<(usize, usize, AdversaryModel)> = Vec::new();
    for r in records {
        if let Some(adv) = &r.point.adversary {
            let key = (r.point.neurons, r.point.patterns, adv.model);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys.into_iter()
        .map(|(neurons, patterns, model)| {
            let curve_records: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| {
                    r.point.neurons == neurons
                        && r.point.patterns == patterns
                        && r.point.adversary.as_ref().map(|a| a.model) == Some(model)
                })
                .collect();
            let mut curve: Vec<(f64, f64)> = curve_records
                .iter()
                .map(|r| {
                    (
                        r.point.adversary.as_ref().map_or(0.0, |a| a.rho),
                        r.success_rate,
                    )
                })
                .collect();
            curve.sort_by(|a, b| a.0.total_cmp(&b.0));
            let gamma = curve_records[0]
                .point
                .adversary
                .as_ref()
                .map_or(AdversaryConfig::DEFAULT_GAMMA0, |a| a.gamma0);
            let betas: Vec<f64> = curve_records
                .iter()
                .filter_map(|r| r.beta_measured)
                .collect();
            let beta = (!betas.is_empty()).then(|| stats::mean(&betas));
            let params = ModelParams::new(curve_records[0].point.order, neurons, patterns)?;
            Ok(AdversarialSummary {
                neurons,
                patterns,
                model,
                gamma,
                beta,
                rho_star_gamma: diagnostics::rho_star_gamma(&params, gamma),
                rho_star_beta: beta.map(|b| diagnostics::rho_star_beta(params.order(), gamma, b)),
                threshold: estimate_threshold(&curve, grid_step)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySearchConfig {
    pub order: u32,
    pub trials: usize,
    /// Required fraction of converging trials.
    pub pass_fraction: f64,
    pub corruption: f64,
    pub max_sweeps: usize,
    pub omega: f64,
    /// Upper end of the search bracket; defaults to `⌈2N^{n-1}/n⌉`.
    pub upper: Option<usize>,
}

impl Default for CapacitySearchConfig {
    fn default() -> Self {
        Self {
            order: 3,
            trials: 40,
            pass_fraction: 0.95,
            corruption: 0.15,
            max_sweeps: SweepConfig::DEFAULT_MAX_SWEEPS,
            omega: SweepConfig::DEFAULT_OMEGA,
            upper: None,
        }
    }
}

impl CapacitySearchConfig {
    fn required_successes(&self) -> usize {
        ((self.pass_fraction * self.trials as f64) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    fn upper_bracket(&self, neurons: usize) -> usize {
        self.upper.unwrap_or_else(|| {
            let scale = (neurons as u128).pow(self.order - 1);
            (2 * scale).div_ceil(u128::from(self.order)) as usize
        })
    }
}

/// Whether at least `pass_fraction` of `trials` converge at `p` patterns, all
/// trials sharing one pattern set drawn from `probe_seed`.
///
/// Trials are evaluated in thread-sized batches and the probe stops once the
/// failure budget is exhausted; the verdict is the same as running all trials.
pub fn capacity_predicate(
    neurons: usize,
    patterns: usize,
    config: &CapacitySearchConfig,
    probe_seed: u64,
) -> Result<bool> {
    let params = ModelParams::new(config.order, neurons, patterns)?;
    let set = generate_random(params, &mut DamRng::new(probe_seed))?;
    let flips = (config.corruption * neurons as f64).round() as usize;
    let allowed_failures = config.trials - config.required_successes().min(config.trials);
    let batch = rayon::current_num_threads().max(1);
    let mut failures = 0;
    let mut start = 0;
    while start < config.trials {
        let end = (start + batch).min(config.trials);
        let converged: Vec<bool> = (start..end)
            .into_par_iter()
            .map(|t| {
                let mut rng = DamRng::new(derive_seed(
                    probe_seed,
                    "capacity-trial",
                    patterns as u64,
                    t as u64,
                ));
                let target = t % patterns;
                let state = corrupt_count(&set, target, flips, &mut rng)?;
                let sweep = SweepConfig {
                    mode: UpdateMode::Asynchronous,
                    max_sweeps: config.max_sweeps,
                    omega: config.omega,
                    target,
                    record_potential: false,
                };
                Ok(retrieve(&set, state, &sweep, &mut rng)?.converged)
            })
            .collect::<Result<_>>()?;
        failures += converged.iter().filter(|&&c| !c).count();
        if failures > allowed_failures {
            return Ok(false);
        }
        start = end;
    }
    Ok(true)
}

/// Largest `p` passing [`capacity_predicate`], found by bisection over
/// `[1, upper]` until the bracket is no wider than `max(1, p/64)`, followed by
/// re-testing the result with fresh pattern sets and stepping down until it
/// passes. Returns 0 when even `p = 1` fails.
pub fn capacity_search(
    neurons: usize,
    config: &CapacitySearchConfig,
    rng: &mut DamRng,
) -> Result<usize> {
    if config.trials == 0 {
        return Err(DamError::InvalidConfig(
            "capacity trials must be positive".into(),
        ));
    }
    if !(config.pass_fraction > 0.0 && config.pass_fraction <= 1.0) {
        return Err(DamError::InvalidConfig(
            "pass_fraction must lie in (0, 1]".into(),
        ));
    }
    let upper = config.upper_bracket(neurons).max(1);
    let mut probe = |p: usize| capacity_predicate(neurons, p, config, rng.next_u64());

    if !probe(1)? {
        return Ok(0);
    }
    let mut lo = 1usize;
    let mut hi = upper + 1;
    while hi - lo > (lo / 64).max(1) {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    while lo > 1 && !probe(lo)? {
        lo -= (lo / 64).max(1);
    }
    Ok(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityPoint {
    pub neurons: usize,
    pub p_max: usize,
    /// `N^{n-1}`.
    pub scale: f64,
    /// `p_max / N^{n-1}`.
    pub alpha_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub points: Vec<CapacityPoint>,
    /// Fit over points with `p_max ≥ 1`, when there are at least two.
    pub fit: Option<PowerLawFit>,
}

/// Capacity search at each `N`, each with its own derived seed, plus a
/// power-law fit of `p_max` against `N`.
pub fn capacity_scaling(
    neurons: &[usize],
    config: &CapacitySearchConfig,
    master_seed: u64,
) -> Result<CapacityResult> {
    if neurons.is_empty() {
        return Err(DamError::EmptyInput("capacity N values"));
    }
    let mut points = Vec::with_capacity(neurons.len());
    for (index, &n) in neurons.iter().enumerate() {
        let mut rng = DamRng::new(derive_seed(master_seed, "capacity", index as u64, 0));
        let p_max = capacity_search(n, config, &mut rng)?;
        let scale = (n as f64).powi(config.order as i32 - 1);
        points.push(CapacityPoint {
            neurons: n,
            p_max,
            scale,
            alpha_eff: p_max as f64 / scale,
        });
    }
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.p_max > 0)
        .map(|p| (p.neurons as f64, p.p_max as f64))
        .collect();
    let fit = if fit_points.len() >= 2 {
        Some(fit_power_law(&fit_points)?)
    } else {
        None
    };
    Ok(CapacityResult { points, fit })
}
