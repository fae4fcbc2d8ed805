//! Initial corruption and per-round adversaries.
//!
//! The robustness protocol alternates `rounds` times between an adversary
//! corrupting up to `round(ρ·N)` currently-correct neurons and one
//! asynchronous sweep.

use crate::dynamics::{async_sweep, SweepConfig, TrialOutcome};
use crate::model::{NetworkState, PatternSet};
use crate::{DamError, DamRng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdversaryModel {
    /// Flips the correct neurons with the smallest alignment `Φ_i·ξ_i^ν`.
    Strong,
    /// Flips random correct neurons whose field opposes the target, then
    /// random correct neurons.
    Weak,
    None,
}

impl AdversaryModel {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryModel::Strong => "strong",
            AdversaryModel::Weak => "weak",
            AdversaryModel::None => "none",
        }
    }
}

impl std::str::FromStr for AdversaryModel {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(AdversaryModel::Strong),
            "weak" => Ok(AdversaryModel::Weak),
            "none" => Ok(AdversaryModel::None),
            other => Err(DamError::InvalidConfig(format!(
                "unknown adversary {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryConfig {
    pub model: AdversaryModel,
    /// Fraction of `N` corrupted per round.
    pub rho: f64,
    pub rounds: usize,
    /// Target overlap of the initial state.
    pub gamma0: f64,
}

impl AdversaryConfig {
    pub const DEFAULT_ROUNDS: usize = 10;
    pub const DEFAULT_GAMMA0: f64 = 0.6;

    pub fn new(model: AdversaryModel, rho: f64) -> Self {
        Self {
            model,
            rho,
            rounds: Self::DEFAULT_ROUNDS,
            gamma0: Self::DEFAULT_GAMMA0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(DamError::InvalidConfig(format!(
                "rho = {} must lie in [0, 1]",
                self.rho
            )));
        }
        if self.rounds == 0 {
            return Err(DamError::InvalidConfig("rounds must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.gamma0) {
            return Err(DamError::InvalidConfig(format!(
                "gamma0 = {} must lie in [-1, 1]",
                self.gamma0
            )));
        }
        Ok(())
    }

    /// Per-round budget `round(ρ·N)`.
    pub fn budget(&self, neurons: usize) -> usize {
        (self.rho * neurons as f64).round() as usize
    }
}

/// `ξ^ν` with `round(fraction·N)` distinct uniformly chosen coordinates flipped.
pub fn corrupt_random(
    patterns: &PatternSet,
    target: usize,
    fraction: f64,
    rng: &mut DamRng,
) -> Result<NetworkState> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DamError::InvalidConfig(format!(
            "corruption fraction {fraction} must lie in [0, 1]"
        )));
    }
    let k = (fraction * patterns.neurons() as f64).round() as usize;
    corrupt_count(patterns, target, k, rng)
}

/// `ξ^ν` with exactly `k` distinct uniformly chosen coordinates flipped.
pub fn corrupt_count(
    patterns: &PatternSet,
    target: usize,
    k: usize,
    rng: &mut DamRng,
) -> Result<NetworkState> {
    patterns.check_pattern(target)?;
    let mut spins = patterns.pattern(target).to_vec();
    let mut pool: Vec<usize> = (0..spins.len()).collect();
    for i in rng.choose_distinct(&mut pool, k) {
        spins[i] = -spins[i];
    }
    NetworkState::new(patterns, spins)
}

fn correct_neurons(state: &NetworkState, patterns: &PatternSet, target: usize) -> Vec<usize> {
    let xi = patterns.pattern(target);
    (0..state.neurons())
        .filter(|&i| state.spin(i) == xi[i])
        .collect()
}

/// Flips the `k` correct neurons with the smallest `Φ_i·ξ_i^ν`, ordered once
/// against the pre-corruption state (ties by lower index). Returns the flipped
/// indices in that order.
pub fn adversary_strong(
    state: &mut NetworkState,
    patterns: &PatternSet,
    target: usize,
    budget: usize,
) -> Result<Vec<usize>> {
    patterns.check_pattern(target)?;
    if budget == 0 {
        return Ok(Vec::new());
    }
    let xi = patterns.pattern(target);
    let mut ranked: Vec<(i128, usize)> = correct_neurons(state, patterns, target)
        .into_iter()
        .map(|i| (state.phi_numerator(patterns, i) * i128::from(xi[i]), i))
        .collect();
    ranked.sort_unstable();
    let chosen: Vec<usize> = ranked.into_iter().take(budget).map(|(_, i)| i).collect();
    for &i in &chosen {
        state.flip_unchecked(patterns, i);
    }
    Ok(chosen)
}

/// Flips up to `k` uniformly chosen correct neurons whose field opposes the
/// target (`Φ_i·ξ_i^ν < 0`); leftover budget goes to uniformly chosen other
/// correct neurons. Returns the flipped indices.
pub fn adversary_weak(
    state: &mut NetworkState,
    patterns: &PatternSet,
    target: usize,
    budget: usize,
    rng: &mut DamRng,
) -> Result<Vec<usize>> {
    patterns.check_pattern(target)?;
    if budget == 0 {
        return Ok(Vec::new());
    }
    let xi = patterns.pattern(target);
    let (mut opposing, mut others): (Vec<usize>, Vec<usize>) =
        correct_neurons(state, patterns, target)
            .into_iter()
            .partition(|&i| state.phi_numerator(patterns, i) * i128::from(xi[i]) < 0);
    let mut chosen = rng.choose_distinct(&mut opposing, budget);
    let remaining = budget - chosen.len();
    if remaining > 0 {
        chosen.extend(rng.choose_distinct(&mut others, remaining));
    }
    for &i in &chosen {
        state.flip_unchecked(patterns, i);
    }
    Ok(chosen)
}

/// Applies one adversary round with the configured model.
pub fn corrupt_round(
    model: AdversaryModel,
    state: &mut NetworkState,
    patterns: &PatternSet,
    target: usize,
    budget: usize,
    rng: &mut DamRng,
) -> Result<Vec<usize>> {
    match model {
        AdversaryModel::Strong => adversary_strong(state, patterns, target, budget),
        AdversaryModel::Weak => adversary_weak(state, patterns, target, budget, rng),
        AdversaryModel::None => Ok(Vec::new()),
    }
}

/// Starts at overlap `gamma0` (`round(N(1−γ₀)/2)` random flips of `ξ^ν`), then
/// runs `rounds` iterations of [adversary, one async sweep]. Success is judged
/// once, after the last round, against `sweep.omega`.
pub fn robustness_protocol(
    patterns: &PatternSet,
    target: usize,
    adversary: &AdversaryConfig,
    sweep: &SweepConfig,
    rng: &mut DamRng,
) -> Result<TrialOutcome> {
    adversary.validate()?;
    sweep.validate()?;
    let n = patterns.neurons();
    let initial_flips = (n as f64 * (1.0 - adversary.gamma0) / 2.0).round() as usize;
    let mut state = corrupt_count(patterns, target, initial_flips, rng)?;
    let budget = adversary.budget(n);
    let mut flips_total = 0;
    for _ in 0..adversary.rounds {
        corrupt_round(adversary.model, &mut state, patterns, target, budget, rng)?;
        flips_total += async_sweep(&mut state, patterns, rng);
    }
    Ok(TrialOutcome {
        converged: state.matching_fraction(target) >= sweep.omega,
        sweeps_used: adversary.rounds,
        final_overlap: state.overlap(patterns, target)?,
        flips_total,
        final_potential: state.potential(patterns).numerator,
        potential_trace: None,
    })
}
