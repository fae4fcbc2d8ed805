//! Zero-temperature best-response dynamics.
//!
//! One asynchronous sweep visits every neuron once in a fresh uniform random
//! order; one synchronous sweep updates all neurons against the frozen
//! pre-sweep state. Convergence is checked after each completed sweep.

use crate::model::{NetworkState, PatternSet};
use crate::{DamError, DamRng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UpdateMode {
    Asynchronous,
    Synchronous,
}

impl UpdateMode {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::Asynchronous => "async",
            UpdateMode::Synchronous => "sync",
        }
    }
}

impl std::str::FromStr for UpdateMode {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "async" | "asynchronous" => Ok(UpdateMode::Asynchronous),
            "sync" | "synchronous" | "parallel" => Ok(UpdateMode::Synchronous),
            other => Err(DamError::InvalidConfig(format!(
                "unknown update mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mode: UpdateMode,
    pub max_sweeps: usize,
    /// Required fraction of neurons matching the target.
    pub omega: f64,
    pub target: usize,
    /// Record the potential numerator after every sweep.
    pub record_potential: bool,
}

impl SweepConfig {
    pub const DEFAULT_MAX_SWEEPS: usize = 60;
    pub const DEFAULT_OMEGA: f64 = 0.95;

    pub fn new(target: usize) -> Self {
        Self {
            mode: UpdateMode::Asynchronous,
            max_sweeps: Self::DEFAULT_MAX_SWEEPS,
            omega: Self::DEFAULT_OMEGA,
            target,
            record_potential: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(DamError::InvalidConfig(format!(
                "omega = {} must lie in (0, 1]",
                self.omega
            )));
        }
        if self.max_sweeps == 0 {
            return Err(DamError::InvalidConfig(
                "max_sweeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub converged: bool,
    pub sweeps_used: usize,
    /// `m^ν` at the end of the trial.
    pub final_overlap: f64,
    pub flips_total: usize,
    /// Numerator of the final potential (denominator `N^{n-1}`).
    pub final_potential: i128,
    pub potential_trace: Option<Vec<i128>>,
}

/// One asynchronous sweep; returns the number of flips.
pub fn async_sweep(state: &mut NetworkState, patterns: &PatternSet, rng: &mut DamRng) -> usize {
    let order = rng.permutation(state.neurons());
    let mut flips = 0;
    for i in order {
        if state.best_response_unchecked(patterns, i) != state.spin(i) {
            state.flip_unchecked(patterns, i);
            flips += 1;
        }
    }
    flips
}

/// One synchronous step: every best response is computed against the frozen
/// state, then applied at once. Ties keep the old spin.
pub fn sync_sweep(state: &mut NetworkState, patterns: &PatternSet) -> usize {
    let next: Vec<i8> = (0..state.neurons())
        .map(|i| state.best_response_unchecked(patterns, i))
        .collect();
    let flips = next
        .iter()
        .zip(state.spins())
        .filter(|(a, b)| a != b)
        .count();
    if flips > 0 {
        state.set_spins(patterns, next);
    }
    flips
}

/// Runs sweeps until the matching fraction with the target reaches `omega`
/// (checked after each sweep) or `max_sweeps` is exhausted.
///
/// A sweep with no flips leaves the state at a fixed point of the chosen
/// update rule, so the loop stops there without changing the outcome.
pub fn retrieve(
    patterns: &PatternSet,
    mut state: NetworkState,
    config: &SweepConfig,
    rng: &mut DamRng,
) -> Result<TrialOutcome> {
    run_in_place(patterns, &mut state, config, rng)
}

/// Like [`retrieve`] but also returns the terminal state.
pub fn retrieve_with_state(
    patterns: &PatternSet,
    mut state: NetworkState,
    config: &SweepConfig,
    rng: &mut DamRng,
) -> Result<(TrialOutcome, NetworkState)> {
    let outcome = run_in_place(patterns, &mut state, config, rng)?;
    Ok((outcome, state))
}

fn run_in_place(
    patterns: &PatternSet,
    state: &mut NetworkState,
    config: &SweepConfig,
    rng: &mut DamRng,
) -> Result<TrialOutcome> {
    config.validate()?;
    patterns.check_pattern(config.target)?;
    if state.neurons() != patterns.neurons() {
        return Err(DamError::DimensionMismatch {
            expected: patterns.neurons(),
            actual: state.neurons(),
        });
    }
    let target = config.target;
    let mut trace = config
        .record_potential
        .then(|| vec![state.potential(patterns).numerator]);
    let mut flips_total = 0;
    let mut sweeps = 0;
    let mut converged = state.matching_fraction(target) >= config.omega;

    while !converged && sweeps < config.max_sweeps {
        let flips = match config.mode {
            UpdateMode::Asynchronous => async_sweep(state, patterns, rng),
            UpdateMode::Synchronous => sync_sweep(state, patterns),
        };
        sweeps += 1;
        flips_total += flips;
        if let Some(trace) = trace.as_mut() {
            trace.push(state.potential(patterns).numerator);
        }
        converged = state.matching_fraction(target) >= config.omega;
        if flips == 0 {
            break;
        }
    }

    Ok(TrialOutcome {
        converged,
        sweeps_used: sweeps,
        final_overlap: state.overlap(patterns, target)?,
        flips_total,
        final_potential: state.potential(patterns).numerator,
        potential_trace: trace,
    })
}

/// Largest dimension accepted by [`enumerate_fixed_points`].
pub const MAX_ENUMERATION_NEURONS: usize = 16;

/// Every state satisfying `x_i·Φ_i ≥ 0` for all `i`, in lexicographic order of
/// the spin vectors (−1 before +1).
pub fn enumerate_fixed_points(patterns: &PatternSet) -> Result<Vec<Vec<i8>>> {
    let n = patterns.neurons();
    if n > MAX_ENUMERATION_NEURONS {
        return Err(DamError::InvalidConfig(format!(
            "enumeration needs N ≤ {MAX_ENUMERATION_NEURONS}, got {n}"
        )));
    }
    // Gray-code walk: one O(p) flip per visited state.
    let mut state = NetworkState::new(patterns, vec![-1; n])?;
    let mut fixed = Vec::new();
    for step in 0u32..(1u32 << n) {
        if step > 0 {
            state.flip_unchecked(patterns, step.trailing_zeros() as usize);
        }
        if state.is_fixed_point(patterns) {
            fixed.push(state.spins().to_vec());
        }
    }
    fixed.sort();
    Ok(fixed)
}
