//! Closed-form theory quantities and sampled checks of the separation and
//! componentwise-interference conditions.

use num_rational::Ratio;
use rayon::prelude::*;

use crate::dynamics::async_sweep;
use crate::model::{ModelParams, NetworkState, PatternSet};
use crate::{DamError, DamRng, Result};

/// Basin parameter used when none is given.
pub const DEFAULT_GAMMA: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryQuantities {
    pub order: u32,
    pub neurons: usize,
    pub patterns: usize,
    /// `p / N^{n-1}`.
    pub loading: f64,
    /// `1/n − 2(n−1)p/N^{n-1}`.
    pub contraction: f64,
    /// Same value as `contraction`, under the name used in experiment tables.
    pub alpha_rate: f64,
    /// `contraction / 2`.
    pub rho_star_alpha: f64,
    /// `(γ − n(n−1)·loading)/2`, when γ is given.
    pub rho_star_gamma: Option<f64>,
    /// `(γ − (n−1)β)/2`, when both γ and β are given.
    pub rho_star_beta: Option<f64>,
    /// `N^{n-1} / (4n²(n−1)²)`.
    pub cap_lower: f64,
    /// `2N^{n-1} / n`.
    pub cap_upper: f64,
    /// Loading in the `α'_n = n·p/N^{n-1}` normalization.
    pub mimura_alpha3: f64,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
}

pub fn theory(params: &ModelParams, gamma: Option<f64>, beta: Option<f64>) -> TheoryQuantities {
    let n = f64::from(params.order());
    let scale = params.scale() as f64;
    let loading = params.loading();
    let contraction = 1.0 / n - 2.0 * (n - 1.0) * loading;
    TheoryQuantities {
        order: params.order(),
        neurons: params.neurons(),
        patterns: params.patterns(),
        loading,
        contraction,
        alpha_rate: 1.0 / n - 2.0 * (n - 1.0) * loading,
        rho_star_alpha: contraction / 2.0,
        rho_star_gamma: gamma.map(|g| rho_star_gamma(params, g)),
        rho_star_beta: match (gamma, beta) {
            (Some(g), Some(b)) => Some(rho_star_beta(params.order(), g, b)),
            _ => None,
        },
        cap_lower: scale / (4.0 * n * n * (n - 1.0) * (n - 1.0)),
        cap_upper: 2.0 * scale / n,
        mimura_alpha3: n * loading,
        gamma,
        beta,
    }
}

pub fn rho_star_gamma(params: &ModelParams, gamma: f64) -> f64 {
    let n = f64::from(params.order());
    (gamma - n * (n - 1.0) * params.loading()) / 2.0
}

pub fn rho_star_beta(order: u32, gamma: f64, beta: f64) -> f64 {
    (gamma - (f64::from(order) - 1.0) * beta) / 2.0
}

/// The contraction rate as an exact rational.
pub fn contraction_exact(params: &ModelParams) -> Ratio<i128> {
    let n = i128::from(params.order());
    let scale = params.scale();
    Ratio::new(
        scale - 2 * n * (n - 1) * params.patterns() as i128,
        n * scale,
    )
}

pub fn rho_star_alpha_exact(params: &ModelParams) -> Ratio<i128> {
    contraction_exact(params) / 2
}

/// `p < N^{n-1} / (2n(n−1))`, decided exactly.
pub fn contraction_positive(params: &ModelParams) -> bool {
    let n = i128::from(params.order());
    2 * n * (n - 1) * (params.patterns() as i128) < params.scale()
}

/// Pattern count for loading `α = p/N^{n-1}`, rounded to nearest.
pub fn patterns_for_loading(order: u32, neurons: usize, alpha: f64) -> usize {
    let scale = (neurons as f64).powi(order as i32 - 1);
    (alpha * scale).round().max(1.0) as usize
}

/// Pattern count for a Mimura loading `α'_n = n·p/N^{n-1}`:
/// `⌊(α'_n / n)·N^{n-1}⌋`, evaluated in that order in double precision.
pub fn patterns_for_mimura(order: u32, neurons: usize, alpha_prime: f64) -> usize {
    let scale = (neurons as f64).powi(order as i32 - 1);
    ((alpha_prime / f64::from(order)) * scale).floor().max(1.0) as usize
}

/// `max_{μ≠ν} |⟨ξ^μ, ξ^ν⟩| / N` from exact inner products.
///
/// Returns 0 when fewer than two patterns are stored.
pub fn beta_patterns(patterns: &PatternSet) -> f64 {
    let p = patterns.len();
    if p < 2 {
        return 0.0;
    }
    let n = patterns.neurons();
    let words = n.div_ceil(64);
    let mut packed = vec![0u64; p * words];
    for mu in 0..p {
        for (i, &v) in patterns.pattern(mu).iter().enumerate() {
            if v > 0 {
                packed[mu * words + i / 64] |= 1 << (i % 64);
            }
        }
    }
    let max_abs = (0..p)
        .into_par_iter()
        .map(|mu| {
            let a = &packed[mu * words..(mu + 1) * words];
            (mu + 1..p)
                .map(|nu| {
                    let b = &packed[nu * words..(nu + 1) * words];
                    let hamming: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
                    (n as i64 - 2 * i64::from(hamming)).unsigned_abs()
                })
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    max_abs as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationEstimate {
    /// Exact max pairwise pattern overlap.
    pub beta_patterns: f64,
    /// Sampled `max_{μ≠ν} |m^μ|` over basin states.
    pub beta_state_hat: f64,
    /// Sampled `max_i |Σ_{μ≠ν} ξ_i^μ (m^μ)^{n-1}|`.
    pub lambda_hat: f64,
    pub gamma: f64,
    /// `λ̂ < γ^{n-1}`.
    pub dominant: bool,
    /// Reported margin `(n/2)(γ^{n-1} − λ̂)`.
    pub margin: f64,
    pub samples_used: usize,
}

/// Sweeps run from each boundary sample to collect trajectory states.
const TRAJECTORY_SWEEPS: usize = 10;

/// Samples basin-boundary states (ξ^ν with `⌊N(1−γ)/2⌋` random flips) plus the
/// states visited by asynchronous retrieval from them while `m^ν ≥ γ`, and
/// reports the worst non-target overlap and componentwise interference seen.
pub fn estimate_separation(
    patterns: &PatternSet,
    target: usize,
    gamma: f64,
    sample_count: usize,
    rng: &mut DamRng,
) -> Result<SeparationEstimate> {
    patterns.check_pattern(target)?;
    check_gamma(gamma)?;
    if sample_count == 0 {
        return Err(DamError::InvalidConfig(
            "sample_count must be positive".into(),
        ));
    }
    let n = patterns.neurons();
    let order = patterns.order();
    let flips = ((n as f64) * (1.0 - gamma) / 2.0).floor() as usize;

    let mut beta_state_hat = 0.0f64;
    let mut lambda_hat = 0.0f64;
    let mut samples_used = 0;
    let mut record = |state: &NetworkState| {
        let (beta, lambda) = interference(patterns, state, target);
        beta_state_hat = beta_state_hat.max(beta);
        lambda_hat = lambda_hat.max(lambda);
        samples_used += 1;
    };

    for _ in 0..sample_count {
        let mut state = boundary_state(patterns, target, flips, rng)?;
        record(&state);
        for _ in 0..TRAJECTORY_SWEEPS {
            let changed = async_sweep(&mut state, patterns, rng);
            if state.overlap(patterns, target)? >= gamma {
                record(&state);
            }
            if changed == 0 {
                break;
            }
        }
    }

    let signal = gamma.powi(order as i32 - 1);
    Ok(SeparationEstimate {
        beta_patterns: beta_patterns(patterns),
        beta_state_hat,
        lambda_hat,
        gamma,
        dominant: lambda_hat < signal,
        margin: f64::from(order) / 2.0 * (signal - lambda_hat),
        samples_used,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(DamError::InvalidConfig(format!(
            "gamma = {gamma} must lie in (0, 1)"
        )))
    }
}

fn boundary_state(
    patterns: &PatternSet,
    target: usize,
    flips: usize,
    rng: &mut DamRng,
) -> Result<NetworkState> {
    let mut spins = patterns.pattern(target).to_vec();
    let mut pool: Vec<usize> = (0..spins.len()).collect();
    for i in rng.choose_distinct(&mut pool, flips) {
        spins[i] = -spins[i];
    }
    NetworkState::new(patterns, spins)
}

/// `(max_{μ≠ν}|m^μ|, max_i |Σ_{μ≠ν} ξ_i^μ (m^μ)^{n-1}|)` for one state, with the
/// inner sums taken exactly over integer overlaps.
fn interference(patterns: &PatternSet, state: &NetworkState, target: usize) -> (f64, f64) {
    let n = patterns.neurons();
    let order = patterns.order();
    let overlaps = state.overlaps();
    let beta = overlaps
        .iter()
        .enumerate()
        .filter(|&(mu, _)| mu != target)
        .map(|(_, &m)| m.unsigned_abs())
        .max()
        .unwrap_or(0) as f64
        / n as f64;
    let powered: Vec<i128> = overlaps
        .iter()
        .enumerate()
        .map(|(mu, &m)| {
            if mu == target {
                0
            } else {
                i128::from(m).pow(order - 1)
            }
        })
        .collect();
    let worst = (0..n)
        .map(|i| {
            patterns
                .column(i)
                .iter()
                .zip(&powered)
                .map(|(&c, &w)| i128::from(c) * w)
                .sum::<i128>()
                .unsigned_abs()
        })
        .max()
        .unwrap_or(0);
    (beta, worst as f64 / patterns.params().scale() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProbe {
    pub trials: usize,
    pub start_overlap: f64,
    /// Mean `Δm^ν` over one asynchronous sweep.
    pub mean_gain_per_sweep: f64,
    /// `mean_gain_per_sweep / N`.
    pub mean_gain_per_update: f64,
    /// `(α/N)(1 − m)` at the start overlap.
    pub predicted_gain_per_update: f64,
    /// Empirical over predicted, when the prediction is non-zero.
    pub ratio: Option<f64>,
}

/// Measures the mean target-overlap gain of one asynchronous sweep started from
/// overlap `γ`, for comparison against the contraction-rate prediction.
pub fn contraction_probe(
    patterns: &PatternSet,
    target: usize,
    gamma: f64,
    trials: usize,
    rng: &mut DamRng,
) -> Result<ContractionProbe> {
    patterns.check_pattern(target)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(DamError::InvalidConfig(format!(
            "gamma = {gamma} must lie in (0, 1]"
        )));
    }
    if trials == 0 {
        return Err(DamError::InvalidConfig("trials must be positive".into()));
    }
    let n = patterns.neurons();
    let flips = ((n as f64) * (1.0 - gamma) / 2.0).floor() as usize;
    let mut total_gain = 0.0;
    let mut start_overlap = 0.0;
    for _ in 0..trials {
        let mut state = boundary_state(patterns, target, flips, rng)?;
        let before = state.overlap(patterns, target)?;
        async_sweep(&mut state, patterns, rng);
        total_gain += state.overlap(patterns, target)? - before;
        start_overlap = before;
    }
    let mean_gain_per_sweep = total_gain / trials as f64;
    let mean_gain_per_update = mean_gain_per_sweep / n as f64;
    let alpha = theory(patterns.params(), None, None).contraction;
    let predicted = alpha / n as f64 * (1.0 - start_overlap);
    Ok(ContractionProbe {
        trials,
        start_overlap,
        mean_gain_per_sweep,
        mean_gain_per_update,
        predicted_gain_per_update: predicted,
        ratio: (predicted != 0.0).then(|| mean_gain_per_update / predicted),
    })
}
