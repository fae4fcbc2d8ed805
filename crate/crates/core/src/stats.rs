//! Summary statistics used by the experiment runners.

use crate::{DamError, DamRng, Result};

pub const DEFAULT_RESAMPLES: usize = 2000;
pub const DEFAULT_LEVEL: f64 = 0.95;

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Percentile bootstrap CI of the sample mean (nearest-rank percentiles).
pub fn bootstrap_ci(
    samples: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut DamRng,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(DamError::EmptyInput("bootstrap samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(DamError::InvalidConfig(format!(
            "CI level {level} must lie in (0, 1)"
        )));
    }
    if resamples == 0 {
        return Err(DamError::InvalidConfig("resamples must be positive".into()));
    }
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let total: f64 = (0..n).map(|_| samples[rng.index(n)]).sum();
            total / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((nearest_rank(&means, tail), nearest_rank(&means, 1.0 - tail)))
}

/// Nearest-rank percentile of sorted data: element `⌈q·n⌉` (1-based).
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    // Guard the product against representation error (0.025·2000 = 50.000…01).
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEstimate {
    /// Linearly interpolated 50% crossing.
    pub raw: f64,
    /// `raw` rounded to the grid step.
    pub reported: f64,
    /// False when the curve never crosses 0.5; `raw` is then a boundary value.
    pub crossed: bool,
}

/// Locates the 50% success crossing of a curve sorted by ρ.
///
/// Interpolates between the last point with success ≥ 0.5 and the point after
/// it. If every point is ≥ 0.5 the largest ρ is returned; if none is, the
/// smallest. Both cases are flagged.
pub fn estimate_threshold(curve: &[(f64, f64)], grid_step: f64) -> Result<ThresholdEstimate> {
    if curve.is_empty() {
        return Err(DamError::EmptyInput("threshold curve"));
    }
    if curve.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(DamError::InvalidConfig(
            "threshold curve must be sorted by rho".into(),
        ));
    }
    let round = |x: f64| {
        if grid_step > 0.0 {
            (x / grid_step).round() * grid_step
        } else {
            x
        }
    };
    let boundary = |x: f64| ThresholdEstimate {
        raw: x,
        reported: round(x),
        crossed: false,
    };
    let Some(last_high) = curve.iter().rposition(|&(_, s)| s >= 0.5) else {
        return Ok(boundary(curve[0].0));
    };
    let Some(&(rho_b, s_b)) = curve.get(last_high + 1) else {
        return Ok(boundary(curve[last_high].0));
    };
    let (rho_a, s_a) = curve[last_high];
    let raw = rho_a + (s_a - 0.5) / (s_a - s_b) * (rho_b - rho_a);
    Ok(ThresholdEstimate {
        raw,
        reported: round(raw),
        crossed: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`: `y ≈ prefactor · x^exponent`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(DamError::InvalidConfig(
            "power-law fit needs at least 2 points".into(),
        ));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(DamError::InvalidConfig(
            "power-law fit needs positive values".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DamError::InvalidConfig(
            "power-law fit needs distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        prefactor: intercept.exp(),
        exponent: slope,
        r_squared,
    })
}
