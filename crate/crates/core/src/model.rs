//! Exact-arithmetic model: parameters, stored patterns, and the network state
//! with its incrementally maintained overlap cache.

use crate::{DamError, Result};

/// Largest supported interaction order.
pub const MAX_ORDER: u32 = 8;

/// Which integer path evaluates the discrete marginal field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Order2,
    /// n = 3 with per-pattern terms in i32, summed in i64.
    Order3,
    /// Any order, i64 accumulator.
    Narrow,
    /// Any order, i128 accumulator.
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    order: u32,
    neurons: usize,
    patterns: usize,
    /// `C(n, 2k+1)` for `k = 0..=⌊(n-1)/2⌋`.
    odd_binomials: [i64; 4],
    kernel: Kernel,
}

impl ModelParams {
    /// Validates `n ≥ 2`, `N ≥ 1`, `p ≥ 1`, and that `p·(N+1)^n` fits the
    /// signed 128-bit accumulator used for exact potentials and fields.
    pub fn new(order: u32, neurons: usize, patterns: usize) -> Result<Self> {
        if order < 2 {
            return Err(DamError::InvalidParams(format!(
                "interaction order n = {order} must be at least 2"
            )));
        }
        if order > MAX_ORDER {
            return Err(DamError::InvalidParams(format!(
                "interaction order n = {order} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        if neurons == 0 {
            return Err(DamError::InvalidParams(
                "neuron count N must be at least 1".into(),
            ));
        }
        if patterns == 0 {
            return Err(DamError::InvalidParams(
                "pattern count p must be at least 1".into(),
            ));
        }
        if neurons > (i32::MAX / 2) as usize {
            return Err(DamError::InvalidParams(format!(
                "neuron count N = {neurons} is too large"
            )));
        }
        let bound = (neurons as i128 + 1)
            .checked_pow(order)
            .and_then(|b| b.checked_mul(patterns as i128))
            .ok_or(DamError::Overflow {
                order,
                neurons,
                patterns,
            })?;

        let mut odd_binomials = [0i64; 4];
        for (k, slot) in odd_binomials
            .iter_mut()
            .enumerate()
            .take(((order - 1) / 2 + 1) as usize)
        {
            *slot = binomial(order as u64, 2 * k as u64 + 1) as i64;
        }

        let kernel = if bound > i64::MAX as i128 {
            Kernel::Wide
        } else if order == 2 {
            Kernel::Order2
        } else if order == 3 && 3 * (neurons as i64) * (neurons as i64) < i32::MAX as i64 {
            Kernel::Order3
        } else {
            Kernel::Narrow
        };

        Ok(Self {
            order,
            neurons,
            patterns,
            odd_binomials,
            kernel,
        })
    }

    /// Same order and dimension with a different pattern count.
    pub fn with_patterns(&self, patterns: usize) -> Result<Self> {
        Self::new(self.order, self.neurons, patterns)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    /// `N^{n-1}`, the implicit denominator of potentials and fields.
    pub fn scale(&self) -> i128 {
        (self.neurons as i128).pow(self.order - 1)
    }

    /// `p / N^{n-1}`.
    pub fn loading(&self) -> f64 {
        self.patterns as f64 / self.scale() as f64
    }

    fn odd_terms(&self) -> usize {
        ((self.order - 1) / 2 + 1) as usize
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
}

/// `p` spin patterns of length `N`.
///
/// Stored row-major (one pattern per row) and additionally column-major so a
/// flip of neuron `i` reads one contiguous column of length `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    params: ModelParams,
    rows: Vec<i8>,
    columns: Vec<i8>,
}

impl PatternSet {
    /// `rows` holds `p·N` entries, pattern by pattern.
    pub fn new(params: ModelParams, rows: Vec<i8>) -> Result<Self> {
        let (n, p) = (params.neurons, params.patterns);
        if rows.len() != n * p {
            return Err(DamError::DimensionMismatch {
                expected: n * p,
                actual: rows.len(),
            });
        }
        if let Some(position) = rows.iter().position(|&v| v != 1 && v != -1) {
            return Err(DamError::InvalidSpin {
                position,
                value: i64::from(rows[position]),
            });
        }
        let mut columns = vec![0i8; n * p];
        for (mu, row) in rows.chunks_exact(n).enumerate() {
            for (i, &v) in row.iter().enumerate() {
                columns[i * p + mu] = v;
            }
        }
        Ok(Self {
            params,
            rows,
            columns,
        })
    }

    pub fn from_rows(order: u32, rows: &[Vec<i8>]) -> Result<Self> {
        let first = rows.first().ok_or(DamError::EmptyInput("pattern rows"))?;
        let params = ModelParams::new(order, first.len(), rows.len())?;
        let mut flat = Vec::with_capacity(first.len() * rows.len());
        for row in rows {
            if row.len() != first.len() {
                return Err(DamError::DimensionMismatch {
                    expected: first.len(),
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(params, flat)
    }

    /// Reinterprets the same patterns under a different interaction order.
    pub fn with_order(&self, order: u32) -> Result<Self> {
        let params = ModelParams::new(order, self.params.neurons, self.params.patterns)?;
        Ok(Self {
            params,
            rows: self.rows.clone(),
            columns: self.columns.clone(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn order(&self) -> u32 {
        self.params.order
    }

    pub fn neurons(&self) -> usize {
        self.params.neurons
    }

    pub fn len(&self) -> usize {
        self.params.patterns
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pattern(&self, mu: usize) -> &[i8] {
        let n = self.params.neurons;
        &self.rows[mu * n..(mu + 1) * n]
    }

    /// `ξ_i^μ` for all μ.
    pub fn column(&self, i: usize) -> &[i8] {
        let p = self.params.patterns;
        &self.columns[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> &[i8] {
        &self.rows
    }

    pub fn check_pattern(&self, mu: usize) -> Result<()> {
        if mu < self.params.patterns {
            Ok(())
        } else {
            Err(DamError::IndexOutOfRange {
                what: "pattern",
                index: mu,
                len: self.params.patterns,
            })
        }
    }

    pub fn check_neuron(&self, i: usize) -> Result<()> {
        if i < self.params.neurons {
            Ok(())
        } else {
            Err(DamError::IndexOutOfRange {
                what: "neuron",
                index: i,
                len: self.params.neurons,
            })
        }
    }
}

/// Exact potential `F = numerator / scale` with `scale = N^{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Potential {
    pub numerator: i128,
    pub scale: i128,
}

impl Potential {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.scale as f64
    }

    /// `E = -F`.
    pub fn energy(&self) -> f64 {
        -self.value()
    }
}

/// Discrete marginal field `φ_i = numerator / N^{n-1}`; `F(+1,x_{-i}) − F(−1,x_{-i}) = 2φ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhiValue {
    pub numerator: i128,
    pub scale: i128,
}

impl PhiValue {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.scale as f64
    }

    pub fn signum(&self) -> i8 {
        self.numerator.signum() as i8
    }
}

/// Spin vector plus the exact overlaps `M^μ = Σ_i ξ_i^μ x_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    spins: Vec<i8>,
    overlaps: Vec<i32>,
}

impl NetworkState {
    pub fn new(patterns: &PatternSet, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != patterns.neurons() {
            return Err(DamError::DimensionMismatch {
                expected: patterns.neurons(),
                actual: spins.len(),
            });
        }
        if let Some(position) = spins.iter().position(|&v| v != 1 && v != -1) {
            return Err(DamError::InvalidSpin {
                position,
                value: i64::from(spins[position]),
            });
        }
        let mut state = Self {
            spins,
            overlaps: vec![0; patterns.len()],
        };
        state.rebuild_cache(patterns);
        Ok(state)
    }

    /// The state `x = ξ^μ`.
    pub fn aligned(patterns: &PatternSet, mu: usize) -> Result<Self> {
        patterns.check_pattern(mu)?;
        Self::new(patterns, patterns.pattern(mu).to_vec())
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spin(&self, i: usize) -> i8 {
        self.spins[i]
    }

    /// Unnormalized overlaps `M^μ`.
    pub fn overlaps(&self) -> &[i32] {
        &self.overlaps
    }

    pub fn neurons(&self) -> usize {
        self.spins.len()
    }

    /// Normalized overlap `m^μ = M^μ / N`.
    pub fn overlap(&self, patterns: &PatternSet, mu: usize) -> Result<f64> {
        patterns.check_pattern(mu)?;
        Ok(f64::from(self.overlaps[mu]) / self.spins.len() as f64)
    }

    /// Fraction of neurons agreeing with pattern `mu`, `(1 + m^μ)/2`.
    pub fn matching_fraction(&self, mu: usize) -> f64 {
        let n = self.spins.len() as f64;
        (n + f64::from(self.overlaps[mu])) / (2.0 * n)
    }

    /// Count of neurons agreeing with pattern `mu`.
    pub fn matching_count(&self, mu: usize) -> usize {
        ((self.spins.len() as i64 + i64::from(self.overlaps[mu])) / 2) as usize
    }

    pub fn potential(&self, patterns: &PatternSet) -> Potential {
        let order = patterns.order();
        let numerator = self
            .overlaps
            .iter()
            .map(|&m| i128::from(m).pow(order))
            .sum();
        Potential {
            numerator,
            scale: patterns.params().scale(),
        }
    }

    pub fn phi(&self, patterns: &PatternSet, i: usize) -> Result<PhiValue> {
        patterns.check_neuron(i)?;
        Ok(PhiValue {
            numerator: self.phi_numerator(patterns, i),
            scale: patterns.params().scale(),
        })
    }

    /// `Φ_i = Σ_μ ξ_i^μ Σ_k C(n,2k+1) (S_μ^{-i})^{n-2k-1}` with
    /// `S_μ^{-i} = M^μ − ξ_i^μ x_i`. Panics if `i` is out of range.
    pub fn phi_numerator(&self, patterns: &PatternSet, i: usize) -> i128 {
        let column = patterns.column(i);
        let xi = self.spins[i];
        let params = patterns.params();
        match params.kernel {
            Kernel::Order2 => i128::from(phi_order2(&self.overlaps, column, xi)),
            Kernel::Order3 => i128::from(phi_order3(&self.overlaps, column, xi)),
            Kernel::Narrow => i128::from(phi_narrow(&self.overlaps, column, xi, params)),
            Kernel::Wide => phi_wide(&self.overlaps, column, xi, params),
        }
    }

    /// `sign(Φ_i)`, or the current spin on a tie.
    pub fn best_response(&self, patterns: &PatternSet, i: usize) -> Result<i8> {
        patterns.check_neuron(i)?;
        Ok(self.best_response_unchecked(patterns, i))
    }

    #[inline]
    pub(crate) fn best_response_unchecked(&self, patterns: &PatternSet, i: usize) -> i8 {
        match self.phi_numerator(patterns, i).signum() {
            0 => self.spins[i],
            s => s as i8,
        }
    }

    /// Negates `x_i` and updates every overlap in O(p).
    pub fn apply_flip(&mut self, patterns: &PatternSet, i: usize) -> Result<()> {
        patterns.check_neuron(i)?;
        self.flip_unchecked(patterns, i);
        Ok(())
    }

    #[inline]
    pub(crate) fn flip_unchecked(&mut self, patterns: &PatternSet, i: usize) {
        let delta = -2 * i32::from(self.spins[i]);
        for (m, &c) in self.overlaps.iter_mut().zip(patterns.column(i)) {
            *m += i32::from(c) * delta;
        }
        self.spins[i] = -self.spins[i];
    }

    /// Recomputes every overlap from scratch.
    pub fn rebuild_cache(&mut self, patterns: &PatternSet) {
        let n = patterns.neurons();
        self.overlaps.resize(patterns.len(), 0);
        for (mu, m) in self.overlaps.iter_mut().enumerate() {
            *m = patterns.rows()[mu * n..(mu + 1) * n]
                .iter()
                .zip(&self.spins)
                .map(|(&a, &b)| i32::from(a) * i32::from(b))
                .sum();
        }
    }

    /// Replaces the spin vector wholesale and rebuilds the cache.
    pub(crate) fn set_spins(&mut self, patterns: &PatternSet, spins: Vec<i8>) {
        self.spins = spins;
        self.rebuild_cache(patterns);
    }

    /// True iff `x_i·Φ_i ≥ 0` for every neuron.
    pub fn is_fixed_point(&self, patterns: &PatternSet) -> bool {
        (0..self.spins.len())
            .all(|i| i128::from(self.spins[i]) * self.phi_numerator(patterns, i) >= 0)
    }

    /// Numerator of the formal derivative `h_i = n Σ_μ ξ_i^μ (M^μ)^{n-1} / N^{n-1}`.
    ///
    /// Diagnostic only; updates never use it.
    pub fn formal_field_numerator(&self, patterns: &PatternSet, i: usize) -> Result<i128> {
        patterns.check_neuron(i)?;
        let order = patterns.order();
        let sum: i128 = self
            .overlaps
            .iter()
            .zip(patterns.column(i))
            .map(|(&m, &c)| i128::from(c) * i128::from(m).pow(order - 1))
            .sum();
        Ok(i128::from(order) * sum)
    }

    /// Neurons where the update implied by `sign(h_i)` (tie keeps the spin)
    /// differs from the best response `sign(Φ_i)`.
    pub fn field_disagreements(&self, patterns: &PatternSet) -> usize {
        (0..self.spins.len())
            .filter(|&i| {
                let formal = match self
                    .formal_field_numerator(patterns, i)
                    .unwrap_or(0)
                    .signum()
                {
                    0 => self.spins[i],
                    s => s as i8,
                };
                formal != self.best_response_unchecked(patterns, i)
            })
            .count()
    }
}

// The kernels below use wrapping arithmetic: the constructor bound guarantees
// no overflow, and wrapping ops keep the loops vectorizable.

#[inline]
fn phi_order2(overlaps: &[i32], column: &[i8], xi: i8) -> i64 {
    // ξ·2S = 2(ξM − x) since ξ² = 1.
    let sum: i64 = overlaps
        .iter()
        .zip(column)
        .map(|(&m, &c)| i64::from(i32::from(c).wrapping_mul(m)))
        .fold(0i64, i64::wrapping_add);
    2 * (sum - overlaps.len() as i64 * i64::from(xi))
}

#[inline]
fn phi_order3(overlaps: &[i32], column: &[i8], xi: i8) -> i64 {
    let xi = i32::from(xi);
    overlaps
        .iter()
        .zip(column)
        .map(|(&m, &c)| {
            let c = i32::from(c);
            let s = m.wrapping_sub(c.wrapping_mul(xi));
            i64::from(c.wrapping_mul(3i32.wrapping_mul(s.wrapping_mul(s)).wrapping_add(1)))
        })
        .fold(0i64, i64::wrapping_add)
}

#[inline]
fn phi_narrow(overlaps: &[i32], column: &[i8], xi: i8, params: &ModelParams) -> i64 {
    let terms = params.odd_terms();
    let coeffs = &params.odd_binomials[..terms];
    let odd_tail = (params.order - 1) % 2 == 1;
    let xi = i64::from(xi);
    overlaps
        .iter()
        .zip(column)
        .map(|(&m, &c)| {
            let c = i64::from(c);
            let s = i64::from(m) - c * xi;
            let s2 = s.wrapping_mul(s);
            let mut q = coeffs[0];
            for &b in &coeffs[1..] {
                q = q.wrapping_mul(s2).wrapping_add(b);
            }
            if odd_tail {
                q = q.wrapping_mul(s);
            }
            c * q
        })
        .fold(0i64, i64::wrapping_add)
}

fn phi_wide(overlaps: &[i32], column: &[i8], xi: i8, params: &ModelParams) -> i128 {
    let terms = params.odd_terms();
    let coeffs = &params.odd_binomials[..terms];
    let odd_tail = (params.order - 1) % 2 == 1;
    let xi = i128::from(xi);
    overlaps
        .iter()
        .zip(column)
        .map(|(&m, &c)| {
            let c = i128::from(c);
            let s = i128::from(m) - c * xi;
            let s2 = s * s;
            let mut q = i128::from(coeffs[0]);
            for &b in &coeffs[1..] {
                q = q * s2 + i128::from(b);
            }
            if odd_tail {
                q *= s;
            }
            c * q
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DamRng;
    use proptest::prelude::*;

    fn single(order: u32, xi: &[i8]) -> PatternSet {
        PatternSet::from_rows(order, &[xi.to_vec()]).unwrap()
    }

    /// Oracle: potential numerator evaluated with spin i forced to `value`.
    fn potential_with(patterns: &PatternSet, spins: &[i8], i: usize, value: i8) -> i128 {
        let mut x = spins.to_vec();
        x[i] = value;
        let order = patterns.order();
        (0..patterns.len())
            .map(|mu| {
                let m: i128 = patterns
                    .pattern(mu)
                    .iter()
                    .zip(&x)
                    .map(|(&a, &b)| i128::from(a) * i128::from(b))
                    .sum();
                m.pow(order)
            })
            .sum()
    }

    fn random_set(order: u32, n: usize, p: usize, rng: &mut DamRng) -> PatternSet {
        let params = ModelParams::new(order, n, p).unwrap();
        PatternSet::new(params, (0..n * p).map(|_| rng.spin()).collect()).unwrap()
    }

    fn random_state(patterns: &PatternSet, rng: &mut DamRng) -> NetworkState {
        let spins = (0..patterns.neurons()).map(|_| rng.spin()).collect();
        NetworkState::new(patterns, spins).unwrap()
    }

    #[test]
    fn params_reject_invalid() {
        assert!(ModelParams::new(1, 10, 1).is_err());
        assert!(ModelParams::new(3, 0, 1).is_err());
        assert!(ModelParams::new(3, 10, 0).is_err());
        assert!(ModelParams::new(9, 10, 1).is_err());
        assert!(matches!(
            ModelParams::new(8, 1_000_000, 1_000_000_000),
            Err(DamError::Overflow { .. })
        ));
        assert!(ModelParams::new(8, 1000, 1000).is_ok());
    }

    #[test]
    fn kernels_agree_with_wide_path() {
        let mut rng = DamRng::new(5);
        for order in 2..=6 {
            let patterns = random_set(order, 17, 9, &mut rng);
            let state = random_state(&patterns, &mut rng);
            for i in 0..17 {
                let wide = phi_wide(
                    state.overlaps(),
                    patterns.column(i),
                    state.spin(i),
                    patterns.params(),
                );
                assert_eq!(state.phi_numerator(&patterns, i), wide, "order {order}");
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let patterns = single(3, &[1, 1, 1]);
        let aligned = NetworkState::aligned(&patterns, 0).unwrap();
        assert_eq!(aligned.overlap(&patterns, 0).unwrap(), 1.0);
        let anti = NetworkState::new(&patterns, vec![-1, -1, -1]).unwrap();
        assert_eq!(anti.overlap(&patterns, 0).unwrap(), -1.0);
        let one_off = NetworkState::new(&patterns, vec![1, 1, -1]).unwrap();
        assert!((one_off.overlap(&patterns, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            one_off.overlap(&patterns, 1),
            Err(DamError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn potential_examples() {
        let patterns = single(3, &[1, 1, 1]);
        let aligned = NetworkState::aligned(&patterns, 0).unwrap();
        let f = aligned.potential(&patterns);
        assert_eq!((f.numerator, f.scale), (27, 9));
        assert_eq!(f.energy(), -3.0);

        let one_off = NetworkState::new(&patterns, vec![1, 1, -1]).unwrap();
        let f = one_off.potential(&patterns);
        assert_eq!((f.numerator, f.scale), (1, 9));

        let mirrored = PatternSet::from_rows(3, &[vec![1, -1, 1, 1], vec![-1, 1, -1, -1]]).unwrap();
        let state = NetworkState::aligned(&mirrored, 0).unwrap();
        assert_eq!(state.potential(&mirrored).numerator, 0);
    }

    #[test]
    fn phi_examples() {
        let patterns = single(3, &[1, 1, 1]);
        let state = NetworkState::new(&patterns, vec![1, 1, -1]).unwrap();
        let phi = state.phi(&patterns, 2).unwrap();
        assert_eq!((phi.numerator, phi.scale), (13, 9));
        // F(+) − F(−) = 27/9 − 1/9 = 2·13/9.
        let diff = potential_with(&patterns, state.spins(), 2, 1)
            - potential_with(&patterns, state.spins(), 2, -1);
        assert_eq!(diff, 2 * phi.numerator);
        assert_eq!(state.best_response(&patterns, 2).unwrap(), 1);
        assert!(state.phi(&patterns, 3).is_err());
    }

    #[test]
    fn phi_sign_matches_pattern_at_alignment() {
        let xi = [1i8, -1, -1, 1];
        let patterns = single(3, &xi);
        let state = NetworkState::aligned(&patterns, 0).unwrap();
        for (i, &v) in xi.iter().enumerate() {
            assert_eq!(state.phi(&patterns, i).unwrap().signum(), v);
        }
    }

    #[test]
    fn mirrored_patterns_cancel() {
        let mut rng = DamRng::new(9);
        let xi: Vec<i8> = (0..8).map(|_| rng.spin()).collect();
        let neg: Vec<i8> = xi.iter().map(|v| -v).collect();
        let patterns = PatternSet::from_rows(3, &[xi, neg]).unwrap();
        for _ in 0..10 {
            let state = random_state(&patterns, &mut rng);
            for i in 0..8 {
                assert_eq!(state.phi_numerator(&patterns, i), 0);
                // Tie keeps the current spin.
                assert_eq!(state.best_response(&patterns, i).unwrap(), state.spin(i));
            }
        }
    }

    #[test]
    fn apply_flip_examples() {
        let patterns = single(3, &[1, 1, 1]);
        let mut state = NetworkState::new(&patterns, vec![1, 1, -1]).unwrap();
        assert_eq!(state.overlaps(), &[1]);
        state.apply_flip(&patterns, 2).unwrap();
        assert_eq!(state.overlaps(), &[3]);

        let before = state.clone();
        state.apply_flip(&patterns, 0).unwrap();
        state.apply_flip(&patterns, 0).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn rebuild_after_many_flips_is_a_no_op() {
        let mut rng = DamRng::new(17);
        let patterns = random_set(3, 40, 12, &mut rng);
        let mut state = random_state(&patterns, &mut rng);
        for _ in 0..1000 {
            let i = rng.index(40);
            state.apply_flip(&patterns, i).unwrap();
        }
        let mut rebuilt = state.clone();
        rebuilt.rebuild_cache(&patterns);
        assert_eq!(rebuilt, state);
    }

    #[test]
    fn fixed_point_examples() {
        let xi = [1i8, -1, 1, 1];
        let patterns = single(3, &xi);
        assert!(NetworkState::aligned(&patterns, 0)
            .unwrap()
            .is_fixed_point(&patterns));
        let anti: Vec<i8> = xi.iter().map(|v| -v).collect();
        assert!(!NetworkState::new(&patterns, anti)
            .unwrap()
            .is_fixed_point(&patterns));

        // Exhaustive: exactly one fixed point among the 16 states.
        let mut fixed = Vec::new();
        for code in 0u32..16 {
            let spins: Vec<i8> = (0..4)
                .map(|b| if code >> b & 1 == 1 { 1 } else { -1 })
                .collect();
            let state = NetworkState::new(&patterns, spins.clone()).unwrap();
            if state.is_fixed_point(&patterns) {
                fixed.push(spins);
            }
        }
        assert_eq!(fixed, vec![xi.to_vec()]);
    }

    #[test]
    fn formal_field_is_diagnostic() {
        let patterns = single(3, &[1, 1, 1]);
        let state = NetworkState::new(&patterns, vec![1, 1, -1]).unwrap();
        // h_3 = 3·1·M² = 3 with M = 1.
        assert_eq!(state.formal_field_numerator(&patterns, 2).unwrap(), 3);
        assert_eq!(state.field_disagreements(&patterns), 0);
    }

    #[test]
    fn potential_upper_bound() {
        let mut rng = DamRng::new(23);
        for order in 2..=4 {
            let patterns = random_set(order, 20, 6, &mut rng);
            let state = random_state(&patterns, &mut rng);
            let bound = 6 * 20i128.pow(order);
            assert!(state.potential(&patterns).numerator <= bound);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn exact_potential_and_descent(seed in any::<u64>(), order in 2u32..=4, n in 1usize..=24, p in 1usize..=8) {
            let mut rng = DamRng::new(seed);
            let patterns = random_set(order, n, p, &mut rng);
            let state = random_state(&patterns, &mut rng);
            for i in 0..n {
                let phi = state.phi_numerator(&patterns, i);
                let plus = potential_with(&patterns, state.spins(), i, 1);
                let minus = potential_with(&patterns, state.spins(), i, -1);
                prop_assert_eq!(plus - minus, 2 * phi);

                let mut flipped = state.clone();
                flipped.apply_flip(&patterns, i).unwrap();
                let gain = flipped.potential(&patterns).numerator - state.potential(&patterns).numerator;
                // (x' − x)·Φ_i in numerator units.
                prop_assert_eq!(gain, i128::from(flipped.spin(i) - state.spin(i)) * phi);
                // Locality: Φ_i ignores x_i.
                prop_assert_eq!(flipped.phi_numerator(&patterns, i), phi);
                if phi != 0 && state.spin(i) != phi.signum() as i8 {
                    prop_assert_eq!(gain, 2 * phi.abs());
                }
            }
        }

        #[test]
        fn cache_coherence_and_parity(seed in any::<u64>(), n in 1usize..=40, p in 1usize..=10, flips in 0usize..200) {
            let mut rng = DamRng::new(seed);
            let patterns = random_set(3, n, p, &mut rng);
            let mut state = random_state(&patterns, &mut rng);
            for _ in 0..flips {
                let i = rng.index(n);
                state.apply_flip(&patterns, i).unwrap();
            }
            let mut rebuilt = state.clone();
            rebuilt.rebuild_cache(&patterns);
            prop_assert_eq!(&rebuilt, &state);
            for &m in state.overlaps() {
                prop_assert!(m.unsigned_abs() as usize <= n);
                prop_assert_eq!((i64::from(m) - n as i64).rem_euclid(2), 0);
            }
        }
    }
}
