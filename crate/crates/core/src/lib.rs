//! Dense associative memory (DAM) retrieval with exact integer arithmetic.
//!
//! The model stores `p` patterns in `{-1,+1}^N` and uses the order-`n`
//! potential `F(x) = N^{-(n-1)} Σ_μ (M^μ)^n`, where `M^μ = Σ_i ξ_i^μ x_i`.
//! Every sign decision (best response, fixed-point checks, adversary
//! orderings) is made on exact integer numerators; floats only appear in
//! reported quantities.
//!
//! Layout:
//!
//! | module | contents |
//! |--------|----------|
//! | [`model`] | parameters, patterns, network state, potential, discrete marginal field |
//! | [`dynamics`] | async/sync sweeps, retrieval loop, brute-force fixed-point enumeration |
//! | [`diagnostics`] | closed-form theory quantities and sampled separation estimates |
//! | [`ensembles`] | pattern generators, median binarization, pattern files |
//! | [`adversary`] | initial corruption, strong/weak adversaries, robustness protocol |
//! | [`experiments`] | grid runners and capacity search |
//! | [`stats`] | bootstrap CIs, threshold interpolation, power-law fits |
//! | [`rng`] | xoshiro256** stream, bounded sampling, seed derivation |

pub mod adversary;
pub mod diagnostics;
pub mod dynamics;
pub mod ensembles;
mod error;
pub mod experiments;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{DamError, Result};
pub use model::{ModelParams, NetworkState, PatternSet, PhiValue, Potential};
pub use rng::{derive_seed, DamRng};
