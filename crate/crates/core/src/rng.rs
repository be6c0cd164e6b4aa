//! Seeded random streams and finite categorical samplers.
//!
//! Every solver run owns one [`RandomStream`], a ChaCha8 generator seeded from
//! a single `u64`. Per iteration the objective index is drawn first and the
//! constraint index second, always from the same stream.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SspError};

/// Seed mixing constant for streams derived from a run seed (trace panels,
/// objective estimates), so they never alias the iteration stream.
const DERIVED_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A stream that is independent of `RandomStream::new(seed)`; `lane`
    /// distinguishes several derived streams of the same run.
    pub fn derived(seed: u64, lane: u64) -> Self {
        Self::new(seed ^ DERIVED_STREAM_SALT.wrapping_mul(lane + 1))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.rng)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draws indices from an index set. Implemented by [`Categorical`] for the
/// finite case; user code may implement it for other index sets.
#[allow(clippy::len_without_is_empty)]
pub trait IndexSampler: Send + Sync {
    fn sample(&self, stream: &mut RandomStream) -> usize;

    /// Number of indices, when finite.
    fn len(&self) -> Option<usize>;

    /// Probability mass of each index, when finite and known.
    fn probabilities(&self) -> Option<&[f64]> {
        None
    }
}

/// Finite categorical distribution over `0..len`.
#[derive(Clone, Debug)]
pub struct Categorical {
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl Categorical {
    /// Normalizes nonnegative `weights`. Fails on an empty or all-zero set.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(SspError::config("empty index set"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SspError::config("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SspError::config("all weights are zero"));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let index = WeightedIndex::new(weights).map_err(|e| SspError::config(format!("weights: {e}")))?;
        Ok(Self { probs, index })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }
}

impl IndexSampler for Categorical {
    fn sample(&self, stream: &mut RandomStream) -> usize {
        self.index.sample(stream.rng_mut())
    }

    fn len(&self) -> Option<usize> {
        Some(self.probs.len())
    }

    fn probabilities(&self) -> Option<&[f64]> {
        Some(&self.probs)
    }
}
