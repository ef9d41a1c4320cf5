//! Seeded random streams.
//!
//! Every stochastic component draws from an explicitly seeded ChaCha8
//! stream, so a (seed, config, input sequence) triple fully determines a
//! run. Distinct logical streams (selection, propensity estimation, query
//! generation, feedback) are separated by the ChaCha stream id so that
//! consuming one never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream ids used by the experiment runner.
pub mod streams {
    /// Main policy stream: Thompson/epsilon/random draws.
    pub const POLICY: u64 = 0;
    /// Auxiliary policy stream: propensity estimation only.
    pub const POLICY_AUX: u64 = 1;
    /// Query generation (archetype choice, template choice).
    pub const QUERIES: u64 = 2;
    /// Simulated user feedback (satisfaction, withholding, noise).
    pub const FEEDBACK: u64 = 3;
}

/// Build one ChaCha8 stream from a run seed and a stream id.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// The paired random streams a policy consumes during selection.
///
/// The main stream drives the decision itself; the auxiliary stream is
/// reserved for the Monte-Carlo propensity estimate, so computing (or
/// skipping) propensities never changes which action gets picked.
#[derive(Debug, Clone)]
pub struct BanditRng {
    pub(crate) main: ChaCha8Rng,
    pub(crate) aux: ChaCha8Rng,
}

impl BanditRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            main: stream(seed, streams::POLICY),
            aux: stream(seed, streams::POLICY_AUX),
        }
    }

    /// Direct access to the main stream (used by `sample_score`).
    pub fn main(&mut self) -> &mut ChaCha8Rng {
        &mut self.main
    }
}
