//! Contextual bandit decision engine with context-weighted Beta-Bernoulli
//! posteriors.
//!
//! The crate learns which action (a generation strategy, a tool, or a domain
//! specialist) works best for a given text query, from binary or composite
//! user feedback alone. Selection is Thompson Sampling over per-action
//! Beta posteriors whose parameters are weighted by the query's feature
//! vector; random, fixed, epsilon-greedy, and UCB baselines share the same
//! posterior state.
//!
//! Layout:
//! - [`bandit`] — posterior state, policies, selection, updates
//! - [`features`] — keyword featurization of raw query text
//! - [`reward`] — explicit/implicit/quality/multi-objective reward shaping
//! - [`adapt`] — warm start, sliding-window and decayed posterior rebuilds
//! - [`metrics`] — reward/regret/entropy series over experiment traces
//! - [`sim`] — synthetic environments and the seeded experiment runner
//! - [`agent`] — action-to-agent configuration and the responder interface
//! - [`queue`] — delayed-feedback queue with exactly-once posterior updates
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature enables native float math and the standard error trait plumbing.
//! IO, file formats, and the CLI live in the companion `quiver-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod action;
pub mod adapt;
pub mod agent;
pub mod bandit;
pub mod context;
pub mod error;
pub mod features;
pub mod math;
pub mod metrics;
pub mod queue;
pub mod reward;
pub mod rng;
pub mod sim;

pub use action::{ActionMode, ActionSpace};
pub use bandit::{PolicyConfig, PolicyKind, PosteriorState, SelectionResult};
pub use context::ContextVector;
pub use error::{Error, Result};
pub use features::{FeatureSpec, Lexicon, Query};
pub use rng::BanditRng;
