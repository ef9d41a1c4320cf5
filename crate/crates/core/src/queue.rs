//! Delayed-feedback queue.
//!
//! Users rate responses minutes or hours after receiving them, so the
//! pipeline parks each interaction here and applies the posterior update
//! when (and only when) its feedback resolves. Every entry resolves at
//! most once; entries older than the expiry window are dropped and
//! counted, never guessed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;

use crate::action::ActionSpace;
use crate::agent::ResponseMeta;
use crate::bandit::PosteriorState;
use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::reward::{
    composite_reward, explicit_reward, implicit_reward, multi_objective_reward, FeedbackEvent,
    RewardMode, RewardWeights,
};

/// Default expiry in logical ticks (one tick = one simulated second).
pub const DEFAULT_EXPIRY_TICKS: u64 = 86_400;

/// One interaction awaiting feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingFeedback {
    pub id: String,
    pub action: String,
    pub context: ContextVector,
    pub response: ResponseMeta,
    /// Quality score computed when the response was produced, available
    /// to composite resolution without re-running quality backends.
    pub quality: Option<f64>,
    pub issued_at: u64,
}

/// Outcome of a resolution attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    /// Reward computed and posterior updated exactly once.
    Applied { reward: f64 },
    /// Entry was past its expiry window; dropped and counted.
    Expired,
}

/// Feedback queue with at-most-once resolution semantics.
#[derive(Debug, Clone)]
pub struct FeedbackQueue {
    pending: BTreeMap<String, PendingFeedback>,
    resolved: BTreeSet<String>,
    expiry_ticks: u64,
    mode: RewardMode,
    weights: RewardWeights,
    applied: u64,
    dropped: u64,
}

impl FeedbackQueue {
    pub fn new(mode: RewardMode, weights: RewardWeights, expiry_ticks: u64) -> Result<Self> {
        weights.validate()?;
        if expiry_ticks == 0 {
            return Err(Error::invalid("expiry must be >= 1 tick"));
        }
        Ok(Self {
            pending: BTreeMap::new(),
            resolved: BTreeSet::new(),
            expiry_ticks,
            mode,
            weights,
            applied: 0,
            dropped: 0,
        })
    }

    pub fn enqueue(&mut self, entry: PendingFeedback) -> Result<()> {
        if self.pending.contains_key(&entry.id) || self.resolved.contains(&entry.id) {
            return Err(Error::invalid(format!(
                "interaction '{}' already enqueued",
                entry.id
            )));
        }
        self.pending.insert(entry.id.clone(), entry);
        Ok(())
    }

    /// Resolve a pending entry: compute the reward for the configured
    /// mode and apply it to the posterior, or drop the entry if it has
    /// expired.
    pub fn resolve(
        &mut self,
        id: &str,
        event: &FeedbackEvent,
        now: u64,
        space: &ActionSpace,
        posterior: &mut PosteriorState,
    ) -> Result<Resolution> {
        if self.resolved.contains(id) {
            return Err(Error::AlreadyResolved(id.into()));
        }
        let entry = self
            .pending
            .get(id)
            .ok_or_else(|| Error::not_found(format!("pending interaction '{id}'")))?;

        if now.saturating_sub(entry.issued_at) > self.expiry_ticks {
            self.pending.remove(id);
            self.resolved.insert(id.into());
            self.dropped += 1;
            return Ok(Resolution::Expired);
        }

        event.validate()?;
        let reward = match self.mode {
            RewardMode::Binary => explicit_reward(event)
                .ok_or_else(|| Error::invalid("binary reward mode requires an explicit rating"))?,
            RewardMode::Composite => {
                let quality = entry.quality.ok_or_else(|| {
                    Error::invalid("composite resolution requires a stored quality score")
                })?;
                composite_reward(
                    explicit_reward(event),
                    implicit_reward(event, &self.weights),
                    quality,
                    &self.weights,
                )?
            }
            RewardMode::MultiObjective => {
                let up = event.explicit.ok_or_else(|| {
                    Error::invalid("multi-objective reward requires an explicit rating")
                })?;
                multi_objective_reward(
                    up,
                    entry.response.latency,
                    entry.response.tokens,
                    &self.weights,
                )?
            }
        };

        let arm = space.index_of(&entry.action)?;
        let context = entry.context.clone();
        posterior.update(arm, &context, reward)?;
        self.pending.remove(id);
        self.resolved.insert(id.into());
        self.applied += 1;
        Ok(Resolution::Applied { reward })
    }

    /// Drop every pending entry older than the expiry window.
    pub fn sweep_expired(&mut self, now: u64) -> u64 {
        let expired: alloc::vec::Vec<String> = self
            .pending
            .iter()
            .filter(|(_, e)| now.saturating_sub(e.issued_at) > self.expiry_ticks)
            .map(|(id, _)| id.clone())
            .collect();
        let count = expired.len() as u64;
        for id in expired {
            self.pending.remove(&id);
            self.resolved.insert(id);
        }
        self.dropped += count;
        count
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Resolutions that produced a posterior update.
    pub fn applied_count(&self) -> u64 {
        self.applied
    }

    /// Entries dropped for expiring before feedback arrived.
    pub fn dropped_count(&self) -> u64 {
        self.dropped
    }
}
