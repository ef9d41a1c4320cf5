//! Cold-start warm starting and non-stationarity handling.
//!
//! The posterior is a definitional sum over history, so both adaptation
//! mechanisms are expressed as rebuilds: replay only the last `W` records
//! (sliding window) or replay everything with exponentially decaying
//! weights (forgetting factor). `PosteriorState::decay_evidence` is the
//! equivalent incremental fast path for the latter; their equality is
//! pinned by tests.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::action::{ActionMode, ActionSpace};
use crate::bandit::PosteriorState;
use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::math;

/// One applied interaction: the unit of replayable history.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InteractionRecord {
    /// 1-based step within the run.
    pub step: u64,
    pub context: ContextVector,
    pub action: String,
    pub reward: f64,
    pub propensity: f64,
    /// Logical clock; the simulator uses the step number.
    pub timestamp: u64,
}

/// Retention policy for interaction history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Capacity {
    Unbounded,
    /// Keep exactly the last `W` records once full.
    Ring(usize),
}

/// Ordered interaction history with strictly increasing steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    records: VecDeque<InteractionRecord>,
    capacity: Capacity,
}

impl HistoryBuffer {
    pub fn unbounded() -> Self {
        Self {
            records: VecDeque::new(),
            capacity: Capacity::Unbounded,
        }
    }

    pub fn ring(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("ring capacity must be >= 1"));
        }
        Ok(Self {
            records: VecDeque::new(),
            capacity: Capacity::Ring(window),
        })
    }

    pub fn push(&mut self, record: InteractionRecord) -> Result<()> {
        if let Some(last) = self.records.back() {
            if record.step <= last.step {
                return Err(Error::invalid(format!(
                    "history steps must increase: {} after {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push_back(record);
        if let Capacity::Ring(w) = self.capacity {
            while self.records.len() > w {
                self.records.pop_front();
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.records.iter()
    }

    pub fn records(&self) -> Vec<InteractionRecord> {
        self.records.iter().cloned().collect()
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }
}

/// Heuristic action for the first few queries of a strategy-mode run,
/// before the posterior carries any signal: chain-of-thought when the
/// complexity feature clears the threshold, direct otherwise. Past the
/// warm-start horizon the gate abstains and the policy decides.
pub fn warmstart_select(
    x: &ContextVector,
    feature_spec: &FeatureSpec,
    space: &ActionSpace,
    threshold: f64,
    n_warm: u64,
    t: u64,
) -> Result<Option<String>> {
    if space.mode() != ActionMode::Strategy
        || !space.contains("direct")
        || !space.contains("chain_of_thought")
    {
        return Err(Error::UnsupportedMode(
            "warm start requires the strategy action space {direct, chain_of_thought}".into(),
        ));
    }
    if t > n_warm {
        return Ok(None);
    }
    let complexity = x
        .get(FeatureSpec::COMPLEXITY)
        .ok_or_else(|| Error::invalid("context lacks a complexity component"))?;
    let _ = feature_spec;
    let action = if complexity > threshold {
        "chain_of_thought"
    } else {
        "direct"
    };
    Ok(Some(action.to_string()))
}

/// Default warm-start horizon (queries) and complexity threshold.
pub const DEFAULT_WARM_QUERIES: u64 = 5;
pub const DEFAULT_WARM_THRESHOLD: f64 = 0.5;

/// Rebuild the posterior from only the last `window` records.
pub fn rebuild_window(
    space: &ActionSpace,
    history: &HistoryBuffer,
    window: usize,
    dim: usize,
    alpha0: f64,
    beta0: f64,
) -> Result<PosteriorState> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    let mut posterior = PosteriorState::init(space.len(), dim, alpha0, beta0)?;
    let skip = history.len().saturating_sub(window);
    for record in history.iter().skip(skip) {
        let arm = space.index_of(&record.action)?;
        posterior.update(arm, &record.context, record.reward)?;
    }
    Ok(posterior)
}

/// Rebuild the posterior with exponentially decayed evidence:
/// records aged `k` steps (relative to the newest record) contribute
/// with weight `gamma^k`.
pub fn rebuild_decayed(
    space: &ActionSpace,
    history: &HistoryBuffer,
    gamma: f64,
    dim: usize,
    alpha0: f64,
    beta0: f64,
) -> Result<PosteriorState> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1]")));
    }
    let mut posterior = PosteriorState::init(space.len(), dim, alpha0, beta0)?;
    let Some(newest) = history.iter().last().map(|r| r.step) else {
        return Ok(posterior);
    };
    for record in history.iter() {
        let arm = space.index_of(&record.action)?;
        let age = newest - record.step;
        let weight = math::powf(gamma, age as f64);
        posterior.update_weighted(arm, &record.context, record.reward, weight)?;
    }
    Ok(posterior)
}

impl PosteriorState {
    /// Weighted observation used by the decayed rebuild:
    /// `alpha += w*r*x`, `beta += w*(1-r)*x`.
    pub(crate) fn update_weighted(
        &mut self,
        action: usize,
        x: &ContextVector,
        reward: f64,
        weight: f64,
    ) -> Result<()> {
        if weight == 1.0 {
            // Bitwise-identical to a plain update so the gamma = 1
            // identity holds exactly.
            return self.update(action, x, reward);
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::invalid(format!("reward {reward} outside [0, 1]")));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::invalid("weight must be finite and >= 0"));
        }
        if x.dim() != self.dim() {
            return Err(Error::invalid("context dimension mismatch"));
        }
        if action >= self.num_actions() {
            return Err(Error::not_found(format!("arm index {action}")));
        }
        for (i, xi) in x.values().iter().enumerate() {
            self.alpha_mut(action)[i] += weight * reward * xi;
            self.beta_mut(action)[i] += weight * (1.0 - reward) * xi;
        }
        Ok(())
    }
}
