//! Metric series over experiment traces: cumulative reward, rolling
//! success, cumulative pseudo-regret, action-distribution entropy, and
//! convergence time.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adapt::InteractionRecord;
use crate::error::{Error, Result};
use crate::math;

/// The full record of one seeded run.
///
/// The oracle series (`optimal_expected`, `chosen_expected`) hold the
/// environment's true per-step expected rewards for the best action and
/// the chosen action. They exist only in simulation; live traces carry
/// `None` and regret is unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub records: Vec<InteractionRecord>,
    pub optimal_expected: Option<Vec<f64>>,
    pub chosen_expected: Option<Vec<f64>>,
    pub policy: String,
    pub seed: u64,
}

impl ExperimentTrace {
    pub fn validate(&self) -> Result<()> {
        for series in [&self.optimal_expected, &self.chosen_expected]
            .into_iter()
            .flatten()
        {
            if series.len() != self.records.len() {
                return Err(Error::invalid("oracle series length mismatch"));
            }
            if series.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid("oracle expected values outside [0, 1]"));
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

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    /// Mean realized reward over the whole run.
    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.rewards().iter().sum::<f64>() / self.records.len() as f64
    }
}

/// Prefix sums of realized rewards.
pub fn cumulative_reward(trace: &ExperimentTrace) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .records
        .iter()
        .map(|r| {
            acc += r.reward;
            acc
        })
        .collect()
}

/// Mean of the last `min(t, w)` rewards at each step; partial windows
/// average over the available prefix.
pub fn rolling_success(trace: &ExperimentTrace, w: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::invalid("rolling window must be >= 1"));
    }
    let rewards = trace.rewards();
    Ok(rolling_mean(&rewards, w))
}

pub(crate) fn rolling_mean(values: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for t in 0..values.len() {
        sum += values[t];
        if t >= w {
            sum -= values[t - w];
        }
        let span = (t + 1).min(w);
        out.push(sum / span as f64);
    }
    out
}

/// Prefix sums of the per-step expected-value gap
/// `optimal_expected - chosen_expected` (pseudo-regret).
pub fn cumulative_regret(trace: &ExperimentTrace) -> Result<Vec<f64>> {
    let (optimal, chosen) = match (&trace.optimal_expected, &trace.chosen_expected) {
        (Some(o), Some(c)) => (o, c),
        _ => {
            return Err(Error::UnsupportedMode(
                "regret requires the simulation oracle series".into(),
            ))
        }
    };
    trace.validate()?;
    let mut acc = 0.0;
    Ok(optimal
        .iter()
        .zip(chosen.iter())
        .map(|(o, c)| {
            acc += o - c;
            acc
        })
        .collect())
}

/// Shannon entropy (natural log) of the empirical action distribution
/// over the first `upto_t` records.
pub fn action_entropy(trace: &ExperimentTrace, upto_t: usize) -> Result<f64> {
    if upto_t == 0 || upto_t > trace.records.len() {
        return Err(Error::invalid("upto_t must be in 1..=len"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &trace.records[..upto_t] {
        *counts.entry(r.action.as_str()).or_insert(0) += 1;
    }
    let total = upto_t as f64;
    let mut h = 0.0;
    for &c in counts.values() {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * math::ln(p);
        }
    }
    Ok(h)
}

/// Entropy after every step, for the metric series export.
pub fn entropy_series(trace: &ExperimentTrace) -> Vec<f64> {
    (1..=trace.records.len())
        .map(|t| action_entropy(trace, t).unwrap_or(0.0))
        .collect()
}

/// First step `t >= w` whose full rolling window clears the threshold;
/// `None` when the run never converges.
pub fn queries_to_threshold(
    trace: &ExperimentTrace,
    threshold: f64,
    w: usize,
) -> Result<Option<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("threshold must be in (0, 1]"));
    }
    if w == 0 {
        return Err(Error::invalid("rolling window must be >= 1"));
    }
    let series = rolling_success(trace, w)?;
    for (i, v) in series.iter().enumerate() {
        let step = i + 1;
        if step >= w && *v >= threshold {
            return Ok(Some(step));
        }
    }
    Ok(None)
}
