//! Reward shaping: explicit ratings, implicit behaviour signals,
//! automated quality metrics, composite blends, normalization, and
//! propensity correction for partially observed feedback.

use alloc::format;

use alloc::vec::Vec;

use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::features::tokenize;
use crate::math::{self, cosine_similarity, fnv1a_64, sigmoid};

/// Which reward signal feeds posterior updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RewardMode {
    /// Thumbs up/down only; steps without a rating skip the update.
    Binary,
    /// Weighted blend of explicit, implicit, and quality components.
    Composite,
    /// Accuracy/speed/cost blend for production trade-offs.
    MultiObjective,
}

impl RewardMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardMode::Binary => "binary",
            RewardMode::Composite => "composite",
            RewardMode::MultiObjective => "multi_objective",
        }
    }
}

/// One observed feedback event for a delivered response.
///
/// `read_time` is expected pre-normalized to [0, 1] by the caller; how raw
/// dwell seconds map to that scale is a presentation-layer concern.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeedbackEvent {
    /// Thumbs rating: `Some(true)` up, `Some(false)` down, `None` missing.
    pub explicit: Option<bool>,
    pub read_time: f64,
    pub followups: u32,
    pub rephrases: u32,
    pub latency: f64,
    pub tokens_used: u32,
    pub received_at: u64,
}

impl FeedbackEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.read_time >= 0.0 && self.read_time.is_finite()) {
            return Err(Error::invalid("read_time must be finite and >= 0"));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(Error::invalid("latency must be finite and >= 0"));
        }
        Ok(())
    }

    /// A bare thumbs rating with no behavioural signals.
    pub fn thumbs(up: bool, received_at: u64) -> Self {
        Self {
            explicit: Some(up),
            read_time: 0.0,
            followups: 0,
            rephrases: 0,
            latency: 0.0,
            tokens_used: 0,
            received_at,
        }
    }
}

/// Measurable attributes of a response used by the quality score.
#[derive(Debug, Clone, PartialEq)]
pub struct QualitySignals {
    pub response_length: u32,
    pub target_length: u32,
    pub sigma_length: f64,
    pub citations: u32,
    pub citations_expected: u32,
    pub query_embedding: Vec<f64>,
    pub response_embedding: Vec<f64>,
    /// Per-category probabilities from a moderation backend. Empty means
    /// the constant-safe stub: nothing flagged.
    pub unsafe_probs: Vec<f64>,
}

impl QualitySignals {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_length > 0.0 && self.sigma_length.is_finite()) {
            return Err(Error::invalid("sigma_length must be > 0"));
        }
        if self.citations_expected < 1 {
            return Err(Error::invalid("citations_expected must be >= 1"));
        }
        if self.query_embedding.len() != self.response_embedding.len() {
            return Err(Error::invalid("embedding lengths differ"));
        }
        for p in &self.unsafe_probs {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::invalid(format!("unsafe prob {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// All reward-shaping coefficients in one place.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardWeights {
    /// Composite blend: explicit / implicit / quality. Must sum to 1.
    pub w_explicit: f64,
    pub w_implicit: f64,
    pub w_quality: f64,
    /// Implicit-signal coefficients: read time, follow-ups, rephrases.
    pub implicit_read: f64,
    pub implicit_followup: f64,
    pub implicit_rephrase: f64,
    /// Quality blend: length / citations / coherence / safety. Sum to 1.
    pub q_length: f64,
    pub q_citations: f64,
    pub q_coherence: f64,
    pub q_safety: f64,
    /// Multi-objective blend: accuracy / speed / cost. Must sum to 1.
    pub w_accuracy: f64,
    pub w_speed: f64,
    pub w_cost: f64,
    /// Latency decay rate for the speed term.
    pub lambda: f64,
    /// Token budget for the cost term.
    pub max_tokens: u32,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_explicit: 0.6,
            w_implicit: 0.25,
            w_quality: 0.15,
            implicit_read: 1.0,
            implicit_followup: 0.5,
            implicit_rephrase: 0.5,
            q_length: 0.25,
            q_citations: 0.25,
            q_coherence: 0.25,
            q_safety: 0.25,
            w_accuracy: 0.8,
            w_speed: 0.1,
            w_cost: 0.1,
            lambda: 0.5,
            max_tokens: 1000,
        }
    }
}

const SIMPLEX_TOLERANCE: f64 = 1e-9;

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let simplexes: [(&str, &[f64]); 3] = [
            (
                "composite",
                &[self.w_explicit, self.w_implicit, self.w_quality],
            ),
            (
                "quality",
                &[
                    self.q_length,
                    self.q_citations,
                    self.q_coherence,
                    self.q_safety,
                ],
            ),
            (
                "multi_objective",
                &[self.w_accuracy, self.w_speed, self.w_cost],
            ),
        ];
        for (name, ws) in simplexes {
            if ws.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                return Err(Error::invalid(format!("{name} weights must be >= 0")));
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::invalid(format!(
                    "{name} weights sum to {sum}, expected 1"
                )));
            }
        }
        for (name, v) in [
            ("implicit_read", self.implicit_read),
            ("implicit_followup", self.implicit_followup),
            ("implicit_rephrase", self.implicit_rephrase),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be > 0"));
        }
        if self.max_tokens == 0 {
            return Err(Error::invalid("max_tokens must be >= 1"));
        }
        Ok(())
    }
}

/// The explicit binary signal, when present: thumbs up 1.0, down 0.0.
pub fn explicit_reward(event: &FeedbackEvent) -> Option<f64> {
    event.explicit.map(|up| if up { 1.0 } else { 0.0 })
}

/// Behavioural satisfaction proxy:
/// `sigmoid(a1*read_time + a2*followups - a3*rephrases)`.
pub fn implicit_reward(event: &FeedbackEvent, weights: &RewardWeights) -> f64 {
    sigmoid(
        weights.implicit_read * event.read_time
            + weights.implicit_followup * f64::from(event.followups)
            - weights.implicit_rephrase * f64::from(event.rephrases),
    )
}

/// Per-component quality scores plus their weighted blend.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QualityBreakdown {
    pub length: f64,
    pub citations: f64,
    pub coherence: f64,
    pub safety: f64,
    pub combined: f64,
}

/// Automated response-quality score in [0, 1].
pub fn quality_score(
    signals: &QualitySignals,
    weights: &RewardWeights,
) -> Result<QualityBreakdown> {
    signals.validate()?;
    weights.validate()?;

    let diff = f64::from(signals.response_length) - f64::from(signals.target_length);
    let length = math::exp(-(diff * diff) / (2.0 * signals.sigma_length * signals.sigma_length));

    let citations = (f64::from(signals.citations) / f64::from(signals.citations_expected)).min(1.0);

    let coherence = if weights.q_coherence > 0.0 {
        let zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
        if zero(&signals.query_embedding) || zero(&signals.response_embedding) {
            return Err(Error::invalid(
                "coherence requested but an embedding is all zeros",
            ));
        }
        cosine_similarity(&signals.query_embedding, &signals.response_embedding).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let worst_unsafe = signals.unsafe_probs.iter().copied().fold(0.0, f64::max);
    let safety = 1.0 - worst_unsafe;

    let combined = weights.q_length * length
        + weights.q_citations * citations
        + weights.q_coherence * coherence
        + weights.q_safety * safety;
    Ok(QualityBreakdown {
        length,
        citations,
        coherence,
        safety,
        combined,
    })
}

/// Blend explicit, implicit, and quality components. When the explicit
/// rating is missing, the remaining weights are renormalized to sum to
/// one so sparse feedback does not shrink the reward scale.
pub fn composite_reward(
    explicit: Option<f64>,
    implicit: f64,
    quality: f64,
    weights: &RewardWeights,
) -> Result<f64> {
    weights.validate()?;
    for (name, v) in [("implicit", implicit), ("quality", quality)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "{name} component {v} outside [0, 1]"
            )));
        }
    }
    match explicit {
        Some(e) => {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!(
                    "explicit component {e} outside [0, 1]"
                )));
            }
            Ok(
                weights.w_explicit * e
                    + weights.w_implicit * implicit
                    + weights.w_quality * quality,
            )
        }
        None => {
            let rest = weights.w_implicit + weights.w_quality;
            if rest <= 0.0 {
                return Err(Error::invalid(
                    "explicit feedback missing and remaining weights are zero",
                ));
            }
            Ok((weights.w_implicit * implicit + weights.w_quality * quality) / rest)
        }
    }
}

/// Reward statistics over contexts similar to a given one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodStats {
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

/// Division guard for reward normalization.
pub const NORMALIZE_EPSILON: f64 = 0.01;

/// Default cosine-similarity threshold defining "similar contexts".
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.9;

/// Collect mean/stddev of past rewards whose contexts are at least
/// `min_cosine`-similar to `x`. Returns `None` when no neighbor exists.
pub fn neighborhood_stats(
    history: &[(ContextVector, f64)],
    x: &ContextVector,
    min_cosine: f64,
) -> Option<NeighborhoodStats> {
    let mut rewards = Vec::new();
    for (ctx, r) in history {
        if cosine_similarity(ctx.values(), x.values()) >= min_cosine {
            rewards.push(*r);
        }
    }
    if rewards.is_empty() {
        return None;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Some(NeighborhoodStats {
        mean,
        stddev: math::sqrt(var),
        count: rewards.len(),
    })
}

/// Z-score of a reward against its context neighborhood:
/// `(r - mean) / (stddev + 0.01)`.
pub fn normalize_reward(r: f64, stats: &NeighborhoodStats) -> f64 {
    (r - stats.mean) / (stats.stddev + NORMALIZE_EPSILON)
}

/// Map a z-score back into (0, 1) for posterior updates. The raw z-score
/// is unbounded, which the Beta-Bernoulli update cannot absorb; the
/// sigmoid preserves ordering while restoring the unit interval.
pub fn squash_z(z: f64) -> f64 {
    sigmoid(z)
}

/// Estimated probability that feedback is observed for an (action,
/// context) pair; always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeedbackPropensity(f64);

impl FeedbackPropensity {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("propensity {p} outside (0, 1]")));
        }
        Ok(Self(p))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Inverse-propensity correction for partially observed feedback.
/// Returns the raw corrected value (for logs) and the [0, 1] clamp that
/// feeds the posterior update.
pub fn importance_correct(r_observed: f64, p: FeedbackPropensity) -> (f64, f64) {
    let raw = r_observed / p.value();
    (raw, raw.clamp(0.0, 1.0))
}

/// Running per-action estimate of how often feedback arrives, maintained
/// as an exponentially smoothed observation rate with a variance floor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropensityEstimator {
    rates: Vec<f64>,
    smoothing: f64,
    floor: f64,
}

impl PropensityEstimator {
    pub const DEFAULT_SMOOTHING: f64 = 0.1;
    pub const DEFAULT_FLOOR: f64 = 0.05;

    pub fn new(num_actions: usize) -> Self {
        Self {
            // Optimistic start: assume feedback until observed otherwise,
            // so early corrections stay close to the identity.
            rates: alloc::vec![1.0; num_actions],
            smoothing: Self::DEFAULT_SMOOTHING,
            floor: Self::DEFAULT_FLOOR,
        }
    }

    /// Record whether feedback arrived for one interaction with `action`.
    pub fn observe(&mut self, action: usize, arrived: bool) {
        if let Some(rate) = self.rates.get_mut(action) {
            let y = if arrived { 1.0 } else { 0.0 };
            *rate = (1.0 - self.smoothing) * *rate + self.smoothing * y;
        }
    }

    /// Current floored estimate for `action`.
    pub fn estimate(&self, action: usize) -> FeedbackPropensity {
        let rate = self.rates.get(action).copied().unwrap_or(1.0);
        FeedbackPropensity(rate.max(self.floor).min(1.0))
    }
}

/// Deterministic hashed bag-of-words embedding: every token lands in a
/// hash bucket with a hash-derived sign, and the result is L2-normalized.
/// Texts with no tokens produce the all-zero vector, which downstream
/// coherence scoring rejects.
pub fn default_embedding(text: &str, dim: usize) -> Result<Vec<f64>> {
    if dim < 8 {
        return Err(Error::invalid(format!("embedding dim {dim} must be >= 8")));
    }
    let mut v = alloc::vec![0.0f64; dim];
    for token in tokenize(text) {
        let h = fnv1a_64(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = math::sqrt(math::dot(&v, &v));
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    Ok(v)
}

/// Production blend of accuracy, speed, and cost:
/// `w_acc*acc + w_speed*exp(-lambda*latency) + w_cost*(1 - tokens/max)`.
pub fn multi_objective_reward(
    accuracy: bool,
    latency: f64,
    tokens: u32,
    weights: &RewardWeights,
) -> Result<f64> {
    weights.validate()?;
    if !(latency >= 0.0 && latency.is_finite()) {
        return Err(Error::invalid("latency must be finite and >= 0"));
    }
    if tokens > weights.max_tokens {
        return Err(Error::invalid(format!(
            "tokens {tokens} exceed max_tokens {}",
            weights.max_tokens
        )));
    }
    let acc = if accuracy { 1.0 } else { 0.0 };
    let speed = math::exp(-weights.lambda * latency);
    let cost = 1.0 - f64::from(tokens) / f64::from(weights.max_tokens);
    Ok(weights.w_accuracy * acc + weights.w_speed * speed + weights.w_cost * cost)
}

/// Stable identifier for pluggable safety backends; the default stub
/// reports every category as safe.
pub trait SafetyBackend {
    fn unsafe_probs(&self, response_text: &str) -> Vec<f64>;
}

/// Constant-safe moderation stub.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantSafe;

impl SafetyBackend for ConstantSafe {
    fn unsafe_probs(&self, _response_text: &str) -> Vec<f64> {
        Vec::new()
    }
}

/// Per-interaction reward breakdown, mirrored into the JSONL log.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardBreakdown {
    pub reward_explicit: Option<f64>,
    pub reward_implicit: Option<f64>,
    pub reward_quality: Option<f64>,
    pub reward_composite: Option<f64>,
    pub reward_z: Option<f64>,
    /// Value actually applied to the posterior (None when no update ran).
    pub reward_final: Option<f64>,
    pub propensity: f64,
    /// Raw inverse-propensity-corrected value before clamping, when the
    /// correction was applied.
    pub reward_corrected_raw: Option<f64>,
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn composite_always_lands_in_unit_interval(
            e in proptest::option::of(0.0f64..=1.0),
            i in 0.0f64..=1.0,
            q in 0.0f64..=1.0,
        ) {
            let w = RewardWeights::default();
            let r = composite_reward(e, i, q, &w).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn implicit_always_lands_in_unit_interval(
            read in 0.0f64..=1.0,
            fups in 0u32..1000,
            reph in 0u32..1000,
        ) {
            let w = RewardWeights::default();
            let e = FeedbackEvent {
                explicit: None,
                read_time: read,
                followups: fups,
                rephrases: reph,
                latency: 0.0,
                tokens_used: 0,
                received_at: 0,
            };
            // Mathematically (0, 1); f64 saturates the top end at
            // extreme engagement counts, which updates tolerate.
            let r = implicit_reward(&e, &w);
            prop_assert!(r > 0.0 && r <= 1.0);
        }

        #[test]
        fn corrected_clamp_always_updatable(
            r in 0.0f64..=1.0,
            p in 0.0001f64..=1.0,
        ) {
            let (_, clamped) = importance_correct(r, FeedbackPropensity::new(p).unwrap());
            prop_assert!((0.0..=1.0).contains(&clamped));
        }

        #[test]
        fn squashed_z_always_updatable(r in 0.0f64..=1.0, mean in 0.0f64..=1.0, sd in 0.0f64..=0.5) {
            let stats = NeighborhoodStats { mean, stddev: sd, count: 1 };
            let z = normalize_reward(r, &stats);
            let s = squash_z(z);
            // |z| can reach 100 when stddev is 0, saturating the sigmoid.
            prop_assert!(s > 0.0 && s <= 1.0);
        }

        #[test]
        fn multi_objective_stays_in_unit_interval(
            acc in proptest::bool::ANY,
            latency in 0.0f64..100.0,
            tokens in 0u32..=1000,
        ) {
            let w = RewardWeights::default();
            let r = multi_objective_reward(acc, latency, tokens, &w).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
