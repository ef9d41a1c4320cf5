//! Context-weighted Beta-Bernoulli posteriors and the policies that act
//! on them.
//!
//! Each action `a` keeps per-dimension pseudo-count vectors `alpha[a]` and
//! `beta[a]`. For a context `x`, the scalar parameters of the action's
//! Beta belief are the dot products `alpha[a]·x` and `beta[a]·x`, so the
//! same action can look strong in one region of context space and weak in
//! another. Thompson Sampling draws one score per action from those
//! beliefs and plays the argmax; the baseline policies (random, fixed,
//! epsilon-greedy, UCB) act on the same state.
//!
//! Concurrency contract: selection is a pure function of a posterior
//! snapshot, a context, and a random stream; updates mutate state and
//! must be serialized through a single logical writer. The state is
//! plain data and moves freely between threads.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::action::ActionSpace;
use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::BanditRng;

/// Lower clamp applied to context-weighted Beta parameters before
/// sampling, so sparse contexts cannot produce a degenerate distribution.
pub const DEFAULT_CLAMP_FLOOR: f64 = 0.1;

/// Number of auxiliary posterior samples used to estimate the propensity
/// of a Thompson selection.
pub const DEFAULT_PROPENSITY_SAMPLES: u32 = 1000;

/// Per-action success/failure pseudo-count vectors plus the priors they
/// started from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorState {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha0: f64,
    beta0: f64,
    dim: usize,
}

impl PosteriorState {
    /// Fresh posterior: every component of `alpha[a]` is `alpha0`, every
    /// component of `beta[a]` is `beta0`.
    pub fn init(num_actions: usize, dim: usize, alpha0: f64, beta0: f64) -> Result<Self> {
        if num_actions < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 actions, got {num_actions}"
            )));
        }
        if dim < 1 {
            return Err(Error::invalid("context dimension must be >= 1"));
        }
        if alpha0 <= 0.0 || !alpha0.is_finite() || beta0 <= 0.0 || !beta0.is_finite() {
            return Err(Error::invalid(format!(
                "priors must be positive and finite, got alpha0={alpha0} beta0={beta0}"
            )));
        }
        Ok(Self {
            alpha: vec![vec![alpha0; dim]; num_actions],
            beta: vec![vec![beta0; dim]; num_actions],
            alpha0,
            beta0,
            dim,
        })
    }

    /// Rebuild a posterior from raw component vectors (state-file loads).
    pub fn from_parts(
        alpha: Vec<Vec<f64>>,
        beta: Vec<Vec<f64>>,
        alpha0: f64,
        beta0: f64,
    ) -> Result<Self> {
        if alpha.len() < 2 || alpha.len() != beta.len() {
            return Err(Error::invalid("alpha/beta must list >= 2 actions each"));
        }
        let dim = alpha[0].len();
        if dim == 0 {
            return Err(Error::invalid("context dimension must be >= 1"));
        }
        if alpha0 <= 0.0 || alpha0.is_nan() || beta0 <= 0.0 || beta0.is_nan() {
            return Err(Error::invalid("priors must be positive"));
        }
        let floor = alpha0.min(beta0);
        for row in alpha.iter().chain(beta.iter()) {
            if row.len() != dim {
                return Err(Error::invalid("ragged posterior component vectors"));
            }
            if row.iter().any(|v| !v.is_finite() || *v < floor) {
                return Err(Error::invalid(
                    "posterior components must be finite and >= min(alpha0, beta0)",
                ));
            }
        }
        Ok(Self {
            alpha,
            beta,
            alpha0,
            beta0,
            dim,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn priors(&self) -> (f64, f64) {
        (self.alpha0, self.beta0)
    }

    pub fn alpha(&self, action: usize) -> &[f64] {
        &self.alpha[action]
    }

    pub fn beta(&self, action: usize) -> &[f64] {
        &self.beta[action]
    }

    pub(crate) fn alpha_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.alpha[action]
    }

    pub(crate) fn beta_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.beta[action]
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.alpha.len() {
            return Err(Error::not_found(format!("arm index {action}")));
        }
        Ok(())
    }

    fn check_dim(&self, x: &ContextVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::invalid(format!(
                "context dimension {} does not match posterior dimension {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Context-weighted Beta parameters `(alpha[a]·x, beta[a]·x)`.
    pub fn weighted_params(&self, action: usize, x: &ContextVector) -> Result<(f64, f64)> {
        self.check_action(action)?;
        self.check_dim(x)?;
        Ok((
            math::dot(&self.alpha[action], x.values()),
            math::dot(&self.beta[action], x.values()),
        ))
    }

    /// Mean of the context-weighted belief: `a / (a + b)`.
    pub fn expected_reward(&self, action: usize, x: &ContextVector) -> Result<f64> {
        let (a, b) = self.weighted_params(action, x)?;
        let total = a + b;
        if total <= 0.0 {
            return Err(Error::DegenerateContext(format!(
                "zero total mass for arm {action}"
            )));
        }
        Ok(a / total)
    }

    /// Variance of the context-weighted belief:
    /// `a*b / ((a+b)^2 * (a+b+1))`.
    pub fn reward_variance(&self, action: usize, x: &ContextVector) -> Result<f64> {
        let (a, b) = self.weighted_params(action, x)?;
        let total = a + b;
        if total <= 0.0 {
            return Err(Error::DegenerateContext(format!(
                "zero total mass for arm {action}"
            )));
        }
        Ok((a * b) / (total * total * (total + 1.0)))
    }

    /// True when the belief about `(action, x)` is still uncertain enough
    /// that explicit feedback is worth requesting.
    pub fn uncertainty_gate(&self, action: usize, x: &ContextVector, tau: f64) -> Result<bool> {
        if tau <= 0.0 || tau.is_nan() {
            return Err(Error::invalid("tau must be > 0"));
        }
        Ok(self.reward_variance(action, x)? > tau)
    }

    /// Per-dimension importance weights `(alpha - beta) / (alpha + beta)`,
    /// each in `[-1, 1]`.
    pub fn feature_importance(&self, action: usize) -> Result<Vec<f64>> {
        self.check_action(action)?;
        Ok(self.alpha[action]
            .iter()
            .zip(self.beta[action].iter())
            .map(|(a, b)| (a - b) / (a + b))
            .collect())
    }

    /// Apply one observation: `alpha[a] += r*x`, `beta[a] += (1-r)*x`.
    ///
    /// Binary rewards reproduce the classic success/failure count update;
    /// fractional rewards split their mass between the two sides so the
    /// conjugate form survives composite reward signals.
    pub fn update(&mut self, action: usize, x: &ContextVector, reward: f64) -> Result<()> {
        self.check_action(action)?;
        self.check_dim(x)?;
        if !(0.0..=1.0).contains(&reward) || !reward.is_finite() {
            return Err(Error::invalid(format!("reward {reward} outside [0, 1]")));
        }
        for (i, xi) in x.values().iter().enumerate() {
            self.alpha[action][i] += reward * xi;
            self.beta[action][i] += (1.0 - reward) * xi;
        }
        Ok(())
    }

    /// Shrink accumulated evidence toward the priors by `gamma`:
    /// `alpha <- alpha0 + gamma * (alpha - alpha0)` (same for beta).
    ///
    /// Calling this once per step before the step's update is the
    /// incremental form of the exponential-forgetting rebuild in
    /// [`crate::adapt::rebuild_decayed`].
    pub fn decay_evidence(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma {gamma} outside (0, 1]")));
        }
        if gamma == 1.0 {
            // No forgetting; skip the arithmetic so the identity with an
            // undecayed run is exact, not merely approximate.
            return Ok(());
        }
        for row in self.alpha.iter_mut() {
            for v in row.iter_mut() {
                *v = self.alpha0 + gamma * (*v - self.alpha0);
            }
        }
        for row in self.beta.iter_mut() {
            for v in row.iter_mut() {
                *v = self.beta0 + gamma * (*v - self.beta0);
            }
        }
        Ok(())
    }
}

/// Draw one score from `Beta(max(a, floor), max(b, floor))` as a ratio of
/// two Gamma draws. The Gamma route stays correct for the sub-one shape
/// parameters the clamp floor produces.
pub fn sample_score(
    alpha_tilde: f64,
    beta_tilde: f64,
    clamp_floor: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    if !(clamp_floor > 0.0 && clamp_floor.is_finite()) {
        return Err(Error::invalid("clamp_floor must be > 0"));
    }
    let a = if alpha_tilde.is_finite() && alpha_tilde > clamp_floor {
        alpha_tilde
    } else {
        clamp_floor
    };
    let b = if beta_tilde.is_finite() && beta_tilde > clamp_floor {
        beta_tilde
    } else {
        clamp_floor
    };
    let ga = Gamma::new(a, 1.0).map_err(|e| Error::invalid(format!("gamma({a}): {e}")))?;
    let gb = Gamma::new(b, 1.0).map_err(|e| Error::invalid(format!("gamma({b}): {e}")))?;
    let x: f64 = ga.sample(rng);
    let y: f64 = gb.sample(rng);
    let sum = x + y;
    if sum <= 0.0 {
        // Both Gamma draws underflowed to zero; the ratio is undefined and
        // the symmetric midpoint is the unbiased fallback.
        return Ok(0.5);
    }
    Ok((x / sum).clamp(1e-15, 1.0 - 1e-15))
}

/// Which decision rule to run over the shared posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PolicyKind {
    Thompson,
    EpsilonGreedy,
    Ucb,
    Random,
    Fixed,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Thompson => "thompson",
            PolicyKind::EpsilonGreedy => "epsilon_greedy",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Random => "random",
            PolicyKind::Fixed => "fixed",
        }
    }
}

/// Policy configuration. Only the fields the chosen kind reads are
/// validated for that kind.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Exploration probability for epsilon-greedy.
    pub epsilon: f64,
    /// Exploration strength for UCB (`mean + ucb_c * sqrt(variance)`).
    pub ucb_c: f64,
    /// Arm id played unconditionally by the fixed policy.
    pub fixed_action: Option<String>,
    /// Lower clamp on context-weighted Beta parameters before sampling.
    pub clamp_floor: f64,
    /// Auxiliary sample count for Thompson propensity estimation.
    pub propensity_samples: u32,
}

impl PolicyConfig {
    pub fn thompson() -> Self {
        Self {
            kind: PolicyKind::Thompson,
            epsilon: 0.0,
            ucb_c: 1.0,
            fixed_action: None,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
            propensity_samples: DEFAULT_PROPENSITY_SAMPLES,
        }
    }

    pub fn epsilon_greedy(epsilon: f64) -> Self {
        Self {
            kind: PolicyKind::EpsilonGreedy,
            epsilon,
            ..Self::thompson()
        }
    }

    pub fn ucb(ucb_c: f64) -> Self {
        Self {
            kind: PolicyKind::Ucb,
            ucb_c,
            ..Self::thompson()
        }
    }

    pub fn random() -> Self {
        Self {
            kind: PolicyKind::Random,
            ..Self::thompson()
        }
    }

    pub fn fixed(action: impl Into<String>) -> Self {
        Self {
            kind: PolicyKind::Fixed,
            fixed_action: Some(action.into()),
            ..Self::thompson()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clamp_floor > 0.0 && self.clamp_floor.is_finite()) {
            return Err(Error::invalid("clamp_floor must be > 0"));
        }
        match self.kind {
            PolicyKind::EpsilonGreedy => {
                if !(0.0..=1.0).contains(&self.epsilon) || !self.epsilon.is_finite() {
                    return Err(Error::invalid(format!(
                        "epsilon {} outside [0, 1]",
                        self.epsilon
                    )));
                }
            }
            PolicyKind::Ucb => {
                if !(self.ucb_c > 0.0 && self.ucb_c.is_finite()) {
                    return Err(Error::invalid(format!("ucb_c {} must be > 0", self.ucb_c)));
                }
            }
            PolicyKind::Fixed => {
                if self.fixed_action.is_none() {
                    return Err(Error::invalid("fixed policy requires fixed_action"));
                }
            }
            PolicyKind::Thompson | PolicyKind::Random => {}
        }
        if self.propensity_samples == 0 {
            return Err(Error::invalid("propensity_samples must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of one selection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionResult {
    /// Identifier of the chosen action.
    pub action: String,
    /// Arm index of the chosen action.
    pub action_index: usize,
    /// The per-action scores that drove the decision: sampled theta for
    /// Thompson, `mean + c*sqrt(var)` for UCB, posterior means otherwise.
    pub sampled_scores: Vec<f64>,
    /// Per-action posterior means under the current belief.
    pub expected_rewards: Vec<f64>,
    /// Estimated probability this action would have been chosen.
    pub propensity: f64,
    /// Logical draws consumed from the main random stream.
    pub rng_draws_consumed: u32,
}

/// First index of the maximum value; ties resolve to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Run one selection over the posterior.
pub fn select(
    posterior: &PosteriorState,
    space: &ActionSpace,
    x: &ContextVector,
    config: &PolicyConfig,
    rng: &mut BanditRng,
) -> Result<SelectionResult> {
    config.validate()?;
    if space.len() != posterior.num_actions() {
        return Err(Error::invalid(format!(
            "action space has {} arms but posterior has {}",
            space.len(),
            posterior.num_actions()
        )));
    }
    let n = space.len();
    let expected_rewards: Vec<f64> = (0..n)
        .map(|a| posterior.expected_reward(a, x))
        .collect::<Result<_>>()?;

    let (index, sampled_scores, propensity, draws) = match config.kind {
        PolicyKind::Thompson => {
            let params: Vec<(f64, f64)> = (0..n)
                .map(|a| posterior.weighted_params(a, x))
                .collect::<Result<_>>()?;
            let mut theta = Vec::with_capacity(n);
            for &(a, b) in &params {
                theta.push(sample_score(a, b, config.clamp_floor, &mut rng.main)?);
            }
            let idx = argmax(&theta);
            let p = thompson_propensity(&params, idx, config, &mut rng.aux)?;
            (idx, theta, p, n as u32)
        }
        PolicyKind::Random => {
            let idx = rng.main.random_range(0..n);
            (idx, expected_rewards.clone(), 1.0 / n as f64, 1)
        }
        PolicyKind::Fixed => {
            let id = config
                .fixed_action
                .as_deref()
                .ok_or_else(|| Error::invalid("fixed policy requires fixed_action"))?;
            let idx = space.index_of(id)?;
            (idx, expected_rewards.clone(), 1.0, 0)
        }
        PolicyKind::EpsilonGreedy => {
            let greedy = argmax(&expected_rewards);
            let coin: f64 = rng.main.random();
            let (idx, draws) = if coin < config.epsilon {
                (rng.main.random_range(0..n), 2)
            } else {
                (greedy, 1)
            };
            let uniform_share = config.epsilon / n as f64;
            let p = if idx == greedy {
                1.0 - config.epsilon + uniform_share
            } else {
                uniform_share
            };
            (idx, expected_rewards.clone(), p, draws)
        }
        PolicyKind::Ucb => {
            let mut scores = Vec::with_capacity(n);
            for (a, mean) in expected_rewards.iter().enumerate() {
                let var = posterior.reward_variance(a, x)?;
                scores.push(mean + config.ucb_c * math::sqrt(var));
            }
            let idx = argmax(&scores);
            (idx, scores, 1.0, 0)
        }
    };

    Ok(SelectionResult {
        action: space.id(index).unwrap_or_default().to_string(),
        action_index: index,
        sampled_scores,
        expected_rewards,
        propensity,
        rng_draws_consumed: draws,
    })
}

/// Estimate `P(arm wins the Thompson argmax)` by replaying the sampling
/// step `propensity_samples` times on the auxiliary stream.
fn thompson_propensity(
    params: &[(f64, f64)],
    chosen: usize,
    config: &PolicyConfig,
    aux: &mut impl Rng,
) -> Result<f64> {
    let k = config.propensity_samples;
    let floor = config.clamp_floor;
    let dists: Vec<(Gamma<f64>, Gamma<f64>)> = params
        .iter()
        .map(|&(a, b)| {
            let ga =
                Gamma::new(a.max(floor), 1.0).map_err(|e| Error::invalid(format!("gamma: {e}")))?;
            let gb =
                Gamma::new(b.max(floor), 1.0).map_err(|e| Error::invalid(format!("gamma: {e}")))?;
            Ok((ga, gb))
        })
        .collect::<Result<_>>()?;
    let mut wins = 0u32;
    let mut theta = vec![0.0; params.len()];
    for _ in 0..k {
        for (i, (ga, gb)) in dists.iter().enumerate() {
            let x: f64 = ga.sample(aux);
            let y: f64 = gb.sample(aux);
            let sum = x + y;
            theta[i] = if sum > 0.0 { x / sum } else { 0.5 };
        }
        if argmax(&theta) == chosen {
            wins += 1;
        }
    }
    // The chosen arm did win the real draw, so its propensity is at least
    // one part in k; never report zero.
    Ok(f64::from(wins.max(1)) / f64::from(k))
}
