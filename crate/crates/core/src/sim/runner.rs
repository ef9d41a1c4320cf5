//! The seeded experiment runner: the full pipeline loop
//! featurize -> (warm-start gate) -> select -> respond -> feedback ->
//! reward -> update, with per-step oracle bookkeeping for regret.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::action::ActionMode;
use crate::adapt::{
    rebuild_window, warmstart_select, HistoryBuffer, InteractionRecord, DEFAULT_WARM_QUERIES,
    DEFAULT_WARM_THRESHOLD,
};
use crate::agent::{ActionCatalog, MockResponder, Responder};
use crate::bandit::{select, PolicyConfig, PosteriorState};
use crate::context::ContextVector;
use crate::error::{Error, Result};
use crate::features::{extract, FeatureSpec, Lexicon};
use crate::metrics::{cumulative_regret, queries_to_threshold, ExperimentTrace};
use crate::reward::{
    composite_reward, default_embedding, explicit_reward, implicit_reward, importance_correct,
    multi_objective_reward, quality_score, PropensityEstimator, QualitySignals, RewardBreakdown,
    RewardMode, RewardWeights,
};
use crate::rng::{stream, streams, BanditRng};
use crate::sim::{generate_query, EnvironmentSpec, SimulatedUser};

static DEFAULT_RESPONDER: MockResponder = MockResponder;

/// Everything a run needs besides the environment, policy, and seed.
#[derive(Clone)]
pub struct RunOptions<'a> {
    pub lexicon: &'a Lexicon,
    pub feature_spec: FeatureSpec,
    pub weights: RewardWeights,
    pub reward_mode: RewardMode,
    pub alpha0: f64,
    pub beta0: f64,
    /// Heuristic keyword gate for the first few strategy-mode queries.
    pub warm_start: bool,
    pub warm_threshold: f64,
    pub warm_queries: u64,
    /// Sliding-window adaptation: rebuild from the last W records.
    pub window: Option<usize>,
    /// Forgetting-factor adaptation: decay evidence once per step.
    pub gamma: Option<f64>,
    /// Probability the simulated user returns an explicit rating.
    pub feedback_rate: f64,
    /// Context-feature ablation: replace every context with all-ones.
    pub all_ones_context: bool,
    /// Start from a previously saved posterior instead of fresh priors.
    pub initial_posterior: Option<PosteriorState>,
    pub responder: &'a (dyn Responder + Sync),
    pub catalog: Option<&'a ActionCatalog>,
}

impl<'a> RunOptions<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        Self {
            lexicon,
            feature_spec: FeatureSpec::standard(),
            weights: RewardWeights::default(),
            reward_mode: RewardMode::Binary,
            alpha0: 1.0,
            beta0: 1.0,
            warm_start: false,
            warm_threshold: DEFAULT_WARM_THRESHOLD,
            warm_queries: DEFAULT_WARM_QUERIES,
            window: None,
            gamma: None,
            feedback_rate: 1.0,
            all_ones_context: false,
            initial_posterior: None,
            responder: &DEFAULT_RESPONDER,
            catalog: None,
        }
    }

    fn validate(&self, env: &EnvironmentSpec) -> Result<()> {
        self.weights.validate()?;
        if self.window.is_some() && self.gamma.is_some() {
            return Err(Error::invalid(
                "window and gamma adaptation are mutually exclusive",
            ));
        }
        if let Some(w) = self.window {
            if w == 0 {
                return Err(Error::invalid("window must be >= 1"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::invalid(format!("gamma {g} outside (0, 1]")));
            }
        }
        if !(self.feedback_rate > 0.0 && self.feedback_rate <= 1.0) {
            return Err(Error::invalid("feedback_rate outside (0, 1]"));
        }
        if self.warm_start && env.mode != ActionMode::Strategy {
            return Err(Error::UnsupportedMode(
                "warm start requires a strategy-mode environment".into(),
            ));
        }
        if self.initial_posterior.is_some() && (self.window.is_some() || self.gamma.is_some()) {
            return Err(Error::invalid(
                "a loaded initial posterior cannot be combined with window or gamma \
                 rebuilds, which reconstruct state from fresh priors",
            ));
        }
        Ok(())
    }
}

/// How the executed action was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SelectedBy {
    Policy,
    WarmStart,
}

impl SelectedBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectedBy::Policy => "policy",
            SelectedBy::WarmStart => "warm_start",
        }
    }
}

/// Per-step detail beyond the bare interaction record; feeds the JSONL
/// log and pattern analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub query_id: String,
    pub query_text: String,
    pub archetype: String,
    pub context: Vec<f64>,
    pub action: String,
    pub selected_by: SelectedBy,
    pub sampled_scores: Vec<f64>,
    pub expected_rewards: Vec<f64>,
    pub response_latency: f64,
    pub response_tokens: u32,
    pub breakdown: RewardBreakdown,
    pub updated: bool,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: ExperimentTrace,
    pub steps: Vec<StepLog>,
    pub posterior: PosteriorState,
    pub history: HistoryBuffer,
}

/// Execute one seeded run of `t_steps` interactions.
pub fn run_experiment(
    env: &EnvironmentSpec,
    policy: &PolicyConfig,
    t_steps: u64,
    seed: u64,
    options: &RunOptions<'_>,
) -> Result<RunOutput> {
    if t_steps < 1 {
        return Err(Error::invalid("t_steps must be >= 1"));
    }
    env.validate()?;
    options.validate(env)?;
    policy.validate()?;

    let space = env.action_space()?;
    let dim = options.feature_spec.dim();
    let owned_catalog;
    let catalog = match options.catalog {
        Some(c) => c,
        None => {
            owned_catalog = ActionCatalog::default_for(env.mode)?;
            &owned_catalog
        }
    };
    catalog.covers(&space)?;

    let mut posterior = match &options.initial_posterior {
        Some(loaded) => {
            if loaded.num_actions() != space.len() || loaded.dim() != dim {
                return Err(Error::invalid(alloc::format!(
                    "loaded posterior shape {}x{} does not match {} actions x d={}",
                    loaded.num_actions(),
                    loaded.dim(),
                    space.len(),
                    dim
                )));
            }
            loaded.clone()
        }
        None => PosteriorState::init(space.len(), dim, options.alpha0, options.beta0)?,
    };
    let mut history = match options.window {
        Some(w) => HistoryBuffer::ring(w)?,
        None => HistoryBuffer::unbounded(),
    };
    let mut policy_rng = BanditRng::seed_from_u64(seed);
    let mut query_rng = stream(seed, streams::QUERIES);
    let mut user = SimulatedUser::new(stream(seed, streams::FEEDBACK), options.feedback_rate)?;
    let mut prop_est = PropensityEstimator::new(space.len());

    let mut records = Vec::with_capacity(t_steps as usize);
    let mut optimal_expected = Vec::with_capacity(t_steps as usize);
    let mut chosen_expected = Vec::with_capacity(t_steps as usize);
    let mut steps = Vec::with_capacity(t_steps as usize);

    for step in 1..=t_steps {
        if let Some(gamma) = options.gamma {
            posterior.decay_evidence(gamma)?;
        }

        let query = generate_query(env, &mut query_rng, format!("{seed}-{step}"))?;
        let archetype = query.archetype.clone().unwrap_or_default();
        let x = if options.all_ones_context {
            ContextVector::all_ones(dim)?
        } else {
            extract(&query, options.lexicon, &options.feature_spec)?
        };

        // The policy always runs (and always consumes the same stream),
        // so warm-started runs stay step-aligned with plain runs.
        let selection = select(&posterior, &space, &x, policy, &mut policy_rng)?;
        let learning_policy = matches!(
            policy.kind,
            crate::bandit::PolicyKind::Thompson
                | crate::bandit::PolicyKind::EpsilonGreedy
                | crate::bandit::PolicyKind::Ucb
        );
        let warm_choice =
            if options.warm_start && learning_policy && env.mode == ActionMode::Strategy {
                warmstart_select(
                    &x,
                    &options.feature_spec,
                    &space,
                    options.warm_threshold,
                    options.warm_queries,
                    step,
                )?
            } else {
                None
            };
        let (action, selected_by, propensity) = match warm_choice {
            Some(a) => (a, SelectedBy::WarmStart, 1.0),
            None => (
                selection.action.clone(),
                SelectedBy::Policy,
                selection.propensity,
            ),
        };
        let arm = space.index_of(&action)?;

        let config = catalog.config_for_action(&action)?;
        let response = options.responder.respond(&action, config, &query)?;

        let mut event = user.interact(env, &archetype, &action, step)?;
        event.latency = response.latency;
        event.tokens_used = response.tokens;

        let mut breakdown = RewardBreakdown {
            propensity,
            ..RewardBreakdown::default()
        };
        let reward_final = match options.reward_mode {
            RewardMode::Binary => {
                let explicit = explicit_reward(&event);
                breakdown.reward_explicit = explicit;
                let applied = explicit.map(|r| {
                    if options.feedback_rate < 1.0 {
                        let (raw, clamped) = importance_correct(r, prop_est.estimate(arm));
                        breakdown.reward_corrected_raw = Some(raw);
                        clamped
                    } else {
                        r
                    }
                });
                prop_est.observe(arm, explicit.is_some());
                applied
            }
            RewardMode::Composite => {
                let explicit = explicit_reward(&event);
                let implicit = implicit_reward(&event, &options.weights);
                let quality = quality_score(
                    &mock_quality_signals(
                        &query.text,
                        &response.text,
                        response.tokens,
                        &options.weights,
                    ),
                    &options.weights,
                )?;
                let composite =
                    composite_reward(explicit, implicit, quality.combined, &options.weights)?;
                breakdown.reward_explicit = explicit;
                breakdown.reward_implicit = Some(implicit);
                breakdown.reward_quality = Some(quality.combined);
                breakdown.reward_composite = Some(composite);
                Some(composite)
            }
            RewardMode::MultiObjective => {
                let explicit = event.explicit;
                breakdown.reward_explicit = explicit.map(f64::from);
                let applied = match explicit {
                    Some(up) => {
                        let r = multi_objective_reward(
                            up,
                            response.latency,
                            response.tokens,
                            &options.weights,
                        )?;
                        Some(if options.feedback_rate < 1.0 {
                            let (raw, clamped) = importance_correct(r, prop_est.estimate(arm));
                            breakdown.reward_corrected_raw = Some(raw);
                            clamped
                        } else {
                            r
                        })
                    }
                    None => None,
                };
                prop_est.observe(arm, explicit.is_some());
                applied
            }
        };
        breakdown.reward_final = reward_final;

        let updated = if let Some(reward) = reward_final {
            let record = InteractionRecord {
                step,
                context: x.clone(),
                action: action.clone(),
                reward,
                propensity,
                timestamp: step,
            };
            history.push(record)?;
            match options.window {
                Some(w) => {
                    posterior =
                        rebuild_window(&space, &history, w, dim, options.alpha0, options.beta0)?;
                }
                None => posterior.update(arm, &x, reward)?,
            }
            true
        } else {
            false
        };

        let (_, best_p) = env.optimal_action(&archetype, &space)?;
        optimal_expected.push(best_p);
        chosen_expected.push(env.effective_prob(&archetype, &action)?);

        records.push(InteractionRecord {
            step,
            context: x.clone(),
            action: action.clone(),
            reward: reward_final.unwrap_or(0.0),
            propensity,
            timestamp: step,
        });
        steps.push(StepLog {
            step,
            query_id: query.id.clone(),
            query_text: query.text.clone(),
            archetype,
            context: x.values().to_vec(),
            action,
            selected_by,
            sampled_scores: selection.sampled_scores,
            expected_rewards: selection.expected_rewards,
            response_latency: response.latency,
            response_tokens: response.tokens,
            breakdown,
            updated,
        });
    }

    let trace = ExperimentTrace {
        records,
        optimal_expected: Some(optimal_expected),
        chosen_expected: Some(chosen_expected),
        policy: policy.kind.as_str().to_string(),
        seed,
    };
    trace.validate()?;
    Ok(RunOutput {
        trace,
        steps,
        posterior,
        history,
    })
}

/// Deterministic quality signals for the mock pipeline: length against
/// half the token budget, hash-derived citation count, hashed-embedding
/// coherence, constant-safe moderation.
fn mock_quality_signals(
    query_text: &str,
    response_text: &str,
    response_tokens: u32,
    weights: &RewardWeights,
) -> QualitySignals {
    let target = weights.max_tokens / 2;
    QualitySignals {
        response_length: response_tokens,
        target_length: target,
        sigma_length: f64::from(weights.max_tokens) / 4.0,
        citations: (crate::math::fnv1a_64(response_text.as_bytes()) % 3) as u32,
        citations_expected: 2,
        query_embedding: default_embedding(query_text, 64).unwrap_or_default(),
        response_embedding: default_embedding(response_text, 64).unwrap_or_default(),
        unsafe_probs: Vec::new(),
    }
}

/// Count executed actions per archetype over the last `last_n` steps.
pub fn archetype_action_frequencies(
    steps: &[StepLog],
    last_n: usize,
) -> BTreeMap<String, BTreeMap<String, u64>> {
    let skip = steps.len().saturating_sub(last_n);
    let mut out: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for s in &steps[skip..] {
        *out.entry(s.archetype.clone())
            .or_default()
            .entry(s.action.clone())
            .or_insert(0) += 1;
    }
    out
}

/// Aggregate results for one policy across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub policy: String,
    pub mean_success: f64,
    pub std_success: f64,
    /// Mean queries to the rolling-success threshold; runs that never
    /// reach it are censored at the horizon `t_steps`.
    pub mean_queries_to_threshold: f64,
    pub std_queries_to_threshold: f64,
    /// Fraction of seeds that reached the threshold at all.
    pub reach_fraction: f64,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
}

/// Multi-policy comparison over a common environment and seed list.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub rows: Vec<ComparisonRow>,
    pub t_steps: u64,
    pub seeds: usize,
    pub threshold: f64,
    pub rolling_window: usize,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, crate::math::sqrt(var))
}

/// Run every policy over every seed and summarize.
pub fn compare_policies(
    env: &EnvironmentSpec,
    policies: &[(String, PolicyConfig)],
    t_steps: u64,
    seeds: &[u64],
    threshold: f64,
    rolling_window: usize,
    options: &RunOptions<'_>,
) -> Result<ComparisonSummary> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    if policies.is_empty() {
        return Err(Error::invalid("need at least one policy"));
    }
    let mut rows = Vec::with_capacity(policies.len());
    for (label, config) in policies {
        let mut successes = Vec::with_capacity(seeds.len());
        let mut q2t = Vec::with_capacity(seeds.len());
        let mut reached = 0usize;
        let mut regrets = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let out = run_experiment(env, config, t_steps, seed, options)?;
            successes.push(out.trace.success_rate());
            match queries_to_threshold(&out.trace, threshold, rolling_window)? {
                Some(step) => {
                    reached += 1;
                    q2t.push(step as f64);
                }
                None => q2t.push(t_steps as f64),
            }
            let regret = cumulative_regret(&out.trace)?;
            regrets.push(regret.last().copied().unwrap_or(0.0));
        }
        let (mean_success, std_success) = mean_std(&successes);
        let (mean_q, std_q) = mean_std(&q2t);
        let (mean_r, std_r) = mean_std(&regrets);
        rows.push(ComparisonRow {
            policy: label.clone(),
            mean_success,
            std_success,
            mean_queries_to_threshold: mean_q,
            std_queries_to_threshold: std_q,
            reach_fraction: reached as f64 / seeds.len() as f64,
            mean_final_regret: mean_r,
            std_final_regret: std_r,
        });
    }
    Ok(ComparisonSummary {
        rows,
        t_steps,
        seeds: seeds.len(),
        threshold,
        rolling_window,
    })
}

impl ComparisonSummary {
    /// Aligned text table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "policies over {} seeds, T={}, threshold {} (window {})\n",
            self.seeds, self.t_steps, self.threshold, self.rolling_window
        ));
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>10} {:>8} {:>8} {:>10} {:>8}\n",
            "policy", "success", "sd", "to-thresh", "sd", "reached", "regret", "sd"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>8.3} {:>8.3} {:>10.1} {:>8.1} {:>7.0}% {:>10.2} {:>8.2}\n",
                r.policy,
                r.mean_success,
                r.std_success,
                r.mean_queries_to_threshold,
                r.std_queries_to_threshold,
                r.reach_fraction * 100.0,
                r.mean_final_regret,
                r.std_final_regret
            ));
        }
        out
    }
}
