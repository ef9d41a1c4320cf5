//! Synthetic environments: query generation and a simulated user with
//! per-(archetype, action) ground-truth success probabilities.
//!
//! An environment owns a set of query archetypes. Each archetype carries
//! text templates plus keywords injected into every generated query, so
//! the extracted feature vector reliably signals which archetype a query
//! came from — without the policy ever seeing the archetype label itself.

mod runner;

pub use runner::{
    archetype_action_frequencies, compare_policies, run_experiment, ComparisonRow,
    ComparisonSummary, RunOptions, RunOutput, SelectedBy, StepLog,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionMode, ActionSpace};
use crate::error::{Error, Result};
use crate::features::{tokenize, Query};
use crate::reward::FeedbackEvent;

/// One hidden query category.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Archetype {
    pub name: String,
    /// Complete query sentences; one is drawn per generated query.
    pub templates: Vec<String>,
    /// Keywords appended to the drawn template when not already present,
    /// guaranteeing the archetype's feature signature.
    #[cfg_attr(feature = "serde", serde(default))]
    pub inject_keywords: Vec<String>,
}

/// Ground truth for one simulated world.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvironmentSpec {
    pub mode: ActionMode,
    /// Explicit arm list; defaults to the mode's canonical set.
    #[cfg_attr(feature = "serde", serde(default))]
    pub actions: Vec<String>,
    pub archetypes: Vec<Archetype>,
    /// success_table[archetype][action] = Bernoulli success probability.
    pub success_table: BTreeMap<String, BTreeMap<String, f64>>,
    /// Archetype sampling weights, aligned with `archetypes`.
    #[cfg_attr(feature = "serde", serde(rename = "weights"))]
    pub archetype_weights: Vec<f64>,
    /// Probability of flipping the satisfaction label; 0 disables noise.
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise: f64,
    /// Archetypes allowed to have tied optimal actions.
    #[cfg_attr(feature = "serde", serde(default))]
    pub ties_ok: Vec<String>,
}

impl EnvironmentSpec {
    /// Resolve the action list into an ordered space.
    pub fn action_space(&self) -> Result<ActionSpace> {
        if self.actions.is_empty() {
            ActionSpace::for_mode(self.mode)
                .ok_or_else(|| Error::invalid("custom mode requires an explicit action list"))
        } else {
            ActionSpace::new(self.mode, self.actions.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.action_space()?;
        if self.archetypes.is_empty() {
            return Err(Error::invalid("environment needs at least one archetype"));
        }
        if self.archetype_weights.len() != self.archetypes.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} archetypes",
                self.archetype_weights.len(),
                self.archetypes.len()
            )));
        }
        if self
            .archetype_weights
            .iter()
            .any(|w| *w < 0.0 || !w.is_finite())
        {
            return Err(Error::invalid("archetype weights must be >= 0"));
        }
        let total: f64 = self.archetype_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "archetype weights sum to {total}, expected 1"
            )));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::invalid("noise must be in [0, 0.5)"));
        }
        for archetype in &self.archetypes {
            if archetype.templates.is_empty() {
                return Err(Error::invalid(format!(
                    "archetype '{}' has no templates",
                    archetype.name
                )));
            }
            let row = self.success_table.get(&archetype.name).ok_or_else(|| {
                Error::invalid(format!(
                    "success_table missing archetype '{}'",
                    archetype.name
                ))
            })?;
            let mut best = f64::NEG_INFINITY;
            let mut best_count = 0;
            for action in space.ids() {
                let p = row.get(action).ok_or_else(|| {
                    Error::invalid(format!(
                        "success_table missing ({}, {action})",
                        archetype.name
                    ))
                })?;
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!(
                        "success probability {p} outside [0, 1]"
                    )));
                }
                if *p > best + 1e-12 {
                    best = *p;
                    best_count = 1;
                } else if (*p - best).abs() <= 1e-12 {
                    best_count += 1;
                }
            }
            if best_count > 1 && !self.ties_ok.contains(&archetype.name) {
                return Err(Error::invalid(format!(
                    "archetype '{}' has tied optimal actions; declare it in ties_ok \
                     if intentional",
                    archetype.name
                )));
            }
        }
        Ok(())
    }

    /// Success probability including label-flip noise:
    /// `p*(1-noise) + (1-p)*noise`. Noise below 0.5 preserves the argmax.
    pub fn effective_prob(&self, archetype: &str, action: &str) -> Result<f64> {
        let p = self
            .success_table
            .get(archetype)
            .and_then(|row| row.get(action))
            .ok_or_else(|| {
                Error::not_found(format!("success_table entry ({archetype}, {action})"))
            })?;
        Ok(p + self.noise * (1.0 - 2.0 * p))
    }

    /// The Bayes-optimal action and its effective success probability.
    pub fn optimal_action(&self, archetype: &str, space: &ActionSpace) -> Result<(String, f64)> {
        let mut best_action = None;
        let mut best_p = f64::NEG_INFINITY;
        for action in space.ids() {
            let p = self.effective_prob(archetype, action)?;
            if p > best_p {
                best_p = p;
                best_action = Some(action.clone());
            }
        }
        best_action
            .map(|a| (a, best_p))
            .ok_or_else(|| Error::invalid("empty action space"))
    }

    fn archetype_index(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.archetype_weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.archetype_weights.len() - 1
    }
}

/// Instantiate one of an archetype's templates, appending any injected
/// keywords the template does not already contain.
pub fn instantiate_template(archetype: &Archetype, template_index: usize) -> Result<String> {
    let template = archetype
        .templates
        .get(template_index)
        .ok_or_else(|| Error::invalid(format!("template index {template_index} out of range")))?;
    let mut text = template.clone();
    let present = tokenize(&text);
    for kw in &archetype.inject_keywords {
        if !present.iter().any(|t| t == &kw.to_lowercase()) {
            text.push(' ');
            text.push_str(kw);
        }
    }
    Ok(text)
}

/// Draw one query: archetype by weight, template uniformly, then inject
/// the archetype's keywords. The archetype travels as a hidden label.
pub fn generate_query(
    env: &EnvironmentSpec,
    rng: &mut ChaCha8Rng,
    id: impl Into<String>,
) -> Result<Query> {
    let archetype = &env.archetypes[env.archetype_index(rng)];
    let template_index = rng.random_range(0..archetype.templates.len());
    let text = instantiate_template(archetype, template_index)?;
    Ok(Query::new(text, id)?.with_archetype(archetype.name.clone()))
}

/// Simulated feedback source. Satisfaction is drawn from the environment's
/// ground truth; the explicit rating is withheld with probability
/// `1 - feedback_rate`, while behavioural signals always leak through.
#[derive(Debug, Clone)]
pub struct SimulatedUser {
    pub feedback_rate: f64,
    rng: ChaCha8Rng,
}

impl SimulatedUser {
    pub fn new(rng: ChaCha8Rng, feedback_rate: f64) -> Result<Self> {
        if !(feedback_rate > 0.0 && feedback_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "feedback_rate {feedback_rate} outside (0, 1]"
            )));
        }
        Ok(Self { feedback_rate, rng })
    }

    /// Full interaction outcome: hidden satisfaction drawn once, mapped
    /// into an explicit rating (maybe withheld) plus implicit signals.
    pub fn interact(
        &mut self,
        env: &EnvironmentSpec,
        archetype: &str,
        action: &str,
        now: u64,
    ) -> Result<FeedbackEvent> {
        let p = self.success_table_prob(env, archetype, action)?;
        let mut satisfied = self.rng.random::<f64>() < p;
        if env.noise > 0.0 && self.rng.random::<f64>() < env.noise {
            satisfied = !satisfied;
        }
        let withheld = self.feedback_rate < 1.0 && self.rng.random::<f64>() >= self.feedback_rate;

        Ok(FeedbackEvent {
            explicit: if withheld { None } else { Some(satisfied) },
            read_time: if satisfied { 0.8 } else { 0.15 },
            followups: u32::from(satisfied),
            rephrases: if satisfied { 0 } else { 2 },
            latency: 0.0,
            tokens_used: 0,
            received_at: now,
        })
    }

    /// The explicit binary rating alone, when given.
    pub fn give_feedback(
        &mut self,
        env: &EnvironmentSpec,
        archetype: &str,
        action: &str,
    ) -> Result<Option<bool>> {
        Ok(self.interact(env, archetype, action, 0)?.explicit)
    }

    fn success_table_prob(
        &self,
        env: &EnvironmentSpec,
        archetype: &str,
        action: &str,
    ) -> Result<f64> {
        env.success_table
            .get(archetype)
            .and_then(|row| row.get(action))
            .copied()
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown (archetype, action) pair ({archetype}, {action})"
                ))
            })
    }
}

#[cfg(test)]
pub(crate) mod test_envs {
    use super::*;
    use crate::features::Lexicon;

    /// Frozen test lexicon shared by the simulation tests.
    pub fn lexicon() -> Lexicon {
        Lexicon::parse(
            "[complexity]\nhow\nwhy\nexplain\ndescribe\n\
             [drug]\naspirin\nwarfarin\nibuprofen\n\
             [protein]\np53\nkinase\ncrispr\n\
             [clinical]\ndiagnosis\ntreatment\ndose\n",
        )
        .unwrap()
    }

    /// Two-archetype strategy environment: factoids prefer direct,
    /// mechanism questions prefer chain-of-thought.
    pub fn strategy_env() -> EnvironmentSpec {
        let mut success_table = BTreeMap::new();
        let mut simple = BTreeMap::new();
        simple.insert("direct".to_string(), 0.85);
        simple.insert("chain_of_thought".to_string(), 0.30);
        success_table.insert("simple_factoid".to_string(), simple);
        let mut complex = BTreeMap::new();
        complex.insert("direct".to_string(), 0.30);
        complex.insert("chain_of_thought".to_string(), 0.85);
        success_table.insert("complex_mechanism".to_string(), complex);

        EnvironmentSpec {
            mode: ActionMode::Strategy,
            actions: Vec::new(),
            archetypes: alloc::vec![
                Archetype {
                    name: "simple_factoid".into(),
                    templates: alloc::vec![
                        "What is the standard dose of aspirin?".into(),
                        "What is the target of warfarin?".into(),
                    ],
                    inject_keywords: Vec::new(),
                },
                Archetype {
                    name: "complex_mechanism".into(),
                    templates: alloc::vec!["Explain how and why p53 halts the cycle".into(),],
                    inject_keywords: alloc::vec!["describe".into()],
                },
            ],
            success_table,
            archetype_weights: alloc::vec![0.5, 0.5],
            noise: 0.0,
            ties_ok: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_envs::strategy_env;
    use super::*;
    use crate::features::{extract, FeatureSpec};
    use crate::rng::{stream, streams};

    #[test]
    fn validate_accepts_the_test_env() {
        strategy_env().validate().unwrap();
    }

    #[test]
    fn validate_rejects_broken_specs() {
        let mut env = strategy_env();
        env.archetype_weights = alloc::vec![0.7, 0.7];
        assert!(env.validate().is_err());

        let mut env = strategy_env();
        env.success_table
            .get_mut("simple_factoid")
            .unwrap()
            .remove("direct");
        assert!(env.validate().is_err());

        let mut env = strategy_env();
        env.noise = 0.5;
        assert!(env.validate().is_err());

        // Undeclared tie.
        let mut env = strategy_env();
        env.success_table
            .get_mut("simple_factoid")
            .unwrap()
            .insert("chain_of_thought".into(), 0.85);
        assert!(env.validate().is_err());
        env.ties_ok = alloc::vec!["simple_factoid".into()];
        env.validate().unwrap();
    }

    #[test]
    fn generated_factoid_has_zero_complexity() {
        let env = strategy_env();
        let lex = super::test_envs::lexicon();
        let mut rng = stream(1, streams::QUERIES);
        for i in 0..50 {
            let q = generate_query(&env, &mut rng, format!("q{i}")).unwrap();
            let x = extract(&q, &lex, &FeatureSpec::standard()).unwrap();
            match q.archetype.as_deref() {
                Some("simple_factoid") => {
                    assert_eq!(x.get(FeatureSpec::COMPLEXITY).unwrap(), 0.0)
                }
                Some("complex_mechanism") => {
                    // how, why, explain, describe: the full frozen set.
                    assert!(x.get(FeatureSpec::COMPLEXITY).unwrap() > 0.5)
                }
                other => panic!("unexpected archetype {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_weights_always_pick_first_archetype() {
        let mut env = strategy_env();
        env.archetype_weights = alloc::vec![1.0, 0.0];
        let mut rng = stream(2, streams::QUERIES);
        for i in 0..20 {
            let q = generate_query(&env, &mut rng, format!("q{i}")).unwrap();
            assert_eq!(q.archetype.as_deref(), Some("simple_factoid"));
        }
    }

    #[test]
    fn archetype_frequencies_follow_weights() {
        let env = strategy_env();
        let mut rng = stream(3, streams::QUERIES);
        let n = 10_000;
        let mut simple = 0;
        for i in 0..n {
            let q = generate_query(&env, &mut rng, format!("q{i}")).unwrap();
            if q.archetype.as_deref() == Some("simple_factoid") {
                simple += 1;
            }
        }
        let f = f64::from(simple) / f64::from(n);
        assert!((f - 0.5).abs() < 0.02, "frequency {f}");
    }

    #[test]
    fn feedback_matches_ground_truth_rate() {
        let mut env = strategy_env();
        env.success_table
            .get_mut("simple_factoid")
            .unwrap()
            .insert("direct".into(), 1.0);
        // Tie introduced by the edit; declare it.
        env.success_table
            .get_mut("simple_factoid")
            .unwrap()
            .insert("chain_of_thought".into(), 0.2);

        let mut user = SimulatedUser::new(stream(4, streams::FEEDBACK), 1.0).unwrap();
        for _ in 0..50 {
            let fb = user
                .give_feedback(&env, "simple_factoid", "direct")
                .unwrap();
            assert_eq!(fb, Some(true));
        }

        // Bernoulli(0.85) mean over ten thousand draws.
        let env = strategy_env();
        let mut user = SimulatedUser::new(stream(5, streams::FEEDBACK), 1.0).unwrap();
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            if user
                .give_feedback(&env, "simple_factoid", "direct")
                .unwrap()
                == Some(true)
            {
                hits += 1;
            }
        }
        let mean = f64::from(hits) / f64::from(n);
        assert!((mean - 0.85).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn unknown_pair_is_invalid_argument() {
        let env = strategy_env();
        let mut user = SimulatedUser::new(stream(6, streams::FEEDBACK), 1.0).unwrap();
        assert!(user.give_feedback(&env, "nope", "direct").is_err());
        assert!(user
            .give_feedback(&env, "simple_factoid", "teleport")
            .is_err());
    }

    #[test]
    fn feedback_rate_withholds_explicit_but_not_implicit() {
        let env = strategy_env();
        let mut user = SimulatedUser::new(stream(7, streams::FEEDBACK), 0.5).unwrap();
        let n = 10_000;
        let mut absent = 0;
        for _ in 0..n {
            let event = user.interact(&env, "simple_factoid", "direct", 0).unwrap();
            if event.explicit.is_none() {
                absent += 1;
            }
            // Behavioural signals always present and consistent.
            assert!(event.read_time > 0.0);
        }
        let f = f64::from(absent) / f64::from(n);
        assert!((f - 0.5).abs() < 0.02, "absent frequency {f}");
        assert!(SimulatedUser::new(stream(8, 0), 0.0).is_err());
    }

    #[test]
    fn noise_flips_labels_at_the_declared_rate() {
        let mut env = strategy_env();
        env.noise = 0.1;
        env.success_table
            .get_mut("simple_factoid")
            .unwrap()
            .insert("direct".into(), 1.0);
        let mut user = SimulatedUser::new(stream(9, streams::FEEDBACK), 1.0).unwrap();
        let n = 10_000;
        let mut down = 0;
        for _ in 0..n {
            if user
                .give_feedback(&env, "simple_factoid", "direct")
                .unwrap()
                == Some(false)
            {
                down += 1;
            }
        }
        let f = f64::from(down) / f64::from(n);
        assert!((f - 0.1).abs() < 0.01, "flip frequency {f}");
        // Effective probability reflects the flip rate.
        assert!((env.effective_prob("simple_factoid", "direct").unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn optimal_action_reads_the_table() {
        let env = strategy_env();
        let space = env.action_space().unwrap();
        let (best, p) = env.optimal_action("simple_factoid", &space).unwrap();
        assert_eq!(best, "direct");
        assert!((p - 0.85).abs() < 1e-12);
        let (best, _) = env.optimal_action("complex_mechanism", &space).unwrap();
        assert_eq!(best, "chain_of_thought");
    }
}
