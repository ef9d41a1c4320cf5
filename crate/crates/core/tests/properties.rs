//! Cross-module invariants checked against independent oracles.

use proptest::prelude::*;
use quiver_core::action::ActionSpace;
use quiver_core::bandit::{select, PolicyConfig, PosteriorState};
use quiver_core::context::ContextVector;
use quiver_core::rng::BanditRng;

/// Minimal plain Beta-Bernoulli counter, independent of the contextual
/// implementation: one (alpha, beta) pair per arm, unit count updates.
#[derive(Debug, Clone, PartialEq)]
struct PlainBetaBernoulli {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl PlainBetaBernoulli {
    fn new(arms: usize, alpha0: f64, beta0: f64) -> Self {
        Self {
            alpha: vec![alpha0; arms],
            beta: vec![beta0; arms],
        }
    }

    fn update(&mut self, arm: usize, success: bool) {
        if success {
            self.alpha[arm] += 1.0;
        } else {
            self.beta[arm] += 1.0;
        }
    }
}

proptest! {
    /// With d = 1 and a constant all-ones context, the contextual
    /// posterior is state-identical to plain Beta-Bernoulli counting
    /// after any interaction sequence (exact float equality).
    #[test]
    fn conjugacy_reduces_to_plain_beta_bernoulli(
        script in proptest::collection::vec((0usize..3, proptest::bool::ANY), 1..200),
        priors in (0.5f64..3.0, 0.5f64..3.0),
    ) {
        let (alpha0, beta0) = priors;
        let x = ContextVector::new(vec![1.0]).unwrap();
        let mut contextual = PosteriorState::init(3, 1, alpha0, beta0).unwrap();
        let mut plain = PlainBetaBernoulli::new(3, alpha0, beta0);
        for (arm, success) in script {
            contextual
                .update(arm, &x, if success { 1.0 } else { 0.0 })
                .unwrap();
            plain.update(arm, success);
        }
        for arm in 0..3 {
            prop_assert_eq!(contextual.alpha(arm), &[plain.alpha[arm]]);
            prop_assert_eq!(contextual.beta(arm), &[plain.beta[arm]]);
            // The sampling layer sees exactly the plain counts.
            let (a, b) = contextual.weighted_params(arm, &x).unwrap();
            prop_assert_eq!(a, plain.alpha[arm]);
            prop_assert_eq!(b, plain.beta[arm]);
        }
    }

    /// Binary updates conserve mass: total posterior mass above the
    /// priors equals the componentwise sum of observed contexts.
    #[test]
    fn binary_updates_conserve_context_mass(
        script in proptest::collection::vec(
            (0usize..4, proptest::bool::ANY, proptest::collection::vec(0.0f64..=1.0, 3)),
            1..120,
        ),
    ) {
        let arms = 4;
        let d = 3;
        let mut posterior = PosteriorState::init(arms, d, 1.0, 1.0).unwrap();
        let mut expected = vec![0.0f64; d];
        for (arm, success, values) in script {
            let Ok(x) = ContextVector::new(values) else { continue };
            posterior
                .update(arm, &x, if success { 1.0 } else { 0.0 })
                .unwrap();
            for (acc, v) in expected.iter_mut().zip(x.values()) {
                *acc += v;
            }
        }
        for (i, observed) in expected.iter().enumerate() {
            let total: f64 = (0..arms)
                .map(|a| posterior.alpha(a)[i] + posterior.beta(a)[i])
                .sum();
            let gained = total - (arms as f64) * 2.0;
            let tolerance = 1e-9 * observed.max(1.0);
            prop_assert!(
                (gained - observed).abs() <= tolerance,
                "component {i}: gained {gained}, observed {observed}"
            );
        }
    }

    /// A success on a strictly positive context strictly increases the
    /// expected reward for that (action, context) pair.
    #[test]
    fn success_update_strictly_increases_expected_reward(
        values in proptest::collection::vec(0.01f64..=1.0, 1..6),
        warmup in proptest::collection::vec(proptest::bool::ANY, 0..40),
    ) {
        let d = values.len();
        let x = ContextVector::new(values).unwrap();
        let mut posterior = PosteriorState::init(2, d, 1.0, 1.0).unwrap();
        for success in warmup {
            posterior.update(0, &x, if success { 1.0 } else { 0.0 }).unwrap();
        }
        let before = posterior.expected_reward(0, &x).unwrap();
        posterior.update(0, &x, 1.0).unwrap();
        let after = posterior.expected_reward(0, &x).unwrap();
        prop_assert!(after > before, "{after} <= {before}");
    }

    /// Expected reward and variance stay within their analytic ranges
    /// for every reachable state.
    #[test]
    fn moments_stay_in_range(
        script in proptest::collection::vec(
            (0usize..2, 0.0f64..=1.0, proptest::collection::vec(0.0f64..=1.0, 2)),
            0..60,
        ),
        probe in proptest::collection::vec(0.01f64..=1.0, 2),
    ) {
        let mut posterior = PosteriorState::init(2, 2, 1.0, 1.0).unwrap();
        for (arm, reward, values) in script {
            let Ok(x) = ContextVector::new(values) else { continue };
            posterior.update(arm, &x, reward).unwrap();
        }
        let x = ContextVector::new(probe).unwrap();
        for arm in 0..2 {
            let mean = posterior.expected_reward(arm, &x).unwrap();
            let var = posterior.reward_variance(arm, &x).unwrap();
            prop_assert!(mean > 0.0 && mean < 1.0);
            prop_assert!(var > 0.0 && var <= 0.25);
        }
    }
}

/// Same seed and interaction script: selections match bit for bit,
/// including scores and propensities.
#[test]
fn scripted_selection_replay_is_bit_stable() {
    let space = ActionSpace::domain();
    let run = || {
        let mut posterior = PosteriorState::init(5, 5, 1.0, 1.0).unwrap();
        let mut rng = BanditRng::seed_from_u64(4242);
        let cfg = PolicyConfig::thompson();
        let mut picks = Vec::new();
        for step in 0..120u64 {
            let values: Vec<f64> = (0..5)
                .map(|i| if (step + i) % 3 == 0 { 0.9 } else { 0.2 })
                .collect();
            let x = ContextVector::new(values).unwrap();
            let result = select(&posterior, &space, &x, &cfg, &mut rng).unwrap();
            posterior
                .update(result.action_index, &x, f64::from((step % 2) as u32))
                .unwrap();
            picks.push(result);
        }
        picks
    };
    assert_eq!(run(), run());
}
