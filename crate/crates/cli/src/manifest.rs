//! Run manifests: everything a command needs to reproduce an experiment.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use quiver_core::bandit::PolicyConfig;
use quiver_core::reward::RewardMode;

/// Warm-start switch. `Auto` enables the gate on strategy-mode
/// environments for learning policies and disables it elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStartOpt {
    #[default]
    Auto,
    On,
    Off,
}

impl std::str::FromStr for WarmStartOpt {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(WarmStartOpt::Auto),
            "on" | "true" => Ok(WarmStartOpt::On),
            "off" | "false" => Ok(WarmStartOpt::Off),
            other => bail!("warm-start must be auto|on|off, got '{other}'"),
        }
    }
}

/// Fully resolved description of one experiment batch.
#[derive(Debug, Clone)]
pub struct RunManifest {
    /// Builtin env name or path to an env JSON.
    pub env: String,
    /// Policy labels; one for simulate, two or more for compare.
    pub policies: Vec<String>,
    pub t_steps: u64,
    pub seeds: Vec<u64>,
    pub warm_start: WarmStartOpt,
    pub window: Option<usize>,
    pub gamma: Option<f64>,
    pub reward_mode: RewardMode,
    pub rolling_window: usize,
    pub threshold: f64,
    pub feedback_rate: f64,
    pub epsilon: f64,
    pub ucb_c: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub lexicon: Option<PathBuf>,
    pub init_state: Option<PathBuf>,
    pub save_state: bool,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps < 1 {
            bail!("T must be >= 1");
        }
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        if self.policies.is_empty() {
            bail!("no policy given");
        }
        if self.rolling_window == 0 {
            bail!("rolling window must be >= 1");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            bail!("threshold must be in (0, 1]");
        }
        if self.window.is_some() && self.gamma.is_some() {
            bail!("--window and --gamma are mutually exclusive");
        }
        Ok(())
    }

    /// Resolve a policy label to a config using this manifest's
    /// hyperparameters.
    pub fn policy_config(&self, label: &str) -> Result<PolicyConfig> {
        let config = match label {
            "thompson" => PolicyConfig::thompson(),
            "random" => PolicyConfig::random(),
            "epsilon_greedy" => PolicyConfig::epsilon_greedy(self.epsilon),
            "ucb" => PolicyConfig::ucb(self.ucb_c),
            other => match other.strip_prefix("fixed:") {
                Some(action) if !action.is_empty() => PolicyConfig::fixed(action),
                _ => bail!(
                    "unknown policy '{other}'; expected thompson, random, \
                     epsilon_greedy, ucb, or fixed:<action>"
                ),
            },
        };
        config
            .validate()
            .map_err(|e| anyhow::anyhow!("policy '{label}': {e}"))?;
        Ok(config)
    }
}

/// Parse a seed specification: a count (`50` means `0..50`), an
/// exclusive range (`10..60`), or a comma list (`1,2,7`).
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((start, end)) = spec.split_once("..") {
        let start: u64 = start.trim().parse().context("range start")?;
        let end: u64 = end.trim().parse().context("range end")?;
        if end <= start {
            bail!("empty seed range {spec}");
        }
        return Ok((start..end).collect());
    }
    if spec.contains(',') {
        let mut seeds = Vec::new();
        for part in spec.split(',') {
            seeds.push(
                part.trim()
                    .parse::<u64>()
                    .with_context(|| format!("seed '{part}'"))?,
            );
        }
        return Ok(seeds);
    }
    let n: u64 = spec.parse().context("seed count")?;
    if n == 0 {
        bail!("seed count must be >= 1");
    }
    Ok((0..n).collect())
}

/// Parse `--reward-mode`.
pub fn parse_reward_mode(s: &str) -> Result<RewardMode> {
    match s {
        "binary" => Ok(RewardMode::Binary),
        "composite" => Ok(RewardMode::Composite),
        "multi_objective" => Ok(RewardMode::MultiObjective),
        other => bail!("reward mode must be binary|composite|multi_objective, got '{other}'"),
    }
}
