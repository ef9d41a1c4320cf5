//! Action-to-agent configuration and the pluggable responder interface.
//!
//! Selecting an arm configures how the downstream agent behaves: its
//! system prompt, sampling temperature, tool set, and token budget. Real
//! LLM execution is out of scope here; the shipped responder is a
//! deterministic mock that fabricates response metadata (marker text,
//! latency, token count) from the configuration and query alone.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::action::{ActionMode, ActionSpace};
use crate::error::{Error, Result};
use crate::features::Query;
use crate::math::fnv1a_64;

/// Parameters applied to the agent when an action is selected.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentConfig {
    pub system_prompt: String,
    pub temperature: f64,
    pub tools: BTreeSet<String>,
    pub max_tokens: u32,
}

impl AgentConfig {
    pub fn new(system_prompt: impl Into<String>, temperature: f64) -> Result<Self> {
        let config = Self {
            system_prompt: system_prompt.into(),
            temperature,
            tools: BTreeSet::new(),
            max_tokens: 1000,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tool(mut self, tool: impl Into<String>) -> Self {
        self.tools.insert(tool.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) || !self.temperature.is_finite() {
            return Err(Error::invalid(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::invalid("max_tokens must be > 0"));
        }
        Ok(())
    }
}

/// Ordered mapping from every action of one mode to its agent config.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCatalog {
    mode: ActionMode,
    entries: Vec<(String, AgentConfig)>,
}

impl ActionCatalog {
    pub fn new(mode: ActionMode, entries: Vec<(String, AgentConfig)>) -> Result<Self> {
        for (_, config) in &entries {
            config.validate()?;
        }
        Ok(Self { mode, entries })
    }

    /// Built-in catalog for a mode's canonical action set.
    pub fn default_for(mode: ActionMode) -> Result<Self> {
        let cfg = |prompt: &str, temp: f64| AgentConfig {
            system_prompt: prompt.to_string(),
            temperature: temp,
            tools: BTreeSet::new(),
            max_tokens: 1000,
        };
        let entries: Vec<(String, AgentConfig)> = match mode {
            ActionMode::Strategy => alloc::vec![
                (
                    "direct".to_string(),
                    cfg("Provide a concise, direct answer.", 0.5),
                ),
                (
                    "chain_of_thought".to_string(),
                    cfg("Think step-by-step and show your reasoning.", 0.7),
                ),
            ],
            ActionMode::Tool => alloc::vec![
                (
                    "none".to_string(),
                    cfg("Answer from your own knowledge without calling tools.", 0.5),
                ),
                (
                    "pubmed".to_string(),
                    cfg(
                        "Search the literature index and ground the answer in citations.",
                        0.5
                    )
                    .with_tool("pubmed"),
                ),
                (
                    "drugdb".to_string(),
                    cfg("Look up the pharmaceutical database before answering.", 0.5)
                        .with_tool("drugdb"),
                ),
                (
                    "calculator".to_string(),
                    cfg(
                        "Use the calculator for any numeric work and show the result.",
                        0.5
                    )
                    .with_tool("calculator"),
                ),
                (
                    "web".to_string(),
                    cfg("Run a web search for background before answering.", 0.5).with_tool("web"),
                ),
            ],
            ActionMode::Domain => alloc::vec![
                (
                    "general".to_string(),
                    cfg(
                        "You are a broad life-sciences assistant; give balanced answers.",
                        0.5
                    ),
                ),
                (
                    "pharma".to_string(),
                    cfg(
                        "You are a pharmacology specialist; emphasize mechanisms, \
                         interactions, and safety.",
                        0.5,
                    ),
                ),
                (
                    "molbio".to_string(),
                    cfg(
                        "You are a molecular biology specialist; explain genes, proteins, \
                         and pathways mechanistically.",
                        0.5,
                    ),
                ),
                (
                    "clinical".to_string(),
                    cfg(
                        "You are a clinical specialist; follow evidence-based guidelines \
                         and include care disclaimers.",
                        0.5,
                    ),
                ),
                (
                    "research".to_string(),
                    cfg(
                        "You are a research methodology specialist; weigh evidence \
                         quality and cite recent findings.",
                        0.5,
                    ),
                ),
            ],
            ActionMode::Custom => {
                return Err(Error::UnsupportedMode(
                    "custom mode has no built-in catalog".into(),
                ))
            }
        };
        Ok(Self { mode, entries })
    }

    pub fn mode(&self) -> ActionMode {
        self.mode
    }

    /// Fetch the config mapped to an action.
    pub fn config_for_action(&self, action: &str) -> Result<&AgentConfig> {
        self.entries
            .iter()
            .find(|(id, _)| id == action)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::not_found(format!("action '{action}' in catalog")))
    }

    /// Verify the catalog covers every action in the space.
    pub fn covers(&self, space: &ActionSpace) -> Result<()> {
        for id in space.ids() {
            self.config_for_action(id)?;
        }
        Ok(())
    }
}

/// Response metadata produced by a responder.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseMeta {
    pub text: String,
    /// Seconds.
    pub latency: f64,
    pub tokens: u32,
}

/// Anything that can turn (action, config, query) into a response. Real
/// LLM/tool clients implement this same contract out of tree.
pub trait Responder {
    fn respond(&self, action: &str, config: &AgentConfig, query: &Query) -> Result<ResponseMeta>;
}

/// Deterministic canned responder. Latency and token counts are derived
/// from a hash of the action and query text, scaled by the config's
/// temperature and token budget, so multi-objective rewards have
/// realistic, reproducible inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockResponder;

impl Responder for MockResponder {
    fn respond(&self, action: &str, config: &AgentConfig, query: &Query) -> Result<ResponseMeta> {
        config.validate()?;
        let h = fnv1a_64(format!("{action}\u{1f}{}", query.text).as_bytes());
        let jitter = (h % 1000) as f64 / 1000.0;
        let budget = f64::from(config.max_tokens);
        // Hotter configs ramble more; everything stays within budget.
        let fill = 0.3 + 0.2 * (config.temperature / 2.0) + 0.3 * jitter;
        let tokens = ((budget * fill) as u32).clamp(1, config.max_tokens);
        let latency =
            0.3 + 2.0 * f64::from(tokens) / budget + 0.5 * ((h >> 10) % 1000) as f64 / 1000.0;
        Ok(ResponseMeta {
            text: format!("[{action}] {}", query.text),
            latency,
            tokens,
        })
    }
}
