//! Discrete action spaces.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Which dimension of agent behaviour the actions select over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ActionMode {
    Strategy,
    Tool,
    Domain,
    Custom,
}

impl ActionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionMode::Strategy => "strategy",
            ActionMode::Tool => "tool",
            ActionMode::Domain => "domain",
            ActionMode::Custom => "custom",
        }
    }
}

/// An ordered set of action identifiers. The position of an identifier is
/// its arm index, and that order is stable for the lifetime of the space.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionSpace {
    actions: Vec<String>,
    mode: ActionMode,
}

impl ActionSpace {
    pub fn new(mode: ActionMode, actions: Vec<String>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::invalid("action space must be non-empty"));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::invalid("action identifiers must be non-empty"));
            }
            if actions[..i].contains(a) {
                return Err(Error::invalid(alloc::format!(
                    "duplicate action identifier '{a}'"
                )));
            }
        }
        Ok(Self { actions, mode })
    }

    /// The generation-strategy action set.
    pub fn strategy() -> Self {
        Self {
            actions: ["direct", "chain_of_thought"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            mode: ActionMode::Strategy,
        }
    }

    /// The tool-selection action set.
    pub fn tool() -> Self {
        Self {
            actions: ["none", "pubmed", "drugdb", "calculator", "web"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            mode: ActionMode::Tool,
        }
    }

    /// The domain-routing action set.
    pub fn domain() -> Self {
        Self {
            actions: ["general", "pharma", "molbio", "clinical", "research"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            mode: ActionMode::Domain,
        }
    }

    pub fn for_mode(mode: ActionMode) -> Option<Self> {
        match mode {
            ActionMode::Strategy => Some(Self::strategy()),
            ActionMode::Tool => Some(Self::tool()),
            ActionMode::Domain => Some(Self::domain()),
            ActionMode::Custom => None,
        }
    }

    pub fn mode(&self) -> ActionMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.actions
    }

    pub fn id(&self, index: usize) -> Option<&str> {
        self.actions.get(index).map(String::as_str)
    }

    /// Resolve an identifier to its arm index.
    pub fn index_of(&self, action: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == action)
            .ok_or_else(|| Error::not_found(alloc::format!("action '{action}'")))
    }

    pub fn contains(&self, action: &str) -> bool {
        self.actions.iter().any(|a| a == action)
    }
}
