//! Posterior/history persistence.
//!
//! State files are JSON with every float encoded as a decimal string of
//! 17 significant digits, which is always enough to reproduce the exact
//! f64 bit pattern on reload. Schema v1:
//!
//! ```json
//! {
//!   "version": 1,
//!   "mode": "strategy",
//!   "d": 5,
//!   "actions": ["direct", "chain_of_thought"],
//!   "alpha": [["1.0000000000000000e0", ...], ...],
//!   "beta":  [[...], ...],
//!   "priors": { "alpha0": "...", "beta0": "..." },
//!   "history": [
//!     { "step": 1, "context": ["..."], "action": "direct",
//!       "reward": "...", "propensity": "...", "timestamp": 1 }
//!   ],
//!   "lexicon_hash": "f0e4c2f76c58916e"
//! }
//! ```

use std::path::Path;

use quiver_core::action::{ActionMode, ActionSpace};
use quiver_core::adapt::{HistoryBuffer, InteractionRecord};
use quiver_core::bandit::PosteriorState;
use quiver_core::context::ContextVector;
use serde::{Deserialize, Serialize};

/// Errors carrying enough context to explain a refused load.
#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid state file: {reason}")]
    Schema { path: String, reason: String },
    #[error("state file {path} does not fit this configuration: {reason}")]
    Incompatible { path: String, reason: String },
}

/// Everything a state file carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedState {
    pub mode: ActionMode,
    pub actions: Vec<String>,
    pub posterior: PosteriorState,
    pub history: Vec<InteractionRecord>,
    pub lexicon_hash: u64,
}

pub const SCHEMA_VERSION: u32 = 1;

/// Encode an f64 as a decimal string with 17 significant digits.
fn encode_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn decode_f64(s: &str, what: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .map_err(|e| format!("{what}: cannot parse '{s}' as a float ({e})"))
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorsV1 {
    alpha0: String,
    beta0: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct HistoryRecordV1 {
    step: u64,
    context: Vec<String>,
    action: String,
    reward: String,
    propensity: String,
    timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFileV1 {
    version: u32,
    mode: String,
    d: usize,
    actions: Vec<String>,
    alpha: Vec<Vec<String>>,
    beta: Vec<Vec<String>>,
    priors: PriorsV1,
    history: Vec<HistoryRecordV1>,
    lexicon_hash: String,
}

fn mode_to_str(mode: ActionMode) -> &'static str {
    mode.as_str()
}

fn mode_from_str(s: &str) -> Result<ActionMode, String> {
    match s {
        "strategy" => Ok(ActionMode::Strategy),
        "tool" => Ok(ActionMode::Tool),
        "domain" => Ok(ActionMode::Domain),
        "custom" => Ok(ActionMode::Custom),
        other => Err(format!("unknown mode '{other}'")),
    }
}

/// Write a state file.
pub fn save_state(path: &Path, state: &SavedState) -> Result<(), StateError> {
    let posterior = &state.posterior;
    let (alpha0, beta0) = posterior.priors();
    let encode_rows = |get: &dyn Fn(usize) -> Vec<f64>| -> Vec<Vec<String>> {
        (0..posterior.num_actions())
            .map(|a| get(a).iter().map(|v| encode_f64(*v)).collect())
            .collect()
    };
    let file = StateFileV1 {
        version: SCHEMA_VERSION,
        mode: mode_to_str(state.mode).to_string(),
        d: posterior.dim(),
        actions: state.actions.clone(),
        alpha: encode_rows(&|a| posterior.alpha(a).to_vec()),
        beta: encode_rows(&|a| posterior.beta(a).to_vec()),
        priors: PriorsV1 {
            alpha0: encode_f64(alpha0),
            beta0: encode_f64(beta0),
        },
        history: state
            .history
            .iter()
            .map(|r| HistoryRecordV1 {
                step: r.step,
                context: r.context.values().iter().map(|v| encode_f64(*v)).collect(),
                action: r.action.clone(),
                reward: encode_f64(r.reward),
                propensity: encode_f64(r.propensity),
                timestamp: r.timestamp,
            })
            .collect(),
        lexicon_hash: format!("{:016x}", state.lexicon_hash),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| StateError::Schema {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, json).map_err(|e| StateError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Load and validate a state file. When `expected_d` is given, a
/// dimension mismatch is refused instead of silently reinterpreted.
pub fn load_state(path: &Path, expected_d: Option<usize>) -> Result<SavedState, StateError> {
    let display = path.display().to_string();
    let content = std::fs::read_to_string(path).map_err(|e| StateError::Io {
        path: display.clone(),
        source: e,
    })?;
    let file: StateFileV1 = serde_json::from_str(&content).map_err(|e| StateError::Schema {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    let schema = |reason: String| StateError::Schema {
        path: display.clone(),
        reason,
    };

    if file.version != SCHEMA_VERSION {
        return Err(StateError::Incompatible {
            path: display,
            reason: format!(
                "schema version {} (supported: {SCHEMA_VERSION})",
                file.version
            ),
        });
    }
    if let Some(d) = expected_d {
        if file.d != d {
            return Err(StateError::Incompatible {
                path: display,
                reason: format!("state dimension {} but configuration expects {d}", file.d),
            });
        }
    }
    let mode = mode_from_str(&file.mode).map_err(&schema)?;
    let space = ActionSpace::new(mode, file.actions.clone()).map_err(|e| schema(e.to_string()))?;

    let decode_rows = |rows: &[Vec<String>], what: &str| -> Result<Vec<Vec<f64>>, StateError> {
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != file.d {
                    return Err(schema(format!(
                        "{what}[{i}] has {} components, expected d={}",
                        row.len(),
                        file.d
                    )));
                }
                row.iter()
                    .map(|s| decode_f64(s, what).map_err(&schema))
                    .collect()
            })
            .collect()
    };
    let alpha = decode_rows(&file.alpha, "alpha")?;
    let beta = decode_rows(&file.beta, "beta")?;
    if alpha.len() != space.len() {
        return Err(schema(format!(
            "{} alpha rows for {} actions",
            alpha.len(),
            space.len()
        )));
    }
    let alpha0 = decode_f64(&file.priors.alpha0, "priors.alpha0").map_err(&schema)?;
    let beta0 = decode_f64(&file.priors.beta0, "priors.beta0").map_err(&schema)?;
    let posterior = PosteriorState::from_parts(alpha, beta, alpha0, beta0)
        .map_err(|e| schema(e.to_string()))?;

    let mut buffer = HistoryBuffer::unbounded();
    let mut history = Vec::with_capacity(file.history.len());
    for (i, r) in file.history.iter().enumerate() {
        let values = r
            .context
            .iter()
            .map(|s| decode_f64(s, "history.context").map_err(&schema))
            .collect::<Result<Vec<f64>, StateError>>()?;
        let context =
            ContextVector::new(values).map_err(|e| schema(format!("history[{i}]: {e}")))?;
        if !space.contains(&r.action) {
            return Err(schema(format!(
                "history[{i}] references unknown action '{}'",
                r.action
            )));
        }
        let record = InteractionRecord {
            step: r.step,
            context,
            action: r.action.clone(),
            reward: decode_f64(&r.reward, "history.reward").map_err(&schema)?,
            propensity: decode_f64(&r.propensity, "history.propensity").map_err(&schema)?,
            timestamp: r.timestamp,
        };
        buffer
            .push(record.clone())
            .map_err(|e| schema(format!("history[{i}]: {e}")))?;
        history.push(record);
    }

    let lexicon_hash = u64::from_str_radix(&file.lexicon_hash, 16)
        .map_err(|e| schema(format!("lexicon_hash: {e}")))?;

    Ok(SavedState {
        mode,
        actions: file.actions,
        posterior,
        history,
        lexicon_hash,
    })
}
