//! Query context vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A fixed-length feature vector with every component in `[0, 1]` and at
/// least one strictly positive component.
///
/// A context of all zeros is rejected at construction: it would make the
/// context-weighted Beta parameters vanish, and what looks like "no
/// features" is almost always a featurization bug rather than a
/// meaningful query. Clamping it away would only hide that bug.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct ContextVector {
    values: Vec<f64>,
}

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("context vector must have dimension >= 1"));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::invalid(alloc::format!(
                    "context component {i} = {v} outside [0, 1]"
                )));
            }
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateContext(
                "context vector has zero total feature mass".into(),
            ));
        }
        Ok(Self { values })
    }

    /// The all-ones context of dimension `d` (context-feature ablation).
    pub fn all_ones(d: usize) -> Result<Self> {
        Self::new(vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied()
    }
}

impl TryFrom<Vec<f64>> for ContextVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ContextVector> for Vec<f64> {
    fn from(c: ContextVector) -> Self {
        c.values
    }
}
