//! Control degree (the local reward), node-value modes and the satisfaction
//! predicate used to mark terminal nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeKind, AttributeTarget, AttributeVector, Targets};

/// Upper bound on the deterministic term `alpha / (avg_det + epsilon)`.
pub const DEGREE_CAP: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("measured vector lacks requested attribute {0}")]
    MissingAttribute(AttributeKind),
    #[error("value mode needs a heuristic score but none is available")]
    HeuristicUnavailable,
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// Which signal backs a node's value during search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValueMode {
    /// Local reward (control degree) only.
    #[default]
    #[serde(rename = "L")]
    Local,
    /// Heuristic `p(Yes)` only.
    #[serde(rename = "H")]
    Heuristic,
    /// Sum of both.
    #[serde(rename = "L+H")]
    LocalPlusHeuristic,
}

impl ValueMode {
    pub fn uses_heuristic(self) -> bool {
        !matches!(self, Self::Local)
    }
}

/// Per-kind thresholds under which a deterministic deviation counts as met.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub extractiveness: f64,
    pub length: f64,
    pub specificity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            extractiveness: 2.0,
            length: 2.0,
            specificity: 1.0,
        }
    }
}

impl Tolerances {
    pub fn for_kind(&self, kind: AttributeKind) -> Option<f64> {
        match kind {
            AttributeKind::Extractiveness => Some(self.extractiveness),
            AttributeKind::Length => Some(self.length),
            AttributeKind::Specificity => Some(self.specificity),
            AttributeKind::Topic | AttributeKind::Speaker => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub value_mode: ValueMode,
    pub tolerances: Tolerances,
    pub nondet_floor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 10.0,
            epsilon: 1e-9,
            value_mode: ValueMode::Local,
            tolerances: Tolerances::default(),
            nondet_floor: 0.75,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |m: &str| Err(RewardError::InvalidConfig(m.to_string()));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be finite and > 0");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be finite and > 0");
        }
        let t = &self.tolerances;
        if [t.extractiveness, t.length, t.specificity]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("tolerances must be finite and >= 0");
        }
        if !self.nondet_floor.is_finite() {
            return bad("nondet_floor must be finite");
        }
        Ok(())
    }
}

/// How a degree was assembled from per-attribute scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeBreakdown {
    /// Absolute deviation for deterministic kinds, alignment for the others.
    pub per_attribute: BTreeMap<AttributeKind, f64>,
    pub avg_det: f64,
    pub avg_nondet: f64,
    pub degree: f64,
}

/// `|measured - target|` for deterministic kinds; the alignment itself for
/// non-deterministic kinds.
pub fn deviation(measured: &AttributeVector, target: &AttributeTarget) -> Result<f64, RewardError> {
    let kind = target.kind();
    let value = measured.get(kind).ok_or(RewardError::MissingAttribute(kind))?;
    Ok(match target.numeric() {
        Some(t) => (value - t).abs(),
        None => value,
    })
}

/// `min(alpha / (avg_det + epsilon), DEGREE_CAP) + avg_nondet / beta`.
pub fn degree_from_averages(avg_det: f64, avg_nondet: f64, cfg: &RewardConfig) -> f64 {
    let det_term = (cfg.alpha / (avg_det + cfg.epsilon)).min(DEGREE_CAP);
    det_term + avg_nondet / cfg.beta
}

/// Control degree of `measured` against `targets`.
///
/// With no deterministic targets `avg_det` is 0 (so the first term sits at
/// the cap); with no non-deterministic targets `avg_nondet` is 0.
pub fn degree(
    measured: &AttributeVector,
    targets: &Targets,
    cfg: &RewardConfig,
) -> Result<DegreeBreakdown, RewardError> {
    let mut per_attribute = BTreeMap::new();
    let (mut det, mut nondet) = (Vec::new(), Vec::new());
    for t in targets.iter() {
        let d = deviation(measured, t)?;
        per_attribute.insert(t.kind(), d);
        if t.kind().is_deterministic() {
            det.push(d);
        } else {
            nondet.push(d);
        }
    }
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let avg_det = mean(&det);
    let avg_nondet = mean(&nondet);
    Ok(DegreeBreakdown {
        per_attribute,
        avg_det,
        avg_nondet,
        degree: degree_from_averages(avg_det, avg_nondet, cfg),
    })
}

pub fn node_value(local: f64, heuristic: Option<f64>, mode: ValueMode) -> Result<f64, RewardError> {
    match mode {
        ValueMode::Local => Ok(local),
        ValueMode::Heuristic => heuristic.ok_or(RewardError::HeuristicUnavailable),
        ValueMode::LocalPlusHeuristic => heuristic.map(|h| local + h).ok_or(RewardError::HeuristicUnavailable),
    }
}

/// True when every deterministic deviation is within tolerance and every
/// non-deterministic alignment reaches the floor.
pub fn satisfied(measured: &AttributeVector, targets: &Targets, cfg: &RewardConfig) -> Result<bool, RewardError> {
    let mut ok = true;
    for t in targets.iter() {
        let d = deviation(measured, t)?;
        ok &= match cfg.tolerances.for_kind(t.kind()) {
            Some(tol) => d <= tol,
            None => d >= cfg.nondet_floor,
        };
    }
    Ok(ok)
}
