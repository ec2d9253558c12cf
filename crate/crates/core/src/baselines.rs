//! Comparison systems: single-pass generation, implicit self-planning and
//! explicit self-planning (base and adaptive).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeKind, Document};
use crate::policy::{self, History, HistoryEntry, PlanVariant, Policy, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("cannot parse plan: {0}")]
    PlanParse(String),
}

/// Result of a baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub summary: String,
    /// Every summary produced, root first.
    pub steps: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<AttributeKind>>,
    /// The plan could not be parsed, even after a reprompt, so the canonical
    /// order was used.
    #[serde(default)]
    pub plan_fallback: bool,
    pub policy_calls: usize,
}

/// Parses the first bracketed list in `text`. Names match case-insensitively
/// in full or short form; entries outside `requested` are dropped. Base plans
/// keep only the first occurrence of each attribute.
pub fn parse_plan(
    text: &str,
    requested: &[AttributeKind],
    variant: PlanVariant,
) -> Result<Vec<AttributeKind>, BaselineError> {
    let open = text
        .find('[')
        .ok_or_else(|| BaselineError::PlanParse("no bracketed list".into()))?;
    let close = text[open..]
        .find(']')
        .map(|i| open + i)
        .ok_or_else(|| BaselineError::PlanParse("unterminated list".into()))?;
    let mut plan = Vec::new();
    for item in text[open + 1..close].split(',') {
        let name = item
            .trim()
            .trim_matches(|c: char| c == '\'' || c == '"' || c == '`')
            .trim();
        if name.is_empty() {
            continue;
        }
        match AttributeKind::from_name(name) {
            Some(kind) if requested.contains(&kind) => {
                if variant == PlanVariant::Adaptive || !plan.contains(&kind) {
                    plan.push(kind);
                }
            }
            Some(kind) => tracing::debug!(%kind, "dropping unrequested attribute from plan"),
            None => tracing::debug!(name, "dropping unknown plan entry"),
        }
    }
    if plan.is_empty() {
        return Err(BaselineError::PlanParse(format!(
            "no requested attribute in `{}`",
            &text[open..=close]
        )));
    }
    Ok(plan)
}

/// One call to the initial generator.
pub fn single_pass(policy: &dyn Policy, doc: &Document) -> Result<BaselineOutcome, BaselineError> {
    let summary = policy::generate_initial(policy, doc)?;
    Ok(BaselineOutcome {
        steps: vec![HistoryEntry {
            action: None,
            summary: summary.clone(),
        }],
        summary,
        plan: None,
        plan_fallback: false,
        policy_calls: 1,
    })
}

/// Initial summary, then one revision that orders the attributes internally.
pub fn implicit_plan(policy: &dyn Policy, doc: &Document) -> Result<BaselineOutcome, BaselineError> {
    let initial = policy::generate_initial(policy, doc)?;
    let revised = policy.implicit_revise(doc, &initial)?;
    if revised.trim().is_empty() {
        return Err(PolicyError::EmptyCompletion.into());
    }
    Ok(BaselineOutcome {
        summary: revised.clone(),
        steps: vec![
            HistoryEntry {
                action: None,
                summary: initial,
            },
            HistoryEntry {
                action: None,
                summary: revised,
            },
        ],
        plan: None,
        plan_fallback: false,
        policy_calls: 2,
    })
}

/// Initial summary, a plan from the policy, then one adjustment per plan
/// element with the history threaded through.
pub fn explicit_plan(
    policy: &dyn Policy,
    doc: &Document,
    variant: PlanVariant,
) -> Result<BaselineOutcome, BaselineError> {
    let initial = policy::generate_initial(policy, doc)?;
    let requested = doc.legal_actions();
    let mut calls = 1;
    let mut parsed = None;
    for attempt in 0..2 {
        let text = policy.propose_plan(doc, &initial, variant, attempt)?;
        calls += 1;
        match parse_plan(&text, &requested, variant) {
            Ok(p) => {
                parsed = Some(p);
                break;
            }
            Err(e) => tracing::warn!(doc = %doc.id, attempt, error = %e, "plan rejected"),
        }
    }
    let plan_fallback = parsed.is_none();
    let plan = parsed.unwrap_or_else(|| requested.clone());
    let mut history = History::new(initial);
    for &action in &plan {
        let next = policy::adjust(policy, doc, &history, action)?;
        calls += 1;
        history.push(action, next);
    }
    Ok(BaselineOutcome {
        summary: history.last_summary().to_string(),
        steps: history.entries().to_vec(),
        plan: Some(plan),
        plan_fallback,
        policy_calls: calls,
    })
}
