//! The language-model policy: initial generation, single-attribute
//! adjustment with full history, `p(Yes)` heuristic scoring and optional
//! action priors.

mod http;
mod llm;
mod scripted;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeKind, AttributeTarget, Document, Targets};

pub use http::HttpChatBackend;
pub use llm::{
    yes_probability_from_logprobs, ChatBackend, ChatCompletion, ChatMessage, ChatRequest, HeuristicStrategy, LlmPolicy,
    LlmSettings,
};
pub use scripted::{path_key, rule_editor, CallCounts, Generator, ScriptFile, ScriptedDocument, ScriptedPolicy};
pub use template::{render_prompt, Bindings, PromptLibrary, PromptTemplate, TemplateError, TemplateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    /// Transport or server failure after all retries.
    #[error("policy request failed after {attempts} attempt(s): {message}")]
    Failure { attempts: u32, message: String },
    #[error("policy returned an empty completion")]
    EmptyCompletion,
    #[error("policy cannot produce a heuristic score")]
    HeuristicUnavailable,
    #[error("unusable policy response: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no scripted completion for document `{doc}` at path `{path}`")]
    Unscripted { doc: String, path: String },
    #[error("policy configuration: {0}")]
    Config(String),
}

/// Explicit self-planning flavours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanVariant {
    /// Plan over every requested attribute, each once.
    Base,
    /// Plan may skip or repeat attributes.
    Adaptive,
}

/// One step of a summary's history. `action` is `None` for the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: Option<AttributeKind>,
    pub summary: String,
}

/// Summaries from the root to the current node, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History(Vec<HistoryEntry>);

impl History {
    pub fn new(root_summary: impl Into<String>) -> Self {
        Self(vec![HistoryEntry {
            action: None,
            summary: root_summary.into(),
        }])
    }

    pub fn push(&mut self, action: AttributeKind, summary: impl Into<String>) {
        self.0.push(HistoryEntry {
            action: Some(action),
            summary: summary.into(),
        });
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.0
    }

    pub fn last_summary(&self) -> &str {
        &self.0.last().expect("history always has a root").summary
    }

    /// Actions taken since the root.
    pub fn path(&self) -> Vec<AttributeKind> {
        self.0.iter().filter_map(|e| e.action).collect()
    }

    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    /// Text form used for the `{{History}}` placeholder.
    pub fn render(&self) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(i, e)| match e.action {
                None => format!("Step {i} (initial):\n{}", e.summary),
                Some(a) => format!("Step {i} (adjusted {a}):\n{}", e.summary),
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// A pluggable policy. Implementations must be safe to share between corpus
/// workers; a single search calls it sequentially.
pub trait Policy: Send + Sync {
    /// Summary requesting every target attribute at once.
    fn generate_initial(&self, doc: &Document) -> Result<String, PolicyError>;

    /// New summary controlling only `action`, conditioned on `history`.
    fn adjust(&self, doc: &Document, history: &History, action: AttributeKind) -> Result<String, PolicyError>;

    fn supports_heuristic(&self) -> bool {
        false
    }

    /// Probability that further adjustments can satisfy every target.
    fn yes_probability(&self, _doc: &Document, _summary: &str, _path: &[AttributeKind]) -> Result<f64, PolicyError> {
        Err(PolicyError::HeuristicUnavailable)
    }

    /// Optional prior over `legal`. `None` means uniform.
    fn action_priors(&self, _doc: &Document, _summary: &str, _legal: &[AttributeKind]) -> Option<Vec<f64>> {
        None
    }

    /// One-pass revision that plans the order internally.
    fn implicit_revise(&self, doc: &Document, initial: &str) -> Result<String, PolicyError>;

    /// Raw plan text; `attempt` is 0 for the first request, 1 for a reprompt.
    fn propose_plan(
        &self,
        doc: &Document,
        initial: &str,
        variant: PlanVariant,
        attempt: u32,
    ) -> Result<String, PolicyError>;
}

fn non_blank(s: String) -> Result<String, PolicyError> {
    if s.trim().is_empty() {
        Err(PolicyError::EmptyCompletion)
    } else {
        Ok(s)
    }
}

/// [`Policy::generate_initial`] with the non-empty contract enforced.
pub fn generate_initial(policy: &dyn Policy, doc: &Document) -> Result<String, PolicyError> {
    policy.generate_initial(doc).and_then(non_blank)
}

/// [`Policy::adjust`] with the non-empty contract enforced.
pub fn adjust(
    policy: &dyn Policy,
    doc: &Document,
    history: &History,
    action: AttributeKind,
) -> Result<String, PolicyError> {
    policy.adjust(doc, history, action).and_then(non_blank)
}

/// [`Policy::yes_probability`] checked to lie in `[0, 1]`.
pub fn yes_probability(
    policy: &dyn Policy,
    doc: &Document,
    summary: &str,
    path: &[AttributeKind],
) -> Result<f64, PolicyError> {
    if !policy.supports_heuristic() {
        return Err(PolicyError::HeuristicUnavailable);
    }
    let p = policy.yes_probability(doc, summary, path)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(PolicyError::InvalidResponse(format!("p(Yes) = {p} outside [0, 1]")));
    }
    Ok(p)
}

/// Priors over `legal`: the policy's override when it is a valid
/// distribution of the right length, otherwise uniform.
pub fn action_priors(policy: &dyn Policy, doc: &Document, summary: &str, legal: &[AttributeKind]) -> Vec<f64> {
    let uniform = || vec![1.0 / legal.len() as f64; legal.len()];
    if legal.is_empty() {
        return Vec::new();
    }
    match policy.action_priors(doc, summary, legal) {
        Some(p) if valid_distribution(&p, legal.len()) => p,
        Some(p) => {
            tracing::warn!(?p, "ignoring invalid action priors; using uniform");
            uniform()
        }
        None => uniform(),
    }
}

fn valid_distribution(p: &[f64], len: usize) -> bool {
    p.len() == len && p.iter().all(|x| x.is_finite() && *x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-6
}

fn format_number(v: f64) -> String {
    // f64 Display drops a trailing ".0"
    format!("{v}")
}

fn target_phrase(t: &AttributeTarget) -> String {
    match t {
        AttributeTarget::Extractiveness(v) | AttributeTarget::Specificity(v) => format!("{}%", format_number(*v)),
        AttributeTarget::Length(n) => n.to_string(),
        AttributeTarget::Topic(words) => words.join(", "),
        AttributeTarget::Speaker(id) => id.clone(),
    }
}

/// Human-readable target list for `{{target attributes}}`.
pub fn describe_targets(targets: &Targets) -> String {
    targets
        .iter()
        .map(|t| match t {
            AttributeTarget::Length(n) => format!("length: {n} words"),
            other => format!("{}: {}", other.kind(), target_phrase(other)),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Text form of an action path for `{{path}}`.
pub fn describe_path(path: &[AttributeKind]) -> String {
    std::iter::once("initial")
        .chain(path.iter().map(|a| a.name()))
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Bindings every template can draw on for `doc`: the article, one binding
/// per requested attribute, `focus` (topic and speaker joined) and
/// `target attributes`.
pub fn document_bindings(doc: &Document) -> Bindings {
    let mut b = Bindings::new();
    b.set("Article", doc.text.clone());
    for t in doc.targets.iter() {
        b.set(t.kind().name(), target_phrase(t));
    }
    let focus: Vec<String> = [AttributeKind::Topic, AttributeKind::Speaker]
        .into_iter()
        .filter_map(|k| doc.targets.get(k).map(target_phrase))
        .collect();
    if !focus.is_empty() {
        b.set("focus", focus.join(" and "));
    }
    b.set("target attributes", describe_targets(&doc.targets));
    b
}

/// Template that controls a single attribute.
pub fn adjustment_template(action: AttributeKind) -> TemplateId {
    match action {
        AttributeKind::Extractiveness => TemplateId::Extractiveness,
        AttributeKind::Length => TemplateId::Length,
        AttributeKind::Specificity => TemplateId::Specificity,
        AttributeKind::Topic => TemplateId::Topic,
        AttributeKind::Speaker => TemplateId::Speaker,
    }
}
