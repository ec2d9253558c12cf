//! Deterministic table-driven policy for tests, fixtures and offline runs.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{History, HistoryEntry, PlanVariant, Policy, PolicyError};
use crate::attributes::{tokenize, AttributeKind, AttributeTarget, Document};

/// Fallback summary source, consulted when a table has no entry.
/// `action` is `None` for the root; `history` is empty for the root.
pub type Generator = Arc<dyn Fn(&Document, &[HistoryEntry], Option<AttributeKind>) -> Option<String> + Send + Sync>;

/// Scripted responses for one document. Keys of `summaries` and `heuristic`
/// are action paths in short names joined by `/` (`""` is the root,
/// `"len/top"` is length then topic).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedDocument {
    pub summaries: BTreeMap<String, String>,
    pub heuristic: BTreeMap<String, f64>,
    /// Plan replies by attempt.
    pub plans: Vec<String>,
    pub implicit: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptFile {
    pub documents: BTreeMap<String, ScriptedDocument>,
    pub default_heuristic: Option<f64>,
}

/// Calls made so far, by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CallCounts {
    pub initial: usize,
    pub adjust: usize,
    pub heuristic: usize,
    pub implicit: usize,
    pub plan: usize,
}

#[derive(Default)]
struct Counters {
    initial: AtomicUsize,
    adjust: AtomicUsize,
    heuristic: AtomicUsize,
    implicit: AtomicUsize,
    plan: AtomicUsize,
}

#[derive(Default)]
pub struct ScriptedPolicy {
    script: ScriptFile,
    generator: Option<Generator>,
    priors: Option<Vec<f64>>,
    counters: Counters,
}

pub fn path_key(path: &[AttributeKind]) -> String {
    path.iter().map(|a| a.short_name()).collect::<Vec<_>>().join("/")
}

impl ScriptedPolicy {
    pub fn new(script: ScriptFile) -> Self {
        Self {
            script,
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Config(format!("reading {}: {e}", path.display())))?;
        let script: ScriptFile =
            serde_json::from_str(&text).map_err(|e| PolicyError::Config(format!("parsing {}: {e}", path.display())))?;
        Ok(Self::new(script))
    }

    /// A policy with no tables that answers everything through `generator`.
    pub fn from_generator(generator: Generator) -> Self {
        Self::default().with_generator(generator)
    }

    pub fn with_generator(mut self, generator: Generator) -> Self {
        self.generator = Some(generator);
        self
    }

    /// Fixed prior vector, used whenever its length matches the legal set.
    pub fn with_priors(mut self, priors: Vec<f64>) -> Self {
        self.priors = Some(priors);
        self
    }

    pub fn with_default_heuristic(mut self, probability: f64) -> Self {
        self.script.default_heuristic = Some(probability);
        self
    }

    pub fn script(&self) -> &ScriptFile {
        &self.script
    }

    pub fn calls(&self) -> CallCounts {
        let c = &self.counters;
        CallCounts {
            initial: c.initial.load(Ordering::Relaxed),
            adjust: c.adjust.load(Ordering::Relaxed),
            heuristic: c.heuristic.load(Ordering::Relaxed),
            implicit: c.implicit.load(Ordering::Relaxed),
            plan: c.plan.load(Ordering::Relaxed),
        }
    }

    fn doc_script(&self, doc: &Document) -> Option<&ScriptedDocument> {
        self.script.documents.get(&doc.id)
    }

    fn lookup(
        &self,
        doc: &Document,
        entries: &[HistoryEntry],
        action: Option<AttributeKind>,
    ) -> Result<String, PolicyError> {
        let mut path: Vec<AttributeKind> = entries.iter().filter_map(|e| e.action).collect();
        path.extend(action);
        let key = path_key(&path);
        if let Some(s) = self.doc_script(doc).and_then(|d| d.summaries.get(&key)) {
            return Ok(s.clone());
        }
        self.generator
            .as_ref()
            .and_then(|g| g(doc, entries, action))
            .ok_or(PolicyError::Unscripted {
                doc: doc.id.clone(),
                path: key,
            })
    }

    fn default_plan(doc: &Document, variant: PlanVariant) -> String {
        let mut order = doc.legal_actions();
        if variant == PlanVariant::Adaptive {
            if let Some(i) = order.iter().position(|a| *a == AttributeKind::Length) {
                let len = order.remove(i);
                order.push(len);
            }
        }
        let names: Vec<String> = order.iter().map(|a| format!("'{}'", a.name())).collect();
        format!("plan = [{}]", names.join(", "))
    }
}

impl Policy for ScriptedPolicy {
    fn generate_initial(&self, doc: &Document) -> Result<String, PolicyError> {
        self.counters.initial.fetch_add(1, Ordering::Relaxed);
        self.lookup(doc, &[], None)
    }

    fn adjust(&self, doc: &Document, history: &History, action: AttributeKind) -> Result<String, PolicyError> {
        self.counters.adjust.fetch_add(1, Ordering::Relaxed);
        self.lookup(doc, history.entries(), Some(action))
    }

    fn supports_heuristic(&self) -> bool {
        self.script.default_heuristic.is_some() || self.script.documents.values().any(|d| !d.heuristic.is_empty())
    }

    fn yes_probability(&self, doc: &Document, _summary: &str, path: &[AttributeKind]) -> Result<f64, PolicyError> {
        self.counters.heuristic.fetch_add(1, Ordering::Relaxed);
        let key = path_key(path);
        self.doc_script(doc)
            .and_then(|d| d.heuristic.get(&key).copied())
            .or(self.script.default_heuristic)
            .ok_or(PolicyError::HeuristicUnavailable)
    }

    fn action_priors(&self, _doc: &Document, _summary: &str, legal: &[AttributeKind]) -> Option<Vec<f64>> {
        self.priors.clone().filter(|p| p.len() == legal.len())
    }

    fn implicit_revise(&self, doc: &Document, initial: &str) -> Result<String, PolicyError> {
        self.counters.implicit.fetch_add(1, Ordering::Relaxed);
        if let Some(s) = self.doc_script(doc).and_then(|d| d.implicit.clone()) {
            return Ok(s);
        }
        let generator = self.generator.as_ref().ok_or_else(|| PolicyError::Unscripted {
            doc: doc.id.clone(),
            path: "implicit".into(),
        })?;
        let mut history = History::new(initial);
        for action in doc.legal_actions() {
            let next = generator(doc, history.entries(), Some(action)).ok_or_else(|| PolicyError::Unscripted {
                doc: doc.id.clone(),
                path: "implicit".into(),
            })?;
            history.push(action, next);
        }
        Ok(history.last_summary().to_string())
    }

    fn propose_plan(
        &self,
        doc: &Document,
        _initial: &str,
        variant: PlanVariant,
        attempt: u32,
    ) -> Result<String, PolicyError> {
        self.counters.plan.fetch_add(1, Ordering::Relaxed);
        if let Some(d) = self.doc_script(doc) {
            if !d.plans.is_empty() {
                let i = (attempt as usize).min(d.plans.len() - 1);
                return Ok(d.plans[i].clone());
            }
        }
        Ok(Self::default_plan(doc, variant))
    }
}

const FILLER: [&str; 10] = [
    "notably",
    "overall",
    "reportedly",
    "broadly",
    "meanwhile",
    "essentially",
    "additionally",
    "similarly",
    "consequently",
    "ultimately",
];

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Resizes `current` to `n` words, topping up from `pool` in order.
fn fit(mut current: Vec<String>, pool: &[String], n: usize) -> Vec<String> {
    current.truncate(n);
    let mut i = 0;
    while current.len() < n && !pool.is_empty() {
        current.push(pool[i % pool.len()].clone());
        i += 1;
    }
    current
}

fn percent_count(pct: f64, n: usize) -> usize {
    ((pct / 100.0) * n as f64).round() as usize
}

/// A crude rule-based editor that mimics single-attribute control without a
/// language model, so the CLI and benches run hermetically.
///
/// - root: the document's lead, about 1.5x the requested length
/// - length: truncate, or extend with following document words
/// - extractiveness: swap words between document words and filler
/// - specificity: capitalize (or lowercase) words to move entity coverage
/// - topic: lead with the topic words, keeping the word count
/// - speaker: rewrite from the speaker's utterances, keeping the word count
pub fn rule_editor() -> Generator {
    Arc::new(
        |doc: &Document, history: &[HistoryEntry], action: Option<AttributeKind>| {
            let doc_words = words(&doc.text);
            if doc_words.is_empty() {
                return None;
            }
            let target_len = match doc.targets.get(AttributeKind::Length) {
                Some(AttributeTarget::Length(n)) => *n as usize,
                _ => 60,
            };
            let Some(action) = action else {
                let n = (target_len * 3).div_ceil(2).min(doc_words.len()).max(1);
                return Some(doc_words[..n].join(" "));
            };
            let current = words(&history.last()?.summary);
            let n = current.len().max(1);
            let out = match (action, doc.targets.get(action)?) {
                (AttributeKind::Length, AttributeTarget::Length(len)) => {
                    let tail: Vec<String> = doc_words.iter().skip(current.len()).cloned().collect();
                    let pool = if tail.is_empty() { doc_words.clone() } else { tail };
                    fit(current, &pool, *len as usize)
                }
                (AttributeKind::Extractiveness, AttributeTarget::Extractiveness(pct)) => {
                    let vocab: HashSet<String> = tokenize(&doc.text).into_iter().collect();
                    let filler: Vec<&str> = FILLER.iter().copied().filter(|w| !vocab.contains(*w)).collect();
                    let keep = percent_count(*pct, n);
                    let mut copied = doc_words.iter().cycle();
                    (0..n)
                        .map(|i| {
                            if i < keep || filler.is_empty() {
                                copied.next().cloned().unwrap_or_default()
                            } else {
                                filler[i % filler.len()].to_string()
                            }
                        })
                        .collect()
                }
                (AttributeKind::Specificity, AttributeTarget::Specificity(pct)) => {
                    let marked = percent_count(*pct, n);
                    current
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            let lower = w.to_lowercase();
                            if i >= 1 && i <= marked {
                                let mut c = lower.chars();
                                c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or(lower)
                            } else {
                                lower
                            }
                        })
                        .collect()
                }
                (AttributeKind::Topic, AttributeTarget::Topic(topics)) => {
                    let mut out: Vec<String> = topics.iter().flat_map(|t| words(t)).collect();
                    out.extend(current);
                    out.truncate(n.max(topics.len()));
                    out
                }
                (AttributeKind::Speaker, AttributeTarget::Speaker(id)) => {
                    let pool: Vec<String> = doc.speaker_utterances(id).iter().flat_map(|u| words(u)).collect();
                    fit(Vec::new(), &pool, n)
                }
                _ => return None,
            };
            let text = out.join(" ");
            (!text.trim().is_empty()).then_some(text)
        },
    )
}
