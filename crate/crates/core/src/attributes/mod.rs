//! Controllable attributes, their targets, and how they are measured on a
//! (document, summary) pair.

mod providers;
mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use providers::{
    EmbeddingProvider, EntitySpan, HashEmbedder, HeuristicNer, NerProvider, ProviderError, Providers, SidecarClient,
};
pub use tokenize::{tokenize, tokenize_spans, unigram_f1, Token};

/// The five controllable attributes, in canonical action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Extractiveness,
    Length,
    Specificity,
    Topic,
    Speaker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeClass {
    /// Must match an exact numeric target; scored by absolute deviation.
    Deterministic,
    /// Higher alignment is better; scored directly.
    NonDeterministic,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 5] = [
        AttributeKind::Extractiveness,
        AttributeKind::Length,
        AttributeKind::Specificity,
        AttributeKind::Topic,
        AttributeKind::Speaker,
    ];

    pub fn class(self) -> AttributeClass {
        match self {
            Self::Extractiveness | Self::Length | Self::Specificity => AttributeClass::Deterministic,
            Self::Topic | Self::Speaker => AttributeClass::NonDeterministic,
        }
    }

    pub fn is_deterministic(self) -> bool {
        self.class() == AttributeClass::Deterministic
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Extractiveness => "extractiveness",
            Self::Length => "length",
            Self::Specificity => "specificity",
            Self::Topic => "topic",
            Self::Speaker => "speaker",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::Extractiveness => "ext",
            Self::Length => "len",
            Self::Specificity => "spc",
            Self::Topic => "top",
            Self::Speaker => "spk",
        }
    }

    /// Case-insensitive match on the full or short name.
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == lower || k.short_name() == lower)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributeKind {
    type Err = AttributeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s).ok_or_else(|| AttributeError::InvalidTarget(format!("unknown attribute `{s}`")))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttributeError {
    #[error("summary has no word tokens")]
    EmptySummary,
    #[error("topic target has no topic words")]
    EmptyTopic,
    #[error("speaker `{0}` has no utterances in the document")]
    UnknownSpeaker(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("measuring {kind}: {source}")]
    Measure {
        kind: AttributeKind,
        source: Box<AttributeError>,
    },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

/// A requested value for one attribute.
///
/// Extractiveness and specificity are percentages of summary words (0-100),
/// length is a word count, topic is a list of topic words and speaker is a
/// speaker id from the document's utterance labels.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeTarget {
    Extractiveness(f64),
    Length(u32),
    Specificity(f64),
    Topic(Vec<String>),
    Speaker(String),
}

impl AttributeTarget {
    pub fn kind(&self) -> AttributeKind {
        match self {
            Self::Extractiveness(_) => AttributeKind::Extractiveness,
            Self::Length(_) => AttributeKind::Length,
            Self::Specificity(_) => AttributeKind::Specificity,
            Self::Topic(_) => AttributeKind::Topic,
            Self::Speaker(_) => AttributeKind::Speaker,
        }
    }

    /// The numeric target of a deterministic attribute.
    pub fn numeric(&self) -> Option<f64> {
        match self {
            Self::Extractiveness(v) | Self::Specificity(v) => Some(*v),
            Self::Length(n) => Some(f64::from(*n)),
            Self::Topic(_) | Self::Speaker(_) => None,
        }
    }

    fn validate(&self) -> Result<(), AttributeError> {
        match self {
            Self::Extractiveness(v) | Self::Specificity(v) => {
                if !v.is_finite() || *v < 0.0 || *v > 100.0 {
                    return Err(AttributeError::InvalidTarget(format!(
                        "{} must be a percentage in [0, 100], got {v}",
                        self.kind()
                    )));
                }
            }
            Self::Length(n) => {
                if *n == 0 {
                    return Err(AttributeError::InvalidTarget("length must be at least 1 word".into()));
                }
            }
            Self::Topic(words) => {
                if words.iter().all(|w| w.trim().is_empty()) {
                    return Err(AttributeError::EmptyTopic);
                }
            }
            Self::Speaker(id) => {
                if id.trim().is_empty() {
                    return Err(AttributeError::InvalidTarget("speaker id is empty".into()));
                }
            }
        }
        Ok(())
    }
}

/// The set of targets requested for one document: at most one per kind, kept
/// in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTargets", into = "RawTargets")]
pub struct Targets(Vec<AttributeTarget>);

impl Targets {
    pub fn new(mut targets: Vec<AttributeTarget>) -> Result<Self, AttributeError> {
        if targets.is_empty() {
            return Err(AttributeError::InvalidTarget("no attributes requested".into()));
        }
        for t in &targets {
            t.validate()?;
        }
        targets.sort_by_key(AttributeTarget::kind);
        if targets.windows(2).any(|w| w[0].kind() == w[1].kind()) {
            return Err(AttributeError::InvalidTarget("duplicate attribute target".into()));
        }
        Ok(Self(targets))
    }

    pub fn kinds(&self) -> Vec<AttributeKind> {
        self.0.iter().map(AttributeTarget::kind).collect()
    }

    pub fn get(&self, kind: AttributeKind) -> Option<&AttributeTarget> {
        self.0.iter().find(|t| t.kind() == kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AttributeTarget> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, kind: AttributeKind) -> bool {
        self.get(kind).is_some()
    }
}

/// Wire form of [`Targets`] used in corpus files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTargets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extractiveness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    specificity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topic_words: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
}

impl TryFrom<RawTargets> for Targets {
    type Error = AttributeError;

    fn try_from(raw: RawTargets) -> Result<Self, Self::Error> {
        let mut out = Vec::new();
        if let Some(v) = raw.extractiveness {
            out.push(AttributeTarget::Extractiveness(v));
        }
        if let Some(v) = raw.length {
            out.push(AttributeTarget::Length(v));
        }
        if let Some(v) = raw.specificity {
            out.push(AttributeTarget::Specificity(v));
        }
        if let Some(v) = raw.topic_words {
            out.push(AttributeTarget::Topic(v));
        }
        if let Some(v) = raw.speaker {
            out.push(AttributeTarget::Speaker(v));
        }
        Targets::new(out)
    }
}

impl From<Targets> for RawTargets {
    fn from(targets: Targets) -> Self {
        let mut raw = RawTargets::default();
        for t in targets.0 {
            match t {
                AttributeTarget::Extractiveness(v) => raw.extractiveness = Some(v),
                AttributeTarget::Length(v) => raw.length = Some(v),
                AttributeTarget::Specificity(v) => raw.specificity = Some(v),
                AttributeTarget::Topic(v) => raw.topic_words = Some(v),
                AttributeTarget::Speaker(v) => raw.speaker = Some(v),
            }
        }
        raw
    }
}

/// Measured attribute values, keyed by kind.
///
/// Units: extractiveness/specificity in percent, length in words,
/// topic/speaker as similarities in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeVector(BTreeMap<AttributeKind, f64>);

impl AttributeVector {
    pub fn get(&self, kind: AttributeKind) -> Option<f64> {
        self.0.get(&kind).copied()
    }

    pub fn insert(&mut self, kind: AttributeKind, value: f64) {
        self.0.insert(kind, value);
    }

    pub fn kinds(&self) -> Vec<AttributeKind> {
        self.0.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKind, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(AttributeKind, f64)> for AttributeVector {
    fn from_iter<I: IntoIterator<Item = (AttributeKind, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
}

/// An input document plus the attribute targets requested for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterances: Option<Vec<Utterance>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_summary: Option<String>,
    pub targets: Targets,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    text: String,
    #[serde(default)]
    utterances: Option<Vec<Utterance>>,
    #[serde(default)]
    reference_summary: Option<String>,
    targets: Targets,
}

impl TryFrom<RawDocument> for Document {
    type Error = AttributeError;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        Document::new(raw.id, raw.text, raw.utterances, raw.reference_summary, raw.targets)
    }
}

impl Document {
    /// Builds a document, checking that a speaker target names a speaker
    /// with at least one utterance.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        utterances: Option<Vec<Utterance>>,
        reference_summary: Option<String>,
        targets: Targets,
    ) -> Result<Self, AttributeError> {
        let doc = Self {
            id: id.into(),
            text: text.into(),
            utterances,
            reference_summary,
            targets,
        };
        if let Some(AttributeTarget::Speaker(id)) = doc.targets.get(AttributeKind::Speaker) {
            if doc.utterances.is_none() {
                return Err(AttributeError::InvalidTarget(
                    "speaker attribute requires utterances".into(),
                ));
            }
            if doc.speaker_utterances(id).is_empty() {
                return Err(AttributeError::UnknownSpeaker(id.clone()));
            }
        }
        Ok(doc)
    }

    pub fn speaker_utterances(&self, speaker: &str) -> Vec<&str> {
        self.utterances
            .iter()
            .flatten()
            .filter(|u| u.speaker == speaker)
            .map(|u| u.text.as_str())
            .collect()
    }

    /// Canonical-order list of requested attributes; the search's action set.
    pub fn legal_actions(&self) -> Vec<AttributeKind> {
        self.targets.kinds()
    }
}

/// Percentage of summary tokens (with multiplicity) that occur anywhere in the
/// document's token set.
pub fn measure_extractiveness(summary: &str, document: &str) -> Result<f64, AttributeError> {
    let s = tokenize(summary);
    if s.is_empty() {
        return Err(AttributeError::EmptySummary);
    }
    let doc: std::collections::HashSet<String> = tokenize(document).into_iter().collect();
    let copied = s.iter().filter(|t| doc.contains(*t)).count();
    Ok(100.0 * copied as f64 / s.len() as f64)
}

pub fn measure_length(summary: &str) -> usize {
    tokenize_spans(summary).len()
}

/// Percentage of summary tokens covered by a named-entity span.
pub fn measure_specificity(summary: &str, ner: &dyn NerProvider) -> Result<f64, AttributeError> {
    let tokens = tokenize_spans(summary);
    if tokens.is_empty() {
        return Err(AttributeError::EmptySummary);
    }
    let n_chars = summary.chars().count();
    let spans = ner.entities(summary)?;
    for s in &spans {
        if s.start >= s.end || s.end > n_chars {
            return Err(ProviderError::Protocol(format!(
                "entity span {}..{} out of bounds for {n_chars} chars",
                s.start, s.end
            ))
            .into());
        }
    }
    let covered = tokens
        .iter()
        .filter(|t| spans.iter().any(|s| s.start < t.end && t.start < s.end))
        .count();
    Ok(100.0 * covered as f64 / tokens.len() as f64)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Average similarity between every topic word and every summary word, with
/// cosines mapped to `[0, 1]` via `(cos + 1) / 2`.
pub fn measure_topic(
    summary: &str,
    topic_words: &[String],
    embedder: &dyn EmbeddingProvider,
) -> Result<f64, AttributeError> {
    let topics: Vec<&str> = topic_words.iter().map(|w| w.trim()).filter(|w| !w.is_empty()).collect();
    if topics.is_empty() {
        return Err(AttributeError::EmptyTopic);
    }
    let words = tokenize(summary);
    if words.is_empty() {
        return Err(AttributeError::EmptySummary);
    }
    // Embed each distinct word once, keeping multiplicities for the mean.
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &words {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    let unique: Vec<&str> = counts.keys().copied().collect();
    let mut batch = topics.clone();
    batch.extend(&unique);
    let vectors = embedder.embed(&batch)?;
    if vectors.len() != batch.len() {
        return Err(ProviderError::Protocol("embedder returned wrong number of vectors".into()).into());
    }
    let (topic_vecs, word_vecs) = vectors.split_at(topics.len());
    let n = words.len() as f64;
    let mut total = 0.0;
    for tv in topic_vecs {
        let mut per_topic = 0.0;
        for (wv, w) in word_vecs.iter().zip(&unique) {
            let sim = (cosine(tv, wv) + 1.0) / 2.0;
            per_topic += sim * counts[w] as f64;
        }
        total += per_topic / n;
    }
    Ok((total / topics.len() as f64).clamp(0.0, 1.0))
}

/// Provider pair-score of the summary against the speaker's concatenated
/// utterances.
pub fn measure_speaker(
    summary: &str,
    speaker: &str,
    utterances: &[&str],
    embedder: &dyn EmbeddingProvider,
) -> Result<f64, AttributeError> {
    if utterances.is_empty() {
        return Err(AttributeError::UnknownSpeaker(speaker.to_string()));
    }
    let reference = utterances.join("\n");
    let score = embedder.pair_score(summary, &reference)?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ProviderError::Protocol(format!("pair score {score} outside [0, 1]")).into());
    }
    Ok(score)
}

fn measure_one(
    kind: AttributeKind,
    target: &AttributeTarget,
    summary: &str,
    doc: &Document,
    providers: &Providers,
) -> Result<f64, AttributeError> {
    match target {
        AttributeTarget::Extractiveness(_) => measure_extractiveness(summary, &doc.text),
        AttributeTarget::Length(_) => {
            let n = measure_length(summary);
            if n == 0 {
                Err(AttributeError::EmptySummary)
            } else {
                Ok(n as f64)
            }
        }
        AttributeTarget::Specificity(_) => measure_specificity(summary, providers.ner.as_ref()),
        AttributeTarget::Topic(words) => measure_topic(summary, words, providers.embedder.as_ref()),
        AttributeTarget::Speaker(id) => {
            measure_speaker(summary, id, &doc.speaker_utterances(id), providers.embedder.as_ref())
        }
    }
    .map_err(|e| AttributeError::Measure {
        kind,
        source: Box::new(e),
    })
}

/// Measures every attribute requested by `doc.targets`, and nothing else.
pub fn measure_all(summary: &str, doc: &Document, providers: &Providers) -> Result<AttributeVector, AttributeError> {
    let mut out = AttributeVector::default();
    for target in doc.targets.iter() {
        let kind = target.kind();
        out.insert(kind, measure_one(kind, target, summary, doc, providers)?);
    }
    Ok(out)
}

/// Scripted providers for tests: fixed vectors per text and fixed spans.
#[doc(hidden)]
pub mod scripted {
    use super::*;

    #[derive(Default)]
    pub struct TableEmbedder {
        pub vectors: HashMap<String, Vec<f32>>,
        pub score: Option<f64>,
    }

    impl EmbeddingProvider for TableEmbedder {
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
            texts
                .iter()
                .map(|t| {
                    self.vectors
                        .get(*t)
                        .cloned()
                        .ok_or_else(|| ProviderError::Protocol(format!("no vector for `{t}`")))
                })
                .collect()
        }

        fn pair_score(&self, _candidate: &str, _reference: &str) -> Result<f64, ProviderError> {
            self.score
                .ok_or_else(|| ProviderError::Transport("scripted failure".into()))
        }
    }

    pub struct FixedNer(pub Vec<EntitySpan>);

    impl NerProvider for FixedNer {
        fn entities(&self, _text: &str) -> Result<Vec<EntitySpan>, ProviderError> {
            Ok(self.0.clone())
        }
    }

    pub struct FailingNer;

    impl NerProvider for FailingNer {
        fn entities(&self, _text: &str) -> Result<Vec<EntitySpan>, ProviderError> {
            Err(ProviderError::Transport("ner offline".into()))
        }
    }
}
