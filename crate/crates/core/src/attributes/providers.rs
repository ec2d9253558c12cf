//! Embedding and named-entity providers.
//!
//! The measures in [`super`] only see these traits. Two families of
//! implementations ship here:
//!
//! - offline fallbacks ([`HashEmbedder`], [`HeuristicNer`]) that are
//!   deterministic and need no network, and
//! - [`SidecarClient`], which speaks the JSON wire protocol of the
//!   measurement sidecar (`/embed`, `/ner`, `/score`).

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize::{tokenize, tokenize_spans, unigram_f1};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A labeled named-entity span. Offsets are character-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub label: String,
}

pub trait EmbeddingProvider: Send + Sync {
    /// Embeds each text into a unit-norm vector of fixed dimension.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError>;

    /// F-style similarity of `candidate` against `reference`, in `[0, 1]`.
    fn pair_score(&self, candidate: &str, reference: &str) -> Result<f64, ProviderError>;
}

pub trait NerProvider: Send + Sync {
    fn entities(&self, text: &str) -> Result<Vec<EntitySpan>, ProviderError>;
}

/// The provider bundle handed to measurement code.
#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub ner: Arc<dyn NerProvider>,
}

impl Providers {
    pub fn new(embedder: Arc<dyn EmbeddingProvider>, ner: Arc<dyn NerProvider>) -> Self {
        Self { embedder, ner }
    }

    /// Hermetic providers: hashed bag-of-words embeddings, token-F1 pair
    /// scoring and the capitalization heuristic for entities.
    pub fn fallback() -> Self {
        Self {
            embedder: Arc::new(HashEmbedder::default()),
            ner: Arc::new(HeuristicNer),
        }
    }

    pub fn sidecar(base_url: &str) -> Self {
        let client = Arc::new(SidecarClient::new(base_url));
        Self {
            embedder: client.clone(),
            ner: client,
        }
    }
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers").finish_non_exhaustive()
    }
}

// FNV-1a, so hashed features are stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Feature-hashed bag-of-words embedder.
///
/// Each token adds a signed unit to one hashed bucket; the vector is then
/// unit-normalized. Texts without tokens embed to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f64; self.dim];
        for tok in tokenize(text) {
            let h = fnv1a(tok.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter().map(|x| (x / norm) as f32).collect()
        } else {
            vec![0.0; self.dim]
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(512)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn pair_score(&self, candidate: &str, reference: &str) -> Result<f64, ProviderError> {
        Ok(unigram_f1(&tokenize(candidate), &tokenize(reference)))
    }
}

/// Rule-based entity tagger: capitalized tokens that do not start a sentence,
/// plus any token containing a digit. Adjacent hits separated only by
/// whitespace merge into one span.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicNer;

impl NerProvider for HeuristicNer {
    fn entities(&self, text: &str) -> Result<Vec<EntitySpan>, ProviderError> {
        let chars: Vec<char> = text.chars().collect();
        let tokens = tokenize_spans(text);
        let mut spans: Vec<EntitySpan> = Vec::new();
        let mut prev_end = 0usize;
        for (i, tok) in tokens.iter().enumerate() {
            let gap = &chars[prev_end..tok.start];
            let sentence_initial = i == 0 || gap.iter().any(|c| matches!(c, '.' | '!' | '?'));
            let first = chars[tok.start];
            let has_digit = chars[tok.start..tok.end].iter().any(|c| c.is_numeric());
            let capitalized = first.is_uppercase() && !sentence_initial;
            if has_digit || capitalized {
                let label = if has_digit { "NUM" } else { "ENT" };
                let merge = spans
                    .last()
                    .is_some_and(|s| s.end == prev_end && gap.iter().all(|c| c.is_whitespace()));
                if merge {
                    spans.last_mut().expect("checked above").end = tok.end;
                } else {
                    spans.push(EntitySpan {
                        start: tok.start,
                        end: tok.end,
                        label: label.to_string(),
                    });
                }
            }
            prev_end = tok.end;
        }
        Ok(spans)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

#[derive(Serialize)]
struct NerRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct NerResponse {
    spans: Vec<EntitySpan>,
    #[serde(default)]
    offsets: Option<String>,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    candidate: &'a str,
    reference: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    f1: f64,
}

/// HTTP client for the measurement sidecar.
pub struct SidecarClient {
    base: String,
    agent: ureq::Agent,
}

impl SidecarClient {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(60))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn post<B: Serialize, R: serde::de::DeserializeOwned>(
        &self,
        route: &str,
        body: &B,
    ) -> Result<(R, Option<String>), ProviderError> {
        let url = format!("{}{}", self.base, route);
        let resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| ProviderError::Transport(format!("POST {url}: {e}")))?;
        let offsets = resp
            .headers()
            .get("offsets")
            .or_else(|| resp.headers().get("x-offsets"))
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let parsed = resp
            .into_body()
            .read_json::<R>()
            .map_err(|e| ProviderError::Protocol(format!("POST {url}: {e}")))?;
        Ok((parsed, offsets))
    }

    /// `GET /healthz`; returns the service's self-description.
    pub fn health(&self) -> Result<serde_json::Value, ProviderError> {
        let url = format!("{}/healthz", self.base);
        self.agent
            .get(&url)
            .call()
            .map_err(|e| ProviderError::Transport(format!("GET {url}: {e}")))?
            .into_body()
            .read_json()
            .map_err(|e| ProviderError::Protocol(format!("GET {url}: {e}")))
    }
}

impl EmbeddingProvider for SidecarClient {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let (resp, _): (EmbedResponse, _) = self.post("/embed", &EmbedRequest { texts })?;
        if resp.vectors.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "/embed returned {} vectors for {} texts",
                resp.vectors.len(),
                texts.len()
            )));
        }
        Ok(resp.vectors)
    }

    fn pair_score(&self, candidate: &str, reference: &str) -> Result<f64, ProviderError> {
        let (resp, _): (ScoreResponse, _) = self.post("/score", &ScoreRequest { candidate, reference })?;
        Ok(resp.f1)
    }
}

impl NerProvider for SidecarClient {
    fn entities(&self, text: &str) -> Result<Vec<EntitySpan>, ProviderError> {
        let (resp, header): (NerResponse, _) = self.post("/ner", &NerRequest { text })?;
        match resp.offsets.or(header).as_deref() {
            None | Some("char") => Ok(resp.spans),
            Some("byte") => resp.spans.into_iter().map(|s| byte_span_to_chars(text, s)).collect(),
            Some(other) => Err(ProviderError::Protocol(format!("unknown offset convention `{other}`"))),
        }
    }
}

fn byte_span_to_chars(text: &str, span: EntitySpan) -> Result<EntitySpan, ProviderError> {
    let to_char = |b: usize| -> Result<usize, ProviderError> {
        if b > text.len() || !text.is_char_boundary(b) {
            return Err(ProviderError::Protocol(format!(
                "byte offset {b} is not a char boundary"
            )));
        }
        Ok(text[..b].chars().count())
    };
    Ok(EntitySpan {
        start: to_char(span.start)?,
        end: to_char(span.end)?,
        label: span.label,
    })
}
