//! Chat-model policy driven by the packaged prompt templates.

use serde::{Deserialize, Serialize};

use super::{
    adjustment_template, describe_path, document_bindings, History, PlanVariant, Policy, PolicyError, PromptLibrary,
    TemplateId,
};
use crate::attributes::{AttributeKind, Document};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub logprobs: bool,
    pub top_logprobs: Option<u32>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChatCompletion {
    pub text: String,
    /// Candidate first tokens and their natural-log probabilities, when the
    /// backend reports them.
    pub first_token_logprobs: Option<Vec<(String, f64)>>,
}

/// A chat-completions endpoint.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatCompletion, PolicyError>;
}

/// How `p(Yes)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum HeuristicStrategy {
    /// Renormalized first-token probabilities of "yes" and "no".
    Logprobs,
    /// Fraction of affirmative answers over sampled completions.
    Votes {
        samples: u32,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub heuristic: HeuristicStrategy,
    /// Sampling temperature for vote-based scoring.
    pub vote_temperature: f64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            model: "meta-llama/Llama-3.3-70B-Instruct".into(),
            temperature: 0.0,
            max_tokens: None,
            seed: None,
            heuristic: HeuristicStrategy::Logprobs,
            vote_temperature: 1.0,
        }
    }
}

enum Answer {
    Yes,
    No,
}

fn classify(word: &str) -> Option<Answer> {
    let w: String = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match w.as_str() {
        "yes" => Some(Answer::Yes),
        "no" => Some(Answer::No),
        _ => None,
    }
}

fn first_word(text: &str) -> &str {
    text.split_whitespace().next().unwrap_or("")
}

/// `p(yes) / (p(yes) + p(no))` over candidate first tokens. `None` when
/// neither answer appears.
pub fn yes_probability_from_logprobs(candidates: &[(String, f64)]) -> Option<f64> {
    let (mut yes, mut no) = (0.0, 0.0);
    for (token, lp) in candidates {
        match classify(token) {
            Some(Answer::Yes) => yes += lp.exp(),
            Some(Answer::No) => no += lp.exp(),
            None => {}
        }
    }
    if yes + no > 0.0 {
        Some(yes / (yes + no))
    } else {
        None
    }
}

pub struct LlmPolicy<B> {
    backend: B,
    prompts: PromptLibrary,
    settings: LlmSettings,
}

impl<B: ChatBackend> LlmPolicy<B> {
    pub fn new(backend: B, prompts: PromptLibrary, settings: LlmSettings) -> Self {
        Self {
            backend,
            prompts,
            settings,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    fn request(&self, prompt: String) -> ChatRequest {
        ChatRequest {
            model: self.settings.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt,
            }],
            temperature: self.settings.temperature,
            logprobs: false,
            top_logprobs: None,
            max_tokens: self.settings.max_tokens,
            seed: self.settings.seed,
        }
    }

    /// Completion text; a blank answer is retried once.
    fn generate(&self, prompt: String) -> Result<String, PolicyError> {
        let req = self.request(prompt);
        for _ in 0..2 {
            let text = self.backend.complete(&req)?.text;
            if !text.trim().is_empty() {
                return Ok(text.trim().to_string());
            }
        }
        Err(PolicyError::EmptyCompletion)
    }

    /// The prompt sent for the root summary.
    pub fn initial_prompt(&self, doc: &Document) -> Result<String, PolicyError> {
        Ok(self.prompts.render(TemplateId::Initial, &document_bindings(doc))?)
    }

    /// The prompt sent to adjust `action` after `history`.
    pub fn adjust_prompt(
        &self,
        doc: &Document,
        history: &History,
        action: AttributeKind,
    ) -> Result<String, PolicyError> {
        let mut b = document_bindings(doc);
        b.set("History", history.render());
        b.set("Previous summary", history.last_summary());
        Ok(self.prompts.render(adjustment_template(action), &b)?)
    }

    pub fn heuristic_prompt(
        &self,
        doc: &Document,
        summary: &str,
        path: &[AttributeKind],
    ) -> Result<String, PolicyError> {
        let mut b = document_bindings(doc);
        b.set("Summary", summary);
        b.set("path", describe_path(path));
        Ok(self.prompts.render(TemplateId::Heuristic, &b)?)
    }

    fn revision_bindings(&self, doc: &Document, initial: &str) -> Result<super::Bindings, PolicyError> {
        let mut b = document_bindings(doc);
        let instruction = self.prompts.render(TemplateId::Instruction, &b)?;
        b.set("Initial prompts", instruction.trim_end());
        b.set("Previous summary", initial);
        Ok(b)
    }
}

impl<B: ChatBackend> Policy for LlmPolicy<B> {
    fn generate_initial(&self, doc: &Document) -> Result<String, PolicyError> {
        self.generate(self.initial_prompt(doc)?)
    }

    fn adjust(&self, doc: &Document, history: &History, action: AttributeKind) -> Result<String, PolicyError> {
        self.generate(self.adjust_prompt(doc, history, action)?)
    }

    fn supports_heuristic(&self) -> bool {
        self.settings.heuristic != HeuristicStrategy::None
    }

    fn yes_probability(&self, doc: &Document, summary: &str, path: &[AttributeKind]) -> Result<f64, PolicyError> {
        let prompt = self.heuristic_prompt(doc, summary, path)?;
        match self.settings.heuristic {
            HeuristicStrategy::None => Err(PolicyError::HeuristicUnavailable),
            HeuristicStrategy::Logprobs => {
                let mut req = self.request(prompt);
                req.logprobs = true;
                req.top_logprobs = Some(5);
                req.max_tokens = Some(1);
                let out = self.backend.complete(&req)?;
                if let Some(p) = out
                    .first_token_logprobs
                    .as_deref()
                    .and_then(yes_probability_from_logprobs)
                {
                    return Ok(p);
                }
                match classify(first_word(&out.text)) {
                    Some(Answer::Yes) => Ok(1.0),
                    Some(Answer::No) => Ok(0.0),
                    None => Err(PolicyError::InvalidResponse(format!(
                        "expected Yes or No, got `{}`",
                        out.text.trim()
                    ))),
                }
            }
            HeuristicStrategy::Votes { samples } => {
                let mut req = self.request(prompt);
                req.temperature = self.settings.vote_temperature;
                let (mut yes, mut valid) = (0u32, 0u32);
                for i in 0..samples.max(1) {
                    req.seed = self.settings.seed.map(|s| s.wrapping_add(u64::from(i)));
                    let out = self.backend.complete(&req)?;
                    match classify(first_word(&out.text)) {
                        Some(Answer::Yes) => {
                            yes += 1;
                            valid += 1;
                        }
                        Some(Answer::No) => valid += 1,
                        None => {}
                    }
                }
                if valid == 0 {
                    return Err(PolicyError::InvalidResponse("no sampled answer was Yes or No".into()));
                }
                Ok(f64::from(yes) / f64::from(valid))
            }
        }
    }

    fn implicit_revise(&self, doc: &Document, initial: &str) -> Result<String, PolicyError> {
        let b = self.revision_bindings(doc, initial)?;
        self.generate(self.prompts.render(TemplateId::Implicit, &b)?)
    }

    fn propose_plan(
        &self,
        doc: &Document,
        initial: &str,
        variant: PlanVariant,
        attempt: u32,
    ) -> Result<String, PolicyError> {
        let b = self.revision_bindings(doc, initial)?;
        let id = match variant {
            PlanVariant::Base => TemplateId::Explicit,
            PlanVariant::Adaptive => TemplateId::ExplicitAdaptive,
        };
        let mut prompt = self.prompts.render(id, &b)?;
        if attempt > 0 {
            prompt.push_str("\nReturn only a bracketed list of attribute names.");
        }
        self.generate(prompt)
    }
}
