//! Chat-completions client over HTTP.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{ChatBackend, ChatCompletion, ChatRequest, PolicyError};

pub const BASE_URL_VAR: &str = "PACO_LLM_BASE_URL";
pub const API_KEY_VAR: &str = "PACO_LLM_API_KEY";

pub struct HttpChatBackend {
    base: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    attempts: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Vec<TokenLogprob>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<TopLogprob>,
}

#[derive(Deserialize)]
struct TopLogprob {
    token: String,
    logprob: f64,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            api_key,
            agent,
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads the base URL and bearer token from the environment.
    pub fn from_env() -> Result<Self, PolicyError> {
        let base =
            std::env::var(BASE_URL_VAR).map_err(|_| PolicyError::Config(format!("{BASE_URL_VAR} is not set")))?;
        Ok(Self::new(&base, std::env::var(API_KEY_VAR).ok()))
    }

    /// Attempts per request and the first backoff delay (doubled each retry).
    pub fn with_retries(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        self
    }

    fn body(request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if request.logprobs {
            body["logprobs"] = json!(true);
            if let Some(k) = request.top_logprobs {
                body["top_logprobs"] = json!(k);
            }
        }
        if let Some(m) = request.max_tokens {
            body["max_tokens"] = json!(m);
        }
        if let Some(s) = request.seed {
            body["seed"] = json!(s);
        }
        body
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<ChatCompletion, Attempt> {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let mut body = resp.into_body();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            let detail = body.read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {detail}")));
        }
        let parsed: ResponseBody = body
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Attempt::Fatal("response has no choices".into()))?;
        let first_token_logprobs = choice.logprobs.and_then(|l| l.content.into_iter().next()).map(|t| {
            let mut out = vec![(t.token.clone(), t.logprob)];
            out.extend(
                t.top_logprobs
                    .into_iter()
                    .filter(|c| c.token != t.token)
                    .map(|c| (c.token, c.logprob)),
            );
            out
        });
        Ok(ChatCompletion {
            text: choice.message.content.unwrap_or_default(),
            first_token_logprobs,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatCompletion, PolicyError> {
        let url = format!("{}/v1/chat/completions", self.base);
        let body = Self::body(request);
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 1..=self.attempts {
            match self.attempt(&url, &body) {
                Ok(c) => return Ok(c),
                Err(Attempt::Fatal(message)) => {
                    return Err(PolicyError::Failure {
                        attempts: attempt,
                        message,
                    })
                }
                Err(Attempt::Retry(message)) => {
                    tracing::debug!(attempt, %message, "chat request failed");
                    last = message;
                    if attempt < self.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(PolicyError::Failure {
            attempts: self.attempts,
            message: last,
        })
    }
}
