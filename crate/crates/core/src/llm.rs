//! Chat-completion transport.
//!
//! Requests follow the widely implemented chat-completion JSON schema
//! (`model`, `messages`, `temperature`, `max_tokens`), so hosted and local
//! servers are interchangeable. [`ChatBackend`] abstracts the transport;
//! [`HttpChatClient`] is the network implementation and [`mock`] holds
//! in-process backends for tests and offline replay.

use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

pub const ENV_API_KEY: &str = "LARF_API_KEY";
pub const ENV_API_BASE: &str = "LARF_API_BASE";
pub const ENV_MODEL: &str = "LARF_MODEL";
pub const ENV_TIMEOUT_SECS: &str = "LARF_TIMEOUT_SECS";
pub const ENV_MAX_RETRIES: &str = "LARF_MAX_RETRIES";
pub const ENV_MAX_IN_FLIGHT: &str = "LARF_MAX_IN_FLIGHT";

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint rejected the credentials: {0}")]
    Auth(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// An API key. Never printed, never serialized.
#[derive(Clone, Default)]
pub struct SecretString(String);

impl SecretString {
    pub fn new(secret: impl Into<String>) -> Self {
        Self(secret.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for SecretString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretString(***)")
    }
}

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub base_url: String,
    /// No default; must be configured.
    pub model_name: String,
    pub api_key: Option<SecretString>,
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Cap on concurrent requests to the endpoint.
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_API_BASE.to_string(),
            model_name: String::new(),
            api_key: None,
            request_timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl LlmConfig {
    pub fn from_env() -> Result<Self, LlmError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    /// Reads the `LARF_*` variables through `lookup`.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, LlmError> {
        let mut config = Self::default();
        if let Some(base) = lookup(ENV_API_BASE).filter(|s| !s.is_empty()) {
            config.base_url = base;
        }
        if let Some(model) = lookup(ENV_MODEL) {
            config.model_name = model;
        }
        config.api_key = lookup(ENV_API_KEY).filter(|s| !s.is_empty()).map(SecretString::new);
        let number = |key: &str| -> Result<Option<u64>, LlmError> {
            lookup(key)
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| LlmError::Config(format!("{key} must be a non-negative integer, got {v:?}")))
                })
                .transpose()
        };
        if let Some(secs) = number(ENV_TIMEOUT_SECS)? {
            config.request_timeout = Duration::from_secs(secs);
        }
        if let Some(retries) = number(ENV_MAX_RETRIES)? {
            config.max_retries = retries as u32;
        }
        if let Some(cap) = number(ENV_MAX_IN_FLIGHT)? {
            config.max_in_flight = cap as usize;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.request_timeout.is_zero() {
            return Err(LlmError::Config("request timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(LlmError::Config("in-flight cap must be positive".into()));
        }
        Ok(())
    }

    fn require_model(&self) -> Result<(), LlmError> {
        if self.model_name.trim().is_empty() {
            return Err(LlmError::Config(format!("no model configured; set {ENV_MODEL}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Request body, serialized as sent on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Content of the first user message.
    pub fn first_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    /// Number of assistant turns already in the conversation.
    pub fn prior_replies(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    /// The full response body.
    pub raw: Value,
}

impl ChatResponse {
    /// Wraps reply text in a minimal chat-completion body.
    pub fn from_content(content: impl Into<String>) -> Self {
        let content = content.into();
        let raw = serde_json::json!({
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        });
        Self { content, raw }
    }

    /// Extracts the first choice's message content from a response body.
    pub fn from_body(raw: Value) -> Result<Self, LlmError> {
        let content = raw
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| LlmError::Transport("response has no choices[0].message.content".into()))?
            .to_string();
        Ok(Self { content, raw })
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Chat-completion client over HTTP. Retries connection failures, 429 and
/// 5xx responses with exponential backoff; 401/403 fail immediately.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    http: reqwest::Client,
    endpoint: String,
    api_key: Option<SecretString>,
    max_retries: u32,
    backoff: Duration,
}

impl HttpChatClient {
    pub fn new(config: &LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        config.require_model()?;
        let http = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: config.api_key.clone(),
            max_retries: config.max_retries,
            backoff: Duration::from_millis(250),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    async fn send_once(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        let mut builder = self.http.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key.expose());
        }
        let response = builder
            .send()
            .await
            .map_err(|e| Attempt::Retry(LlmError::Transport(e.to_string())))?;
        let status = response.status();
        let body = response
            .text()
            .await
            .map_err(|e| Attempt::Retry(LlmError::Transport(e.to_string())))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Attempt::Fatal(LlmError::Auth(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            let err = LlmError::Transport(format!("HTTP {status}: {}", snippet(&body)));
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            });
        }
        let raw: Value = serde_json::from_str(&body)
            .map_err(|e| Attempt::Fatal(LlmError::Transport(format!("invalid JSON response: {e}"))))?;
        ChatResponse::from_body(raw).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(LlmError),
    Fatal(LlmError),
}

fn snippet(body: &str) -> &str {
    match body.char_indices().nth(200) {
        Some((i, _)) => &body[..i],
        None => body,
    }
}

#[async_trait]
impl ChatBackend for HttpChatClient {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.send_once(request).await {
                Ok(response) => return Ok(response),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt < self.max_retries => {
                    attempt += 1;
                    warn!(error = %e, attempt, "chat request failed, retrying");
                    tokio::time::sleep(delay).await;
                    delay = (delay * 2).min(Duration::from_secs(10));
                }
                Err(Attempt::Retry(e)) => {
                    debug!(error = %e, "giving up");
                    return Err(e);
                }
            }
        }
    }
}

pub mod mock {
    //! In-process backends: scripted replays and closures.

    use std::collections::VecDeque;
    use std::sync::Mutex;

    use super::*;

    type ReplyFn = dyn Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync;

    /// Answers each request with a closure of the request and the call index.
    pub struct FnBackend {
        reply: Box<ReplyFn>,
        requests: Mutex<Vec<ChatRequest>>,
    }

    impl FnBackend {
        pub fn new(reply: impl Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync + 'static) -> Self {
            Self {
                reply: Box::new(reply),
                requests: Mutex::new(Vec::new()),
            }
        }

        /// Replies with the first user message unchanged.
        pub fn echo() -> Self {
            Self::new(|req, _| Ok(req.first_user_message().unwrap_or_default().to_string()))
        }

        pub fn requests(&self) -> Vec<ChatRequest> {
            self.requests.lock().unwrap().clone()
        }
    }

    #[async_trait]
    impl ChatBackend for FnBackend {
        async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
            let index = {
                let mut requests = self.requests.lock().unwrap();
                requests.push(request.clone());
                requests.len() - 1
            };
            (self.reply)(request, index).map(ChatResponse::from_content)
        }
    }

    /// Replays a fixed list of replies in order, then fails.
    pub struct ScriptedBackend {
        replies: Mutex<VecDeque<Result<String, LlmError>>>,
        requests: Mutex<Vec<ChatRequest>>,
    }

    impl ScriptedBackend {
        pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
            Self::with_results(replies.into_iter().map(|r| Ok(r.into())))
        }

        pub fn with_results(replies: impl IntoIterator<Item = Result<String, LlmError>>) -> Self {
            Self {
                replies: Mutex::new(replies.into_iter().collect()),
                requests: Mutex::new(Vec::new()),
            }
        }

        pub fn requests(&self) -> Vec<ChatRequest> {
            self.requests.lock().unwrap().clone()
        }

        pub fn remaining(&self) -> usize {
            self.replies.lock().unwrap().len()
        }
    }

    #[async_trait]
    impl ChatBackend for ScriptedBackend {
        async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
            self.requests.lock().unwrap().push(request.clone());
            let next = self.replies.lock().unwrap().pop_front();
            match next {
                Some(reply) => reply.map(ChatResponse::from_content),
                None => Err(LlmError::Transport("scripted backend exhausted".into())),
            }
        }
    }
}
