//! Chat-completions client abstraction.
//!
//! [`HttpChatClient`] speaks the OpenAI-compatible chat wire contract;
//! [`MockChatClient`] replays scripted replies for tests and offline runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed response from backend: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// A logical chat request. Contains no volatile fields (ids, timestamps),
/// so its canonical JSON doubles as a stable cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// `Some("json")` asks for a JSON-object response where the backend
    /// supports it; advisory only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_format_hint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    pub usage: Usage,
}

/// Blocking chat-completions client. Implementations must be shareable
/// across threads; per-request state is the caller's problem.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

// --- HTTP client ---

const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE_MS: u64 = 250;

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    response_format: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

/// OpenAI-compatible `/v1/chat/completions` client with retries.
///
/// Transport errors and 429/5xx responses are retried up to 3 attempts with
/// exponential backoff and jitter.
pub struct HttpChatClient {
    url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    /// `endpoint` is the server base URL; the standard completions path is
    /// appended unless the URL already points at it.
    pub fn new(endpoint: &str, api_key: Option<String>) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/chat/completions")
        };
        HttpChatClient {
            url,
            api_key,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("reqwest client builds"),
        }
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError> {
        let response_format = request.response_format_hint.as_deref().map(
            |hint| serde_json::json!({ "type": if hint == "json" { "json_object" } else { hint } }),
        );
        let body = WireRequest {
            model: &request.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            response_format,
        };
        let mut builder = self.http.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Retryable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(format!("status {status}")));
        }
        let wire: WireResponse = response
            .json()
            .map_err(|e| AttemptError::Malformed(format!("bad completion payload: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| AttemptError::Malformed("completion had no choices".into()))?;
        Ok(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
            usage: wire.usage.unwrap_or_default(),
        })
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
    Malformed(String),
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            match self.attempt(request) {
                Ok(response) => return Ok(response),
                Err(AttemptError::Fatal(msg)) => return Err(ChatError::BackendUnavailable(msg)),
                Err(AttemptError::Malformed(msg)) => return Err(ChatError::MalformedResponse(msg)),
                Err(AttemptError::Retryable(msg)) => {
                    last = msg;
                    if attempt + 1 < MAX_ATTEMPTS {
                        let jitter = rand::rng().random_range(0..100);
                        let delay = BACKOFF_BASE_MS * (1 << attempt) + jitter;
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(ChatError::BackendUnavailable(format!(
            "{last} (after {MAX_ATTEMPTS} attempts)"
        )))
    }
}

// --- scripted mock ---

#[derive(Debug, Clone)]
struct MockRule {
    system_contains: Option<String>,
    user_contains: Option<String>,
    any_user_contains: Option<String>,
    reply: String,
}

/// Deterministic scripted client for tests and golden runs.
///
/// Rules are checked in insertion order against the concatenated system
/// messages and the last user message; the first match wins. Requests are
/// logged and counted so tests can assert on traffic.
#[derive(Default)]
pub struct MockChatClient {
    rules: Vec<MockRule>,
    default_reply: Option<String>,
    calls: AtomicUsize,
    log: Mutex<Vec<ChatRequest>>,
}

impl MockChatClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Match on the concatenated system messages and/or the last user
    /// message.
    pub fn rule(
        mut self,
        system_contains: Option<&str>,
        user_contains: Option<&str>,
        reply: &str,
    ) -> Self {
        self.rules.push(MockRule {
            system_contains: system_contains.map(str::to_string),
            user_contains: user_contains.map(str::to_string),
            any_user_contains: None,
            reply: reply.to_string(),
        });
        self
    }

    /// Match when any user message (including few-shot demo turns) contains
    /// the pattern.
    pub fn rule_any_user(mut self, any_user_contains: &str, reply: &str) -> Self {
        self.rules.push(MockRule {
            system_contains: None,
            user_contains: None,
            any_user_contains: Some(any_user_contains.to_string()),
            reply: reply.to_string(),
        });
        self
    }

    pub fn with_default(mut self, reply: &str) -> Self {
        self.default_reply = Some(reply.to_string());
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.clone());

        let system: String = request
            .messages
            .iter()
            .filter(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let last_user = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let all_users: String = request
            .messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");

        let reply = self
            .rules
            .iter()
            .find(|rule| {
                rule.system_contains
                    .as_deref()
                    .is_none_or(|s| system.contains(s))
                    && rule
                        .user_contains
                        .as_deref()
                        .is_none_or(|s| last_user.contains(s))
                    && rule
                        .any_user_contains
                        .as_deref()
                        .is_none_or(|s| all_users.contains(s))
            })
            .map(|rule| rule.reply.clone())
            .or_else(|| self.default_reply.clone());

        match reply {
            Some(content) => Ok(ChatResponse {
                content,
                finish_reason: "stop".into(),
                usage: Usage::default(),
            }),
            None => Err(ChatError::BackendUnavailable(
                "no scripted reply matches the request".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: "mock".into(),
            messages,
            temperature: 0.0,
            max_tokens: 64,
            response_format_hint: None,
        }
    }

    #[test]
    fn mock_matches_rules_in_order() {
        let client = MockChatClient::new()
            .rule(None, Some("alpha"), "first")
            .rule(None, Some("alpha beta"), "second")
            .with_default("fallback");

        let r = client
            .complete(&request(vec![ChatMessage::user("alpha beta")]))
            .unwrap();
        assert_eq!(r.content, "first");
        let r = client
            .complete(&request(vec![ChatMessage::user("gamma")]))
            .unwrap();
        assert_eq!(r.content, "fallback");
        assert_eq!(client.call_count(), 2);
    }

    #[test]
    fn mock_discriminates_on_system_message() {
        let client = MockChatClient::new()
            .rule(Some("screen"), Some("text"), "yes")
            .rule(None, Some("text"), "[]");
        let gate = request(vec![
            ChatMessage::system("You screen passages."),
            ChatMessage::user("some text"),
        ]);
        let extract = request(vec![
            ChatMessage::system("You extract things."),
            ChatMessage::user("some text"),
        ]);
        assert_eq!(client.complete(&gate).unwrap().content, "yes");
        assert_eq!(client.complete(&extract).unwrap().content, "[]");
    }

    #[test]
    fn mock_without_match_is_unavailable() {
        let client = MockChatClient::new();
        assert!(matches!(
            client.complete(&request(vec![ChatMessage::user("x")])),
            Err(ChatError::BackendUnavailable(_))
        ));
    }
}
