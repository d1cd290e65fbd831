//! Network-backed similarity scorers.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MetricError, SimilarityMetric};
use crate::extract::{ChatClient, ChatMessage, ChatRequest};
use crate::util::bounded_map;

const JUDGE_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/judge_system.txt");
const JUDGE_REPAIR_PROMPT: &str = include_str!("../../assets/prompts/judge_repair_user.txt");

const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE_MS: u64 = 250;

/// How the two directional entailment scores combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Arithmetic,
    Harmonic,
}

impl Aggregation {
    /// Combine the two directions. The harmonic mean is defined as 0 when
    /// both inputs are 0.
    pub fn combine(&self, e_ab: f64, e_ba: f64) -> f64 {
        match self {
            Aggregation::Arithmetic => (e_ab + e_ba) / 2.0,
            Aggregation::Harmonic => {
                let sum = e_ab + e_ba;
                if sum == 0.0 {
                    0.0
                } else {
                    2.0 * e_ab * e_ba / sum
                }
            }
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregation::Arithmetic => "arithmetic",
            Aggregation::Harmonic => "harmonic",
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arithmetic" => Ok(Aggregation::Arithmetic),
            "harmonic" => Ok(Aggregation::Harmonic),
            other => Err(format!("unknown aggregation `{other}`")),
        }
    }
}

fn post_json_with_retry<B: Serialize, R: for<'de> Deserialize<'de>>(
    http: &reqwest::blocking::Client,
    url: &str,
    body: &B,
) -> Result<R, MetricError> {
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let result = http.post(url).json(body).send();
        match result {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    return response
                        .json::<R>()
                        .map_err(|e| MetricError::MalformedResponse(e.to_string()));
                }
                if status.as_u16() == 429 || status.is_server_error() {
                    last = format!("status {status}");
                } else {
                    return Err(MetricError::BackendUnavailable(format!("status {status}")));
                }
            }
            Err(e) => last = e.to_string(),
        }
        if attempt + 1 < MAX_ATTEMPTS {
            std::thread::sleep(Duration::from_millis(BACKOFF_BASE_MS * (1 << attempt)));
        }
    }
    Err(MetricError::BackendUnavailable(format!(
        "{last} (after {MAX_ATTEMPTS} attempts)"
    )))
}

// --- NLI ---

#[derive(Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct NliResponse {
    entailment: f64,
    neutral: f64,
    contradiction: f64,
}

/// Bidirectional NLI entailment scorer.
///
/// The endpoint classifies a premise/hypothesis pair into three classes
/// whose probabilities sum to 1 (±1e-3). The score aggregates the
/// entailment probability of both directions.
pub struct NliBackend {
    endpoint: String,
    model: String,
    aggregation: Aggregation,
    in_flight: usize,
    http: reqwest::blocking::Client,
}

impl NliBackend {
    pub fn new(endpoint: &str, model: &str, aggregation: Aggregation) -> Self {
        NliBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            aggregation,
            in_flight: 4,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("reqwest client builds"),
        }
    }

    pub fn with_in_flight(mut self, cap: usize) -> Self {
        self.in_flight = cap.max(1);
        self
    }

    /// Entailment probability for premise → hypothesis.
    fn entailment(&self, premise: &str, hypothesis: &str) -> Result<f64, MetricError> {
        let response: NliResponse = post_json_with_retry(
            &self.http,
            &self.endpoint,
            &NliRequest {
                premise,
                hypothesis,
            },
        )?;
        let probs = [
            response.entailment,
            response.neutral,
            response.contradiction,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(MetricError::MalformedResponse(format!(
                "class probabilities outside [0,1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(MetricError::MalformedResponse(format!(
                "class probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(response.entailment)
    }
}

impl SimilarityMetric for NliBackend {
    fn name(&self) -> String {
        format!("nli:{}:{}", self.model, self.aggregation.as_str())
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        let e_ab = self.entailment(a, b)?;
        let e_ba = self.entailment(b, a)?;
        Ok(self.aggregation.combine(e_ab, e_ba))
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        bounded_map(pairs.len(), self.in_flight, |i| {
            self.score(pairs[i].0, pairs[i].1)
        })
    }
}

// --- embeddings ---

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: [&'a str; 2],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Cosine similarity over an embedding endpoint, clamped at 0.
pub struct EmbeddingBackend {
    endpoint: String,
    model: String,
    in_flight: usize,
    http: reqwest::blocking::Client,
}

impl EmbeddingBackend {
    pub fn new(endpoint: &str, model: &str) -> Self {
        EmbeddingBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            in_flight: 4,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("reqwest client builds"),
        }
    }

    pub fn with_in_flight(mut self, cap: usize) -> Self {
        self.in_flight = cap.max(1);
        self
    }
}

/// Cosine of two vectors, clamped to `[0, 1]`: "unrelated" and "opposed"
/// both score 0. Zero-norm vectors score 0.
pub fn clamped_cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (norm_a * norm_b)).clamp(0.0, 1.0))
}

impl SimilarityMetric for EmbeddingBackend {
    fn name(&self) -> String {
        format!("embedding:{}", self.model)
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        let response: EmbedResponse =
            post_json_with_retry(&self.http, &self.endpoint, &EmbedRequest { texts: [a, b] })?;
        if response.vectors.len() != 2 {
            return Err(MetricError::MalformedResponse(format!(
                "expected 2 vectors, got {}",
                response.vectors.len()
            )));
        }
        clamped_cosine(&response.vectors[0], &response.vectors[1])
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        bounded_map(pairs.len(), self.in_flight, |i| {
            self.score(pairs[i].0, pairs[i].1)
        })
    }
}

// --- LLM judge ---

/// Prompts a chat model for a 1–5 similarity rating, mapped to `[0, 1]`.
///
/// One repair re-prompt is attempted when the reply carries no integer in
/// range; after that the pair fails with `JudgeUnparseable`.
pub struct LlmJudgeBackend {
    client: Arc<dyn ChatClient>,
    model: String,
    in_flight: usize,
}

impl LlmJudgeBackend {
    pub fn new(client: Arc<dyn ChatClient>, model: &str) -> Self {
        LlmJudgeBackend {
            client,
            model: model.to_string(),
            in_flight: 4,
        }
    }

    pub fn with_in_flight(mut self, cap: usize) -> Self {
        self.in_flight = cap.max(1);
        self
    }

    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: 0.0,
            max_tokens: 16,
            response_format_hint: None,
        }
    }
}

/// The first integer token decides; it must lie in `1..=5` and is mapped to
/// `[0, 1]` as `(r - 1) / 4`.
fn parse_judge_reply(content: &str) -> Option<f64> {
    let first = content
        .split(|c: char| !c.is_ascii_digit())
        .find(|t| !t.is_empty())?;
    match first.parse::<u8>() {
        Ok(r @ 1..=5) => Some(f64::from(r - 1) / 4.0),
        _ => None,
    }
}

impl SimilarityMetric for LlmJudgeBackend {
    fn name(&self) -> String {
        format!("judge:{}", self.model)
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        let mut messages = vec![
            ChatMessage::system(JUDGE_SYSTEM_PROMPT.trim_end()),
            ChatMessage::user(format!("Definition A: {a}\nDefinition B: {b}")),
        ];
        let first = self.client.complete(&self.request(messages.clone()))?;
        if let Some(score) = parse_judge_reply(&first.content) {
            return Ok(score);
        }
        messages.push(ChatMessage::assistant(first.content));
        messages.push(ChatMessage::user(JUDGE_REPAIR_PROMPT.trim_end()));
        let second = self.client.complete(&self.request(messages))?;
        parse_judge_reply(&second.content)
            .ok_or_else(|| MetricError::JudgeUnparseable(second.content.clone()))
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        bounded_map(pairs.len(), self.in_flight, |i| {
            self.score(pairs[i].0, pairs[i].1)
        })
    }
}
