//! LLM-driven definition extraction over document chunks.
//!
//! An [`Extractor`] runs one of four prompting strategies over the chunks
//! of a document and parses the replies into [`CandidateDefinition`]s. The
//! strategies are one-step and multi-step (a yes/no gate before extraction),
//! each with or without few-shot demonstrations.

mod client;
mod parse;

use serde::{Deserialize, Serialize};

pub use client::{
    ChatClient, ChatError, ChatMessage, ChatRequest, ChatResponse, HttpChatClient, MockChatClient,
    Role, Usage,
};
pub use parse::{parse_response, CandidateFields, Unparseable};

use crate::corpus::{chunk, Chunk, ChunkStrategy, Document, SourceLocator};
use crate::dataset::{DefType, DefinitionRecord, Domain};
use crate::util::{bounded_map, norm_key};

/// Prompt texts shipped with the crate. Bump the version when any of them
/// change; it is recorded in provenance-bearing outputs.
pub const PROMPT_VERSION: &str = "1";
pub const GATE_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/gate_system.txt");
pub const EXTRACT_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/extract_system.txt");
pub const REPAIR_USER_PROMPT: &str = include_str!("../../assets/prompts/repair_user.txt");

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("invalid extractor configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("all {count} chunks failed; first error: {first}")]
    AllChunksFailed { count: usize, first: String },
}

/// The four prompting strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "onestep")]
    OneStep,
    #[serde(rename = "onestep-fs")]
    OneStepFs,
    #[serde(rename = "multistep")]
    MultiStep,
    #[serde(rename = "multistep-fs")]
    MultiStepFs,
}

impl StrategyKind {
    pub fn is_few_shot(&self) -> bool {
        matches!(self, StrategyKind::OneStepFs | StrategyKind::MultiStepFs)
    }

    pub fn is_multi_step(&self) -> bool {
        matches!(self, StrategyKind::MultiStep | StrategyKind::MultiStepFs)
    }

    /// The few-shot variant of this strategy (identity for FS kinds).
    pub fn few_shot_variant(&self) -> StrategyKind {
        match self {
            StrategyKind::OneStep | StrategyKind::OneStepFs => StrategyKind::OneStepFs,
            StrategyKind::MultiStep | StrategyKind::MultiStepFs => StrategyKind::MultiStepFs,
        }
    }

    /// The zero-shot variant (identity for non-FS kinds).
    pub fn base_variant(&self) -> StrategyKind {
        match self {
            StrategyKind::OneStep | StrategyKind::OneStepFs => StrategyKind::OneStep,
            StrategyKind::MultiStep | StrategyKind::MultiStepFs => StrategyKind::MultiStep,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::OneStep => "onestep",
            StrategyKind::OneStepFs => "onestep-fs",
            StrategyKind::MultiStep => "multistep",
            StrategyKind::MultiStepFs => "multistep-fs",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "onestep" => Ok(StrategyKind::OneStep),
            "onestep-fs" => Ok(StrategyKind::OneStepFs),
            "multistep" => Ok(StrategyKind::MultiStep),
            "multistep-fs" => Ok(StrategyKind::MultiStepFs),
            other => Err(format!(
                "unknown strategy `{other}` (expected onestep|onestep-fs|multistep|multistep-fs)"
            )),
        }
    }
}

/// A mined or hand-picked few-shot demonstration: an input passage and the
/// records the model should produce for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoExample {
    pub input: String,
    pub expected: Vec<CandidateFields>,
    pub source_paper_id: String,
    pub teacher_score: f64,
}

/// A fully-specified extraction strategy: prompting kind, chunking, and
/// demos for the few-shot variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStrategy {
    pub kind: StrategyKind,
    pub chunking: ChunkStrategy,
    pub demos: Vec<DemoExample>,
}

impl ExtractionStrategy {
    /// Demos must be present exactly when the kind is a few-shot variant.
    pub fn new(
        kind: StrategyKind,
        chunking: ChunkStrategy,
        demos: Vec<DemoExample>,
    ) -> Result<Self, ExtractError> {
        if kind.is_few_shot() && demos.is_empty() {
            return Err(ExtractError::InvalidConfig(format!(
                "{} requires at least one demo",
                kind.as_str()
            )));
        }
        if !kind.is_few_shot() && !demos.is_empty() {
            return Err(ExtractError::InvalidConfig(format!(
                "{} does not take demos",
                kind.as_str()
            )));
        }
        Ok(ExtractionStrategy {
            kind,
            chunking,
            demos,
        })
    }
}

/// Which request of a multi-step exchange is being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptStep {
    Gate,
    Extract,
}

/// Build the message list for one step over one chunk.
///
/// Few-shot demos are interleaved as prior user/assistant turns between the
/// system message and the final user message carrying the chunk.
pub fn build_prompt(
    strategy: &ExtractionStrategy,
    step: PromptStep,
    chunk_text: &str,
) -> Result<Vec<ChatMessage>, ExtractError> {
    if step == PromptStep::Gate && !strategy.kind.is_multi_step() {
        return Err(ExtractError::InvalidStep(format!(
            "gate step is not part of {}",
            strategy.kind.as_str()
        )));
    }
    if strategy.kind.is_few_shot() && strategy.demos.is_empty() {
        return Err(ExtractError::InvalidConfig(
            "few-shot strategy with no demos".into(),
        ));
    }

    let system = match step {
        PromptStep::Gate => GATE_SYSTEM_PROMPT,
        PromptStep::Extract => EXTRACT_SYSTEM_PROMPT,
    };
    let mut messages = vec![ChatMessage::system(system.trim_end())];
    if strategy.kind.is_few_shot() {
        for demo in &strategy.demos {
            messages.push(ChatMessage::user(demo.input.clone()));
            let reply = match step {
                PromptStep::Gate => "yes".to_string(),
                PromptStep::Extract => {
                    serde_json::to_string(&demo.expected).expect("demo records serialize")
                }
            };
            messages.push(ChatMessage::assistant(reply));
        }
    }
    messages.push(ChatMessage::user(chunk_text.to_string()));
    Ok(messages)
}

/// Result of the yes/no gate, distinguishing an explicit "no" from a reply
/// we could not parse (which fails open).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOutcome {
    Yes,
    No,
    Unparseable,
}

impl GateOutcome {
    /// Whether extraction should proceed. Unparseable replies pass.
    pub fn passes(&self) -> bool {
        !matches!(self, GateOutcome::No)
    }
}

fn parse_gate_reply(content: &str) -> GateOutcome {
    for token in content.split(|c: char| !c.is_alphanumeric()) {
        if token.eq_ignore_ascii_case("yes") {
            return GateOutcome::Yes;
        }
        if token.eq_ignore_ascii_case("no") {
            return GateOutcome::No;
        }
    }
    GateOutcome::Unparseable
}

/// Request knobs. Temperature defaults to 0 for determinism; max_tokens is
/// bounded per chunk size up to the cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatOptions {
    pub temperature: f64,
    pub max_tokens_cap: u32,
}

impl Default for ChatOptions {
    fn default() -> Self {
        ChatOptions {
            temperature: 0.0,
            max_tokens_cap: 2048,
        }
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub locator: SourceLocator,
    pub strategy: StrategyKind,
    pub chunking: ChunkStrategy,
    pub model_name: String,
    pub raw_response_id: u64,
}

/// A model-proposed definition, same shape as a ground-truth record plus
/// provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDefinition {
    pub paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    pub definition: String,
    #[serde(rename = "type")]
    pub def_type: DefType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub provenance: Provenance,
}

impl CandidateDefinition {
    /// View as a dataset record for scoring. A missing context falls back to
    /// the definition text; the domain of a prediction is unknowable and
    /// recorded as `Other`.
    pub fn to_record(&self) -> DefinitionRecord {
        DefinitionRecord {
            paper_id: self.paper_id.clone(),
            term: self.term.clone(),
            definition: self.definition.clone(),
            def_type: self.def_type,
            context: self
                .context
                .clone()
                .unwrap_or_else(|| self.definition.clone()),
            domain: Domain::Other,
        }
    }
}

/// Per-paper extraction counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    /// Chunks examined (all chunks of the paper under the chunking strategy).
    pub chunks_processed: usize,
    /// Chunks the gate answered "no" for.
    pub gate_rejections: usize,
    /// Gate replies with no parseable yes/no token (failed open).
    pub gate_unparseable: usize,
    /// Chunks whose extract reply stayed unparseable after one re-prompt.
    pub parse_failures: usize,
    /// Chunks lost to transport errors.
    pub chunk_errors: usize,
}

/// Deduplicated candidates for one paper plus run counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperExtraction {
    pub paper_id: String,
    pub candidates: Vec<CandidateDefinition>,
    pub stats: ExtractionStats,
}

enum ChunkOutcome {
    GateRejected {
        gate_unparseable: bool,
    },
    Parsed {
        records: Vec<CandidateFields>,
        gate_unparseable: bool,
    },
    ParseFailed {
        gate_unparseable: bool,
    },
    Errored(String),
}

/// Drives one strategy/model combination.
pub struct Extractor {
    pub strategy: ExtractionStrategy,
    pub model: String,
    pub options: ChatOptions,
    /// Maximum concurrent chunk requests.
    pub in_flight: usize,
}

impl Extractor {
    pub fn new(strategy: ExtractionStrategy, model: impl Into<String>) -> Self {
        Extractor {
            strategy,
            model: model.into(),
            options: ChatOptions::default(),
            in_flight: 1,
        }
    }

    pub fn with_in_flight(mut self, cap: usize) -> Self {
        self.in_flight = cap.max(1);
        self
    }

    fn request(&self, messages: Vec<ChatMessage>, chunk_len: usize, json: bool) -> ChatRequest {
        let sized = (chunk_len / 2 + 256).min(self.options.max_tokens_cap as usize) as u32;
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: self.options.temperature,
            max_tokens: sized,
            response_format_hint: json.then(|| "json".to_string()),
        }
    }

    /// Ask whether a chunk contains a definition. Multi-step kinds only.
    pub fn run_gate(
        &self,
        chunk_text: &str,
        client: &dyn ChatClient,
    ) -> Result<GateOutcome, ExtractError> {
        let messages = build_prompt(&self.strategy, PromptStep::Gate, chunk_text)?;
        let response = client.complete(&self.request(messages, chunk_text.len(), false))?;
        Ok(parse_gate_reply(&response.content))
    }

    fn extract_chunk(&self, chunk_text: &str, client: &dyn ChatClient) -> ChunkOutcome {
        let mut gate_unparseable = false;
        if self.strategy.kind.is_multi_step() {
            match self.run_gate(chunk_text, client) {
                Ok(GateOutcome::No) => {
                    return ChunkOutcome::GateRejected {
                        gate_unparseable: false,
                    }
                }
                Ok(GateOutcome::Unparseable) => gate_unparseable = true,
                Ok(GateOutcome::Yes) => {}
                Err(e) => return ChunkOutcome::Errored(e.to_string()),
            }
        }

        let messages = match build_prompt(&self.strategy, PromptStep::Extract, chunk_text) {
            Ok(m) => m,
            Err(e) => return ChunkOutcome::Errored(e.to_string()),
        };
        let request = self.request(messages.clone(), chunk_text.len(), true);
        let response = match client.complete(&request) {
            Ok(r) => r,
            Err(e) => return ChunkOutcome::Errored(e.to_string()),
        };
        if let Ok(records) = parse_response(&response.content) {
            return ChunkOutcome::Parsed {
                records,
                gate_unparseable,
            };
        }

        // One repair re-prompt before skipping the chunk.
        let mut retry_messages = messages;
        retry_messages.push(ChatMessage::assistant(response.content));
        retry_messages.push(ChatMessage::user(REPAIR_USER_PROMPT.trim_end()));
        let retry = self.request(retry_messages, chunk_text.len(), true);
        match client.complete(&retry) {
            Ok(r) => match parse_response(&r.content) {
                Ok(records) => ChunkOutcome::Parsed {
                    records,
                    gate_unparseable,
                },
                Err(_) => ChunkOutcome::ParseFailed { gate_unparseable },
            },
            Err(e) => ChunkOutcome::Errored(e.to_string()),
        }
    }

    /// Extract candidates from every chunk of a document.
    ///
    /// Chunk results are merged in chunk order, so the output is independent
    /// of request completion order. Candidates are deduplicated on the
    /// case-folded, whitespace-collapsed definition text; the first
    /// occurrence wins. Fails only when every chunk fails.
    pub fn extract_paper(
        &self,
        doc: &Document,
        client: &dyn ChatClient,
    ) -> Result<PaperExtraction, ExtractError> {
        let chunks: Vec<Chunk> = chunk(doc, self.strategy.chunking);
        let mut stats = ExtractionStats {
            chunks_processed: chunks.len(),
            ..ExtractionStats::default()
        };
        if chunks.is_empty() {
            stats.chunks_processed = 0;
            return Ok(PaperExtraction {
                paper_id: doc.paper_id.clone(),
                candidates: Vec::new(),
                stats,
            });
        }

        let outcomes = bounded_map(chunks.len(), self.in_flight, |i| {
            self.extract_chunk(&chunks[i].text, client)
        });

        let mut candidates: Vec<CandidateDefinition> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut first_error: Option<String> = None;
        let mut errored = 0usize;
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                ChunkOutcome::GateRejected { gate_unparseable } => {
                    stats.gate_rejections += 1;
                    stats.gate_unparseable += usize::from(gate_unparseable);
                }
                ChunkOutcome::ParseFailed { gate_unparseable } => {
                    stats.parse_failures += 1;
                    stats.gate_unparseable += usize::from(gate_unparseable);
                }
                ChunkOutcome::Errored(msg) => {
                    errored += 1;
                    stats.chunk_errors += 1;
                    first_error.get_or_insert(msg);
                }
                ChunkOutcome::Parsed {
                    records,
                    gate_unparseable,
                } => {
                    stats.gate_unparseable += usize::from(gate_unparseable);
                    for fields in records {
                        if !seen.insert(norm_key(&fields.definition)) {
                            continue;
                        }
                        candidates.push(CandidateDefinition {
                            paper_id: doc.paper_id.clone(),
                            term: fields.term,
                            definition: fields.definition,
                            def_type: fields.def_type,
                            context: fields.context,
                            provenance: Provenance {
                                locator: chunks[i].locator.clone(),
                                strategy: self.strategy.kind,
                                chunking: self.strategy.chunking,
                                model_name: self.model.clone(),
                                raw_response_id: i as u64,
                            },
                        });
                    }
                }
            }
        }

        if errored == chunks.len() {
            return Err(ExtractError::AllChunksFailed {
                count: errored,
                first: first_error.unwrap_or_default(),
            });
        }
        Ok(PaperExtraction {
            paper_id: doc.paper_id.clone(),
            candidates,
            stats,
        })
    }
}
