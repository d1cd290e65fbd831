//! Parsed document model and text chunking.
//!
//! A [`Document`] is the hierarchical text extracted from a GROBID-style TEI
//! file (see [`parse_tei`]). [`chunk`] turns a document into the text units
//! fed to extractors under one of four splitting strategies.

mod segment;
mod tei;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use segment::segment_sentences;
pub use tei::parse_tei;

use crate::util::normalize_ws;

/// Errors raised while building the document model.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    /// The input was not well-formed XML.
    #[error("malformed input: {0}")]
    MalformedInput(String),
    /// The TEI body contained no paragraph text.
    #[error("empty document: TEI body contains no text")]
    EmptyDocument,
}

/// A parsed scientific document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub paper_id: String,
    pub title: String,
    pub sections: Vec<Section>,
}

/// A body division: heading plus its paragraphs, in source order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub paragraphs: Vec<Paragraph>,
}

/// Paragraph text plus its sentence spans (byte offsets into `text`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub text: String,
    pub sentences: Vec<Range<usize>>,
}

impl Paragraph {
    /// Build a paragraph from already-normalized text, segmenting sentences.
    pub fn new(text: String) -> Self {
        let sentences = segment_sentences(&text);
        Paragraph { text, sentences }
    }
}

/// How a document is split into extraction units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChunkStrategy {
    #[serde(rename = "section")]
    Section,
    #[serde(rename = "paragraph")]
    Paragraph,
    #[serde(rename = "sentence")]
    Sentence,
    #[serde(rename = "window3")]
    SlidingWindow3,
}

impl ChunkStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChunkStrategy::Section => "section",
            ChunkStrategy::Paragraph => "paragraph",
            ChunkStrategy::Sentence => "sentence",
            ChunkStrategy::SlidingWindow3 => "window3",
        }
    }
}

impl std::str::FromStr for ChunkStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "section" => Ok(ChunkStrategy::Section),
            "paragraph" => Ok(ChunkStrategy::Paragraph),
            "sentence" => Ok(ChunkStrategy::Sentence),
            "window3" | "sliding-window3" => Ok(ChunkStrategy::SlidingWindow3),
            other => Err(format!(
                "unknown chunking strategy `{other}` (expected section|paragraph|sentence|window3)"
            )),
        }
    }
}

/// Points a chunk back into its document.
///
/// `paragraph` is absent for section chunks; `sentences` is the half-open
/// `[start, end)` index range into the paragraph's sentence list and is
/// absent for section and paragraph chunks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceLocator {
    pub section: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<(usize, usize)>,
}

/// One extraction unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub paper_id: String,
    pub strategy: ChunkStrategy,
    pub text: String,
    pub locator: SourceLocator,
}

/// Split a document into chunks under the given strategy.
///
/// Sliding windows have stride 1, hold 3 consecutive sentences, and never
/// cross paragraph boundaries; a paragraph with fewer than 3 sentences emits
/// a single window containing all of them. Units that are empty after
/// whitespace normalization are skipped.
pub fn chunk(doc: &Document, strategy: ChunkStrategy) -> Vec<Chunk> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Chunk>, text: String, locator: SourceLocator| {
        if !normalize_ws(&text).is_empty() {
            out.push(Chunk {
                paper_id: doc.paper_id.clone(),
                strategy,
                text,
                locator,
            });
        }
    };

    for (si, section) in doc.sections.iter().enumerate() {
        match strategy {
            ChunkStrategy::Section => {
                let mut parts = Vec::new();
                if !section.heading.is_empty() {
                    parts.push(section.heading.clone());
                }
                parts.extend(section.paragraphs.iter().map(|p| p.text.clone()));
                push(
                    &mut out,
                    parts.join("\n"),
                    SourceLocator {
                        section: si,
                        paragraph: None,
                        sentences: None,
                    },
                );
            }
            ChunkStrategy::Paragraph => {
                for (pi, para) in section.paragraphs.iter().enumerate() {
                    push(
                        &mut out,
                        para.text.clone(),
                        SourceLocator {
                            section: si,
                            paragraph: Some(pi),
                            sentences: None,
                        },
                    );
                }
            }
            ChunkStrategy::Sentence => {
                for (pi, para) in section.paragraphs.iter().enumerate() {
                    for (ti, span) in para.sentences.iter().enumerate() {
                        push(
                            &mut out,
                            para.text[span.clone()].to_string(),
                            SourceLocator {
                                section: si,
                                paragraph: Some(pi),
                                sentences: Some((ti, ti + 1)),
                            },
                        );
                    }
                }
            }
            ChunkStrategy::SlidingWindow3 => {
                for (pi, para) in section.paragraphs.iter().enumerate() {
                    let n = para.sentences.len();
                    if n == 0 {
                        continue;
                    }
                    let windows: Vec<(usize, usize)> = if n < 3 {
                        vec![(0, n)]
                    } else {
                        (0..=n - 3).map(|i| (i, i + 3)).collect()
                    };
                    for (start, end) in windows {
                        let byte_start = para.sentences[start].start;
                        let byte_end = para.sentences[end - 1].end;
                        push(
                            &mut out,
                            para.text[byte_start..byte_end].to_string(),
                            SourceLocator {
                                section: si,
                                paragraph: Some(pi),
                                sentences: Some((start, end)),
                            },
                        );
                    }
                }
            }
        }
    }
    out
}

/// Resolve a locator back to the chunk text it came from.
///
/// Returns `None` when the locator does not point inside the document.
pub fn resolve_locator(doc: &Document, locator: &SourceLocator) -> Option<String> {
    let section = doc.sections.get(locator.section)?;
    let Some(pi) = locator.paragraph else {
        let mut parts = Vec::new();
        if !section.heading.is_empty() {
            parts.push(section.heading.clone());
        }
        parts.extend(section.paragraphs.iter().map(|p| p.text.clone()));
        return Some(parts.join("\n"));
    };
    let para = section.paragraphs.get(pi)?;
    let Some((start, end)) = locator.sentences else {
        return Some(para.text.clone());
    };
    if start >= end || end > para.sentences.len() {
        return None;
    }
    let byte_start = para.sentences[start].start;
    let byte_end = para.sentences[end - 1].end;
    Some(para.text[byte_start..byte_end].to_string())
}
