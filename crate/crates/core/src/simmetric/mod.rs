//! Similarity backends and metric benchmarking.
//!
//! Three scorer families sit behind the [`SimilarityMetric`] trait: NLI
//! entailment aggregated over both directions, embedding cosine, and a
//! prompted LLM judge. All scores lie in `[0, 1]`. [`sweep_f1`] benchmarks a
//! scorer against binarized human labels; [`krippendorff_alpha`] and
//! [`correlations`] quantify annotator and metric–human agreement.

mod agreement;
mod backends;
mod bench_data;
mod sweep;

pub use agreement::{correlations, krippendorff_alpha, AgreementReport, StatsError};
pub use backends::{Aggregation, EmbeddingBackend, LlmJudgeBackend, NliBackend};
pub use bench_data::{load_benchmark, BenchDataError, BenchmarkKind, LabeledPair};
pub use sweep::{sweep_f1, SweepError, SweepPoint, SweepReport};

use std::collections::HashMap;

use crate::extract::ChatError;
use crate::util::norm_key;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("embedding dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("judge reply unparseable after retry: {0:?}")]
    JudgeUnparseable(String),
}

impl From<ChatError> for MetricError {
    fn from(e: ChatError) -> Self {
        match e {
            ChatError::BackendUnavailable(msg) => MetricError::BackendUnavailable(msg),
            ChatError::MalformedResponse(msg) => MetricError::MalformedResponse(msg),
        }
    }
}

/// A text-pair scorer with scores in `[0, 1]`.
///
/// Implementations must be shareable across threads. `score(a, a) == 1` is
/// not guaranteed; NLI models in particular do not promise it.
pub trait SimilarityMetric: Send + Sync {
    /// Stable identifier (kind, model, aggregation) used in cache keys and
    /// reports.
    fn name(&self) -> String;

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError>;

    /// Score many pairs; results are positionally aligned with the input.
    /// The default runs sequentially; network backends override this with a
    /// bounded-concurrency fan-out.
    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        pairs.iter().map(|(a, b)| self.score(a, b)).collect()
    }
}

impl<M: SimilarityMetric + ?Sized> SimilarityMetric for &M {
    fn name(&self) -> String {
        (**self).name()
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        (**self).score(a, b)
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        (**self).score_batch(pairs)
    }
}

impl<M: SimilarityMetric + ?Sized> SimilarityMetric for std::sync::Arc<M> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        (**self).score(a, b)
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        (**self).score_batch(pairs)
    }
}

/// Offline stub: 1 when the normalized texts are identical, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchMetric;

impl SimilarityMetric for ExactMatchMetric {
    fn name(&self) -> String {
        "exact".into()
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        Ok(if norm_key(a) == norm_key(b) { 1.0 } else { 0.0 })
    }
}

/// Table-driven stub for tests and dry runs: looks up `(a, b)` in a fixed
/// table (normalized keys, order-sensitive) and falls back to a default.
#[derive(Debug, Clone, Default)]
pub struct TableMetric {
    table: HashMap<(String, String), f64>,
    default: f64,
}

impl TableMetric {
    pub fn new(default: f64) -> Self {
        TableMetric {
            table: HashMap::new(),
            default,
        }
    }

    pub fn with(mut self, a: &str, b: &str, score: f64) -> Self {
        self.table.insert((norm_key(a), norm_key(b)), score);
        self
    }

    /// Insert the score in both directions.
    pub fn with_symmetric(self, a: &str, b: &str, score: f64) -> Self {
        self.with(a, b, score).with(b, a, score)
    }
}

impl SimilarityMetric for TableMetric {
    fn name(&self) -> String {
        "table".into()
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        Ok(*self
            .table
            .get(&(norm_key(a), norm_key(b)))
            .unwrap_or(&self.default))
    }
}
