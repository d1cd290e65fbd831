//! Definition extraction from scientific documents, with set-level
//! best-match evaluation against human ground truth.
//!
//! The pipeline: parse GROBID TEI output into a document model
//! ([`corpus`]), split it into chunks, drive chat models through one- or
//! multi-step prompting ([`extract`]), and score the candidates against
//! gold definitions with best-match alignment in both directions
//! ([`matcher`]) under a pluggable similarity backend ([`simmetric`]).
//! [`optimize`] mines few-shot demonstrations and searches over demo
//! subsets; [`harness`] runs full experiment grids behind a response cache
//! and emits reports. [`dataset`] handles the definition and
//! definition-similarity datasets and their splits.

pub mod corpus;
pub mod dataset;
pub mod extract;
pub mod harness;
pub mod matcher;
pub mod optimize;
pub mod simmetric;
pub(crate) mod util;

pub use corpus::{chunk, parse_tei, Chunk, ChunkStrategy, CorpusError, Document};
pub use dataset::{
    load_defextra, load_defsim, split_by_paper, DatasetError, DefExtraSet, DefType,
    DefinitionRecord, SimPair, SplitSpec,
};
pub use extract::{
    CandidateDefinition, ChatClient, ChatError, ChatRequest, ChatResponse, ExtractError,
    ExtractionStrategy, Extractor, PaperExtraction, StrategyKind,
};
pub use harness::{
    run_experiment, Backends, ExperimentConfig, ExperimentReport, HarnessError, ResponseCache,
};
pub use matcher::{pair_score, set_score, MatchError, PairScoreMode, SetScore};
pub use optimize::{bootstrap_demos, random_search, DemoExample, OptimizeError, OptimizedProgram};
pub use simmetric::{
    correlations, krippendorff_alpha, sweep_f1, AgreementReport, MetricError, SimilarityMetric,
    SweepReport,
};
