//! Few-shot prompt optimization: bootstrap demonstration mining plus random
//! search over demo subsets.
//!
//! The bootstrap runs a teacher extractor over the train split and keeps
//! (chunk, predicted record) pairs that score highly against gold in
//! training mode, where the context-similarity term steers selection away
//! from hallucinated records. Random search then evaluates seeded demo
//! subsets on the dev split and keeps the best.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::extract::DemoExample;

use crate::corpus::{resolve_locator, ChunkStrategy, Document};
use crate::dataset::DefExtraSet;
use crate::extract::{
    CandidateFields, ChatClient, ExtractError, ExtractionStrategy, Extractor, StrategyKind,
};
use crate::matcher::{set_score, MatchError, PairScoreMode};
use crate::simmetric::SimilarityMetric;

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("empty demo pool: no pair cleared the acceptance threshold {threshold}")]
    EmptyPool { threshold: f64 },
    #[error("pool of {pool} demo(s) cannot fill {k} few-shot slots")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad program file: {0}")]
    ProgramFormat(String),
}

/// One random-search trial: the demo subset (pool indices, sorted) and its
/// dev-split score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subset: Vec<usize>,
    pub dev_score: f64,
}

/// The outcome of an optimization run, reloadable for extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedProgram {
    pub strategy: StrategyKind,
    pub chunking: ChunkStrategy,
    pub demos: Vec<DemoExample>,
    pub dev_score: f64,
    pub trial_log: Vec<TrialRecord>,
}

impl OptimizedProgram {
    /// Instantiate the program as a runnable strategy.
    pub fn to_strategy(&self) -> Result<ExtractionStrategy, ExtractError> {
        ExtractionStrategy::new(self.strategy, self.chunking, self.demos.clone())
    }
}

/// Mine few-shot demonstrations from the train split.
///
/// The teacher extractor runs over every train paper that has gold records.
/// Each (chunk, predicted record) pair whose best pair score against the
/// paper's gold in training mode reaches `accept_threshold` joins the pool,
/// which is then sorted by teacher score (descending, ties in discovery
/// order) and truncated to `max_pool`.
///
/// Papers whose extraction fails outright are skipped with a warning; an
/// empty pool at the end is the caller's signal to lower the threshold.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_demos(
    teacher: &Extractor,
    train_docs: &[Document],
    train_gold: &DefExtraSet,
    tau: f64,
    metric: &dyn SimilarityMetric,
    client: &dyn ChatClient,
    accept_threshold: f64,
    max_pool: usize,
) -> Result<Vec<DemoExample>, OptimizeError> {
    if train_docs.is_empty() {
        return Err(OptimizeError::InvalidConfig(
            "train split has no documents".into(),
        ));
    }
    if max_pool == 0 {
        return Err(OptimizeError::InvalidConfig(
            "max_pool must be at least 1".into(),
        ));
    }

    let mut pool: Vec<DemoExample> = Vec::new();
    for doc in train_docs {
        let gold: Vec<_> = train_gold
            .records_for(&doc.paper_id)
            .into_iter()
            .cloned()
            .collect();
        if gold.is_empty() {
            continue;
        }
        let extraction = match teacher.extract_paper(doc, client) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("teacher failed on {}: {e}; skipping paper", doc.paper_id);
                continue;
            }
        };
        if extraction.candidates.is_empty() {
            continue;
        }
        let predicted: Vec<_> = extraction
            .candidates
            .iter()
            .map(|c| c.to_record())
            .collect();
        let scored = set_score(&gold, &predicted, tau, PairScoreMode::DspyTrain, metric)?;

        for (j, candidate) in extraction.candidates.iter().enumerate() {
            let best = (0..gold.len())
                .map(|i| scored.per_item[i][j])
                .fold(0.0f64, f64::max);
            if best < accept_threshold {
                continue;
            }
            let Some(input) = resolve_locator(doc, &candidate.provenance.locator) else {
                log::warn!(
                    "candidate locator in {} does not resolve; skipping demo",
                    doc.paper_id
                );
                continue;
            };
            pool.push(DemoExample {
                input,
                expected: vec![CandidateFields {
                    term: candidate.term.clone(),
                    definition: candidate.definition.clone(),
                    def_type: candidate.def_type,
                    context: candidate.context.clone(),
                }],
                source_paper_id: doc.paper_id.clone(),
                teacher_score: best,
            });
        }
    }

    if pool.is_empty() {
        return Err(OptimizeError::EmptyPool {
            threshold: accept_threshold,
        });
    }
    pool.sort_by(|a, b| {
        b.teacher_score
            .partial_cmp(&a.teacher_score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pool.truncate(max_pool);
    Ok(pool)
}

fn binomial_saturating(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if result > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    result as usize
}

/// Draw `k` distinct indices from `0..n`, sorted.
fn sample_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..n).collect();
    indices.partial_shuffle(rng, k);
    let mut subset = indices[..k].to_vec();
    subset.sort_unstable();
    subset
}

/// Mean evaluation-mode score of a strategy over the dev split. Papers whose
/// extraction fails score 0.
fn dev_split_score(
    extractor: &Extractor,
    dev_docs: &[Document],
    dev_gold: &DefExtraSet,
    tau: f64,
    metric: &dyn SimilarityMetric,
    client: &dyn ChatClient,
) -> Result<f64, OptimizeError> {
    let mut total = 0.0;
    for doc in dev_docs {
        let gold: Vec<_> = dev_gold
            .records_for(&doc.paper_id)
            .into_iter()
            .cloned()
            .collect();
        match extractor.extract_paper(doc, client) {
            Ok(extraction) => {
                let predicted: Vec<_> = extraction
                    .candidates
                    .iter()
                    .map(|c| c.to_record())
                    .collect();
                total += set_score(&gold, &predicted, tau, PairScoreMode::Eval, metric)?.score;
            }
            Err(e) => {
                log::warn!("dev extraction failed on {}: {e}; scoring 0", doc.paper_id);
            }
        }
    }
    Ok(total / dev_docs.len() as f64)
}

/// Random search over demo subsets.
///
/// Samples `trials` distinct `k_demos`-subsets of the pool (capped at the
/// number of possible subsets), evaluates each as the few-shot demo set of
/// `base`'s few-shot variant on the dev split, and returns the best;
/// ties go to the earliest trial. Deterministic for a fixed seed and
/// deterministic client/metric.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    base: &Extractor,
    pool: &[DemoExample],
    k_demos: usize,
    trials: usize,
    seed: u64,
    dev_docs: &[Document],
    dev_gold: &DefExtraSet,
    tau: f64,
    metric: &dyn SimilarityMetric,
    client: &dyn ChatClient,
) -> Result<OptimizedProgram, OptimizeError> {
    if k_demos == 0 || trials == 0 {
        return Err(OptimizeError::InvalidConfig(
            "k_demos and trials must be at least 1".into(),
        ));
    }
    if dev_docs.is_empty() {
        return Err(OptimizeError::InvalidConfig(
            "dev split has no documents".into(),
        ));
    }
    if pool.len() < k_demos {
        return Err(OptimizeError::PoolTooSmall {
            pool: pool.len(),
            k: k_demos,
        });
    }

    let fs_kind = base.strategy.kind.few_shot_variant();
    let target = trials.min(binomial_saturating(pool.len(), k_demos));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(target);
    while subsets.len() < target {
        let subset = sample_subset(&mut rng, pool.len(), k_demos);
        if seen.insert(subset.clone()) {
            subsets.push(subset);
        }
    }

    let mut trial_log: Vec<TrialRecord> = Vec::with_capacity(target);
    let mut best_idx = 0usize;
    for (t, subset) in subsets.iter().enumerate() {
        let demos: Vec<DemoExample> = subset.iter().map(|&i| pool[i].clone()).collect();
        let strategy = ExtractionStrategy::new(fs_kind, base.strategy.chunking, demos)?;
        let extractor = Extractor {
            strategy,
            model: base.model.clone(),
            options: base.options.clone(),
            in_flight: base.in_flight,
        };
        let dev_score = dev_split_score(&extractor, dev_docs, dev_gold, tau, metric, client)?;
        trial_log.push(TrialRecord {
            subset: subset.clone(),
            dev_score,
        });
        if dev_score > trial_log[best_idx].dev_score {
            best_idx = t;
        }
    }

    let chosen = &trial_log[best_idx];
    Ok(OptimizedProgram {
        strategy: fs_kind,
        chunking: base.strategy.chunking,
        demos: chosen.subset.iter().map(|&i| pool[i].clone()).collect(),
        dev_score: chosen.dev_score,
        trial_log,
    })
}

const PROGRAM_FORMAT: &str = "scidef-program";
const PROGRAM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ProgramFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    program: OptimizedProgram,
}

/// Save a program as a versioned JSON file.
pub fn save_program(
    path: impl AsRef<Path>,
    program: &OptimizedProgram,
) -> Result<(), OptimizeError> {
    let file = ProgramFile {
        format: PROGRAM_FORMAT.into(),
        version: PROGRAM_VERSION,
        program: program.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| OptimizeError::ProgramFormat(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Load a program saved by [`save_program`].
pub fn load_program(path: impl AsRef<Path>) -> Result<OptimizedProgram, OptimizeError> {
    let content = fs::read_to_string(path)?;
    let file: ProgramFile =
        serde_json::from_str(&content).map_err(|e| OptimizeError::ProgramFormat(e.to_string()))?;
    if file.format != PROGRAM_FORMAT {
        return Err(OptimizeError::ProgramFormat(format!(
            "format {:?}, expected {PROGRAM_FORMAT:?}",
            file.format
        )));
    }
    if file.version != PROGRAM_VERSION {
        return Err(OptimizeError::ProgramFormat(format!(
            "unsupported version {}",
            file.version
        )));
    }
    Ok(file.program)
}
