//! Experiment runner: wires corpus, datasets, extractors, metric, and cache
//! into per-cell reports.

mod cache;
mod config;
mod report;

pub use cache::{cache_key, CachingChatClient, CachingMetric, ResponseCache};
pub use config::{
    api_key_from_env, CellConfig, ExperimentConfig, MetricConfig, SplitConfig, DEFAULT_TAU,
};
pub use report::{
    load_candidates, read_report, render_ranking, render_strategy_summary, report_to_jsonl,
    write_candidates, write_report,
};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_tei, Document};
use crate::dataset::{
    load_defextra, load_split_manifest, split_by_paper, DatasetError, DefExtraSet, DefType,
};
use crate::extract::{
    CandidateFields, ChatClient, DemoExample, ExtractionStrategy, Extractor, HttpChatClient,
};
use crate::matcher::{set_score, PairScoreMode, PaperScoreRecord};
use crate::optimize::load_program;
use crate::simmetric::SimilarityMetric;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no successful cells")]
    NoSuccessfulCells,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("bad report file: {0}")]
    ReportFormat(String),
}

/// Supplies live backends per cell. Tests provide scripted fakes; the CLI
/// uses [`HttpBackends`].
pub trait Backends {
    fn chat_client(&self, cell: &CellConfig) -> Result<Arc<dyn ChatClient>, HarnessError>;
    fn metric(&self, config: &MetricConfig) -> Result<Arc<dyn SimilarityMetric>, HarnessError>;
}

/// Production backends: OpenAI-compatible chat endpoints and the configured
/// metric backend.
pub struct HttpBackends;

impl Backends for HttpBackends {
    fn chat_client(&self, cell: &CellConfig) -> Result<Arc<dyn ChatClient>, HarnessError> {
        let endpoint = cell.endpoint.as_deref().ok_or_else(|| {
            HarnessError::Config(format!("cell {} has no endpoint", cell.display_name()))
        })?;
        Ok(Arc::new(HttpChatClient::new(endpoint, api_key_from_env())))
    }

    fn metric(&self, config: &MetricConfig) -> Result<Arc<dyn SimilarityMetric>, HarnessError> {
        config.build()
    }
}

/// Per-paper definition-count statistics. The median is the lower of the two
/// middle values for even counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

/// Statistics over per-paper prediction counts; `None` for an empty set.
pub fn count_stats(counts: &[usize]) -> Option<CountStats> {
    if counts.is_empty() {
        return None;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    Some(CountStats {
        mean: sorted.iter().sum::<usize>() as f64 / sorted.len() as f64,
        median: sorted[(sorted.len() - 1) / 2] as f64,
        min: sorted[0],
        max: *sorted.last().unwrap(),
    })
}

/// One scored test paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperResult {
    #[serde(flatten)]
    pub record: PaperScoreRecord,
    /// Extraction or scoring failed; the paper scores 0 rather than being
    /// excluded, which would silently inflate averages.
    pub failed: bool,
}

/// One evaluated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub model: String,
    pub strategy: String,
    pub chunking: String,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub avg_score: f64,
    pub avg_gt_coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_stats: Option<CountStats>,
    pub papers: Vec<PaperResult>,
}

/// All cells plus the ranking of successful ones (descending average score,
/// ties by name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
    pub ranking: Vec<String>,
}

/// Top `k` successful cells by average test score; ties break by cell name
/// ascending, `k` larger than the cell count clamps.
pub fn rank_top_k(report: &ExperimentReport, k: usize) -> Result<Vec<&CellReport>, HarnessError> {
    let mut cells: Vec<&CellReport> = report.cells.iter().filter(|c| !c.failed).collect();
    if cells.is_empty() {
        return Err(HarnessError::NoSuccessfulCells);
    }
    cells.sort_by(|a, b| {
        b.avg_score
            .partial_cmp(&a.avg_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    cells.truncate(k);
    Ok(cells)
}

/// Parse every TEI file in a directory, keyed by file stem.
///
/// The file stem (without `.xml` / `.tei.xml`) becomes the paper id, which
/// is how corpus files pair with dataset records. Unparseable files are
/// skipped with a warning; papers referencing them surface later as failed.
pub fn load_corpus_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, Document>, HarnessError> {
    let dir = dir.as_ref();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "xml"))
        .collect();
    entries.sort();

    let mut docs = BTreeMap::new();
    for path in entries {
        let raw = std::fs::read(&path)?;
        let stem = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .trim_end_matches(".xml")
            .trim_end_matches(".tei")
            .to_string();
        match parse_tei(&raw) {
            Ok(mut doc) => {
                doc.paper_id = stem.clone();
                docs.insert(stem, doc);
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    Ok(docs)
}

/// Deterministic manual few-shot demos from the train split: the gold
/// context as input, the gold record as expected output. Stratified to
/// include at least one explicit and one implicit record when both exist
/// and `k >= 2`.
pub fn manual_demos(
    train: &DefExtraSet,
    k: usize,
    seed: u64,
) -> Result<Vec<DemoExample>, HarnessError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if train.is_empty() {
        return Err(HarnessError::Config(
            "train split has no records to draw demos from".into(),
        ));
    }
    let k = k.max(1);
    let mut records: Vec<_> = train.records.iter().collect();
    records.sort_by(|a, b| (&a.paper_id, &a.definition).cmp(&(&b.paper_id, &b.definition)));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);

    let mut picked: Vec<usize> = Vec::new();
    if k >= 2 {
        for def_type in [DefType::Explicit, DefType::Implicit] {
            if let Some(pos) = records.iter().position(|r| r.def_type == def_type) {
                picked.push(pos);
            }
        }
    }
    for pos in 0..records.len() {
        if picked.len() >= k {
            break;
        }
        if !picked.contains(&pos) {
            picked.push(pos);
        }
    }

    Ok(picked
        .into_iter()
        .take(k)
        .map(|pos| {
            let r = records[pos];
            DemoExample {
                input: r.context.clone(),
                expected: vec![CandidateFields {
                    term: r.term.clone(),
                    definition: r.definition.clone(),
                    def_type: r.def_type,
                    context: Some(r.context.clone()),
                }],
                source_paper_id: r.paper_id.clone(),
                teacher_score: 1.0,
            }
        })
        .collect())
}

fn zero_paper(paper_id: &str, n_gold: usize) -> PaperResult {
    PaperResult {
        record: PaperScoreRecord {
            paper_id: paper_id.to_string(),
            match_g: 0.0,
            match_p: 0.0,
            score: 0.0,
            gt_coverage: 0.0,
            n_gold,
            n_pred: 0,
        },
        failed: true,
    }
}

fn cell_strategy(
    cell: &CellConfig,
    train: &DefExtraSet,
    seed: u64,
) -> Result<ExtractionStrategy, HarnessError> {
    if let Some(program_path) = &cell.program {
        let program = load_program(program_path)
            .map_err(|e| HarnessError::Config(format!("cell {}: {e}", cell.display_name())))?;
        return program
            .to_strategy()
            .map_err(|e| HarnessError::Config(e.to_string()));
    }
    let demos = if cell.strategy.is_few_shot() {
        manual_demos(train, cell.k_demos.unwrap_or(3), seed)?
    } else {
        Vec::new()
    };
    ExtractionStrategy::new(cell.strategy, cell.chunking, demos)
        .map_err(|e| HarnessError::Config(e.to_string()))
}

fn run_cell(
    config: &ExperimentConfig,
    cell: &CellConfig,
    docs: &BTreeMap<String, Document>,
    train: &DefExtraSet,
    test: &DefExtraSet,
    metric: &dyn SimilarityMetric,
    backends: &dyn Backends,
) -> Result<(Vec<PaperResult>, Option<String>), HarnessError> {
    let strategy = cell_strategy(cell, train, config.seed)?;
    let client = CachingChatClient::new(
        backends.chat_client(cell)?,
        ResponseCache::open(config.cache_dir.join("chat"))?,
    );
    let extractor = Extractor {
        strategy,
        model: cell.model.clone(),
        options: Default::default(),
        in_flight: config.in_flight,
    };

    let mut papers = Vec::new();
    let mut first_error: Option<String> = None;
    for paper_id in &test.papers {
        let gold: Vec<_> = test.records_for(paper_id).into_iter().cloned().collect();
        let Some(doc) = docs.get(paper_id) else {
            first_error.get_or_insert(format!("no corpus document for {paper_id}"));
            papers.push(zero_paper(paper_id, gold.len()));
            continue;
        };
        let extraction = match extractor.extract_paper(doc, &client) {
            Ok(e) => e,
            Err(e) => {
                first_error.get_or_insert(e.to_string());
                papers.push(zero_paper(paper_id, gold.len()));
                continue;
            }
        };
        let predicted: Vec<_> = extraction
            .candidates
            .iter()
            .map(|c| c.to_record())
            .collect();
        match set_score(&gold, &predicted, config.tau, PairScoreMode::Eval, metric) {
            Ok(s) => papers.push(PaperResult {
                record: PaperScoreRecord::new(paper_id, &s, gold.len(), predicted.len()),
                failed: false,
            }),
            Err(e) => {
                first_error.get_or_insert(e.to_string());
                papers.push(zero_paper(paper_id, gold.len()));
            }
        }
    }
    Ok((papers, first_error))
}

/// Run every configured cell against the test split.
///
/// Cells run sequentially and failures isolate: a cell whose setup fails or
/// whose papers all fail is marked failed while the rest proceed. Failed
/// papers inside a surviving cell score 0 and are flagged. All chat and
/// metric traffic goes through the response cache, so a rerun against a warm
/// cache issues no live calls.
pub fn run_experiment(
    config: &ExperimentConfig,
    backends: &dyn Backends,
) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;

    let docs = load_corpus_dir(&config.corpus_dir)?;
    let dataset = load_defextra(&config.defextra)?;
    let (train, _dev, test) = match &config.split {
        SplitConfig::Spec(spec) => split_by_paper(&dataset, spec)?,
        SplitConfig::Manifest { manifest } => load_split_manifest(manifest)?.apply(&dataset),
    };
    if test.papers.is_empty() {
        return Err(HarnessError::Config("test split contains no papers".into()));
    }

    let metric = CachingMetric::new(
        backends.metric(&config.metric)?,
        ResponseCache::open(config.cache_dir.join("metric"))?,
    );

    let mut cells = Vec::with_capacity(config.cells.len());
    for cell in &config.cells {
        let (papers, error) = match run_cell(config, cell, &docs, &train, &test, &metric, backends)
        {
            Ok(outcome) => outcome,
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let n = papers.len();
        let failed = n == 0 || papers.iter().all(|p| p.failed);
        let avg = |f: fn(&PaperResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                papers.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let counts: Vec<usize> = papers.iter().map(|p| p.record.n_pred).collect();
        cells.push(CellReport {
            name: cell.display_name(),
            model: cell.model.clone(),
            strategy: cell.strategy.as_str().to_string(),
            chunking: cell.chunking.as_str().to_string(),
            failed,
            error: if failed { error } else { None },
            avg_score: avg(|p| p.record.score),
            avg_gt_coverage: avg(|p| p.record.gt_coverage),
            count_stats: count_stats(&counts),
            papers,
        });
    }

    let ranking = rank_top_k(
        &ExperimentReport {
            cells: cells.clone(),
            ranking: vec![],
        },
        usize::MAX,
    )
    .map(|ranked| ranked.into_iter().map(|c| c.name.clone()).collect())
    .unwrap_or_default();

    Ok(ExperimentReport { cells, ranking })
}
