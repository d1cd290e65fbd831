//! `scidef`: extract candidate definitions from TEI documents with LLM
//! prompting pipelines and evaluate them against ground truth.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scidef_core::corpus::{chunk, ChunkStrategy};
use scidef_core::dataset::{load_defextra, DefExtraSet};
use scidef_core::extract::{
    CandidateDefinition, ChatClient, ExtractionStrategy, Extractor, HttpChatClient, StrategyKind,
};
use scidef_core::harness::{
    api_key_from_env, load_candidates, load_corpus_dir, manual_demos, read_report, render_ranking,
    render_strategy_summary, run_experiment, write_candidates, write_report, CachingChatClient,
    CachingMetric, ExperimentConfig, HttpBackends, MetricConfig, ResponseCache,
};
use scidef_core::matcher::{set_score, PairScoreMode, PaperScoreRecord};
use scidef_core::optimize::{bootstrap_demos, random_search, save_program};
use scidef_core::simmetric::{load_benchmark, sweep_f1, BenchmarkKind, SimilarityMetric};

#[derive(Parser)]
#[command(
    name = "scidef",
    version,
    about = "Definition extraction and evaluation for scientific documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract candidate definitions from a TEI corpus.
    Extract(ExtractArgs),
    /// Score extracted candidates against a gold definition set.
    Score(ScoreArgs),
    /// Benchmark a similarity metric on a sentence-pair dataset.
    BenchMetrics(BenchArgs),
    /// Mine few-shot demos and random-search over demo subsets.
    Optimize(OptimizeArgs),
    /// Run a configured experiment grid, or render an existing report.
    Report(ReportArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Similarity backend: exact | nli | embedding | judge.
    #[arg(long = "metric", default_value = "exact")]
    metric: String,
    /// Metric endpoint URL (required for nli/embedding/judge).
    #[arg(long = "metric-endpoint")]
    metric_endpoint: Option<String>,
    /// Metric model name.
    #[arg(long = "metric-model")]
    metric_model: Option<String>,
    /// NLI aggregation: arithmetic | harmonic.
    #[arg(long, default_value = "arithmetic")]
    aggregation: String,
}

impl MetricArgs {
    fn build(
        &self,
        in_flight: usize,
        cache_dir: Option<&PathBuf>,
    ) -> Result<Arc<dyn SimilarityMetric>> {
        let config = MetricConfig {
            kind: self.metric.clone(),
            endpoint: self.metric_endpoint.clone(),
            model: self.metric_model.clone(),
            aggregation: Some(self.aggregation.parse().map_err(anyhow::Error::msg)?),
            in_flight,
        };
        let metric = config.build()?;
        Ok(match cache_dir {
            Some(dir) => Arc::new(CachingMetric::new(
                metric,
                ResponseCache::open(dir.join("metric"))?,
            )),
            None => metric,
        })
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of TEI XML files.
    #[arg(long)]
    corpus: PathBuf,
    /// Prompting strategy: onestep | onestep-fs | multistep | multistep-fs.
    #[arg(long, default_value = "onestep")]
    strategy: String,
    /// Chunking: section | paragraph | sentence | window3.
    #[arg(long, default_value = "paragraph")]
    chunking: String,
    #[arg(long)]
    model: String,
    /// OpenAI-compatible chat endpoint base URL.
    #[arg(long)]
    endpoint: String,
    /// Candidate output file (line-delimited records).
    #[arg(long)]
    out: PathBuf,
    /// Optimized program file; overrides strategy, chunking and demos.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Train-split dataset file to draw few-shot demos from.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long = "k-demos", default_value_t = 3)]
    k_demos: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    #[arg(long = "in-flight", default_value_t = 1)]
    in_flight: usize,
    /// Dump the chunks that would be prompted, as line-delimited records.
    #[arg(long = "dump-chunks")]
    dump_chunks: Option<PathBuf>,
}

fn chat_client(endpoint: &str, cache_dir: Option<&PathBuf>) -> Result<Arc<dyn ChatClient>> {
    let http = Arc::new(HttpChatClient::new(endpoint, api_key_from_env()));
    Ok(match cache_dir {
        Some(dir) => Arc::new(CachingChatClient::new(
            http,
            ResponseCache::open(dir.join("chat"))?,
        )),
        None => http,
    })
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    let docs = load_corpus_dir(&args.corpus)?;
    if docs.is_empty() {
        bail!("no parseable TEI files under {}", args.corpus.display());
    }
    let chunking: ChunkStrategy = args.chunking.parse().map_err(anyhow::Error::msg)?;

    if let Some(dump) = &args.dump_chunks {
        let mut out = std::fs::File::create(dump)?;
        writeln!(out, r#"{{"format":"scidef-chunks","version":1}}"#)?;
        for doc in docs.values() {
            for c in chunk(doc, chunking) {
                writeln!(out, "{}", serde_json::to_string(&c)?)?;
            }
        }
        log::info!("chunks dumped to {}", dump.display());
    }

    let strategy = if let Some(program_path) = &args.program {
        scidef_core::optimize::load_program(program_path)?.to_strategy()?
    } else {
        let kind: StrategyKind = args.strategy.parse().map_err(anyhow::Error::msg)?;
        let demos = if kind.is_few_shot() {
            let train_path = args.train.as_ref().context(
                "few-shot strategies need --train (a dataset file to draw demos from) or --program",
            )?;
            manual_demos(&load_defextra(train_path)?, args.k_demos, args.seed)?
        } else {
            Vec::new()
        };
        ExtractionStrategy::new(kind, chunking, demos)?
    };

    let client = chat_client(&args.endpoint, args.cache_dir.as_ref())?;
    let extractor = Extractor {
        strategy,
        model: args.model.clone(),
        options: Default::default(),
        in_flight: args.in_flight,
    };

    let mut all: Vec<CandidateDefinition> = Vec::new();
    let mut failures = 0usize;
    for (paper_id, doc) in &docs {
        match extractor.extract_paper(doc, client.as_ref()) {
            Ok(extraction) => {
                log::info!(
                    "{paper_id}: {} candidate(s), stats {:?}",
                    extraction.candidates.len(),
                    extraction.stats
                );
                all.extend(extraction.candidates);
            }
            Err(e) => {
                failures += 1;
                log::error!("{paper_id}: extraction failed: {e}");
            }
        }
    }
    if failures == docs.len() {
        bail!("extraction failed for every paper");
    }
    write_candidates(&args.out, &all)?;
    println!(
        "extracted {} candidate(s) from {} paper(s) ({} failed) -> {}",
        all.len(),
        docs.len(),
        failures,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct ScoreArgs {
    /// Gold dataset file.
    #[arg(long)]
    gold: PathBuf,
    /// Candidate file produced by `scidef extract`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = scidef_core::harness::DEFAULT_TAU)]
    tau: f64,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long = "in-flight", default_value_t = 1)]
    in_flight: usize,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Per-paper score records (line-delimited); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_score(args: ScoreArgs) -> Result<()> {
    let gold = load_defextra(&args.gold)?;
    let candidates = load_candidates(&args.pred)?;
    let metric = args.metric.build(args.in_flight, args.cache_dir.as_ref())?;

    let mut papers: BTreeSet<String> = gold.papers.clone();
    papers.extend(candidates.iter().map(|c| c.paper_id.clone()));

    let mut lines = vec![r#"{"format":"scidef-scores","version":1}"#.to_string()];
    let mut total = 0.0;
    for paper_id in &papers {
        let g: Vec<_> = gold.records_for(paper_id).into_iter().cloned().collect();
        let p: Vec<_> = candidates
            .iter()
            .filter(|c| &c.paper_id == paper_id)
            .map(|c| c.to_record())
            .collect();
        let s = set_score(&g, &p, args.tau, PairScoreMode::Eval, metric.as_ref())?;
        total += s.score;
        let record = PaperScoreRecord::new(paper_id, &s, g.len(), p.len());
        lines.push(serde_json::to_string(&record)?);
    }
    let body = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    // Summary goes to stderr so stdout stays a clean record stream.
    eprintln!(
        "mean score over {} paper(s): {:.4}",
        papers.len(),
        total / papers.len() as f64
    );
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset kind: sts-b | sts3k | sick | msrp | qqp.
    #[arg(long)]
    dataset: String,
    /// Path to the dataset file.
    #[arg(long)]
    file: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long = "gt-threshold", default_value_t = 0.90)]
    gt_threshold: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long = "in-flight", default_value_t = 4)]
    in_flight: usize,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Sweep curve output (line-delimited); summary always prints.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let kind: BenchmarkKind = args.dataset.parse().map_err(anyhow::Error::msg)?;
    let pairs = load_benchmark(kind, &args.file)?;
    let metric = args.metric.build(args.in_flight, args.cache_dir.as_ref())?;

    let refs: Vec<(&str, &str)> = pairs
        .iter()
        .map(|p| (p.text_a.as_str(), p.text_b.as_str()))
        .collect();
    let scores: Vec<f64> = metric
        .score_batch(&refs)
        .into_iter()
        .collect::<Result<_, _>>()
        .context("metric backend failed")?;
    let labels: Vec<f64> = pairs.iter().map(|p| p.label).collect();
    let report = sweep_f1(
        &scores,
        &labels,
        args.gt_threshold,
        args.step,
        kind.as_str(),
    )?;

    if let Some(path) = &args.out {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, r#"{{"format":"scidef-sweep","version":1}}"#)?;
        for point in &report.curve {
            writeln!(out, "{}", serde_json::to_string(point)?)?;
        }
    }
    println!(
        "{}: n={} best F1 {:.4} at threshold {:.2} (gt threshold {:.2}){}",
        kind.as_str(),
        pairs.len(),
        report.best_f1,
        report.best_threshold,
        report.gt_threshold,
        if report.degenerate_gold {
            " [degenerate gold]"
        } else {
            ""
        }
    );
    Ok(())
}

#[derive(Args)]
struct OptimizeArgs {
    /// Target strategy; its zero-shot variant is the bootstrap teacher.
    #[arg(long, default_value = "multistep-fs")]
    strategy: String,
    #[arg(long)]
    corpus: PathBuf,
    /// Train-split dataset file.
    #[arg(long)]
    train: PathBuf,
    /// Dev-split dataset file.
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long)]
    endpoint: String,
    #[arg(long, default_value_t = 16)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "k-demos", default_value_t = 3)]
    k_demos: usize,
    #[arg(long = "accept-threshold", default_value_t = 0.5)]
    accept_threshold: f64,
    #[arg(long = "max-pool", default_value_t = 32)]
    max_pool: usize,
    #[arg(long, default_value = "paragraph")]
    chunking: String,
    #[arg(long, default_value_t = scidef_core::harness::DEFAULT_TAU)]
    tau: f64,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long = "in-flight", default_value_t = 1)]
    in_flight: usize,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Program output file.
    #[arg(long)]
    out: PathBuf,
}

fn run_optimize(args: OptimizeArgs) -> Result<()> {
    let kind: StrategyKind = args.strategy.parse().map_err(anyhow::Error::msg)?;
    let chunking: ChunkStrategy = args.chunking.parse().map_err(anyhow::Error::msg)?;
    let docs = load_corpus_dir(&args.corpus)?;
    let train = load_defextra(&args.train)?;
    let dev = load_defextra(&args.dev)?;

    let docs_for = |set: &DefExtraSet| -> Vec<_> {
        set.papers
            .iter()
            .filter_map(|id| docs.get(id))
            .cloned()
            .collect()
    };
    let train_docs = docs_for(&train);
    let dev_docs = docs_for(&dev);
    if train_docs.is_empty() || dev_docs.is_empty() {
        bail!("train or dev split has no matching documents in the corpus");
    }

    let metric = args.metric.build(args.in_flight, args.cache_dir.as_ref())?;
    let client = chat_client(&args.endpoint, args.cache_dir.as_ref())?;
    let teacher = Extractor {
        strategy: ExtractionStrategy::new(kind.base_variant(), chunking, vec![])?,
        model: args.model.clone(),
        options: Default::default(),
        in_flight: args.in_flight,
    };

    let pool = bootstrap_demos(
        &teacher,
        &train_docs,
        &train,
        args.tau,
        metric.as_ref(),
        client.as_ref(),
        args.accept_threshold,
        args.max_pool,
    )?;
    println!("bootstrap pool: {} demo(s)", pool.len());

    let program = random_search(
        &teacher,
        &pool,
        args.k_demos,
        args.trials,
        args.seed,
        &dev_docs,
        &dev,
        args.tau,
        metric.as_ref(),
        client.as_ref(),
    )?;
    for trial in &program.trial_log {
        println!(
            "trial subset {:?}: dev score {:.4}",
            trial.subset, trial.dev_score
        );
    }
    println!(
        "best dev score {:.4} with {} demo(s) -> {}",
        program.dev_score,
        program.demos.len(),
        args.out.display()
    );
    save_program(&args.out, &program)?;
    Ok(())
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ReportSource {
    /// Experiment config (TOML); runs the grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Existing report file; renders without running anything.
    #[arg(long)]
    from: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    source: ReportSource,
    /// Report output path (with --config).
    #[arg(long, default_value = "report.jsonl")]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn run_report(args: ReportArgs) -> Result<()> {
    let report = if let Some(config_path) = &args.source.config {
        let config = ExperimentConfig::load(config_path)?;
        let report = run_experiment(&config, &HttpBackends)?;
        write_report(&args.out, &report)?;
        println!("report written to {}", args.out.display());
        report
    } else {
        read_report(args.source.from.as_ref().expect("clap group"))?
    };

    println!("\n{}", render_strategy_summary(&report));
    match render_ranking(&report, args.top) {
        Ok(table) => println!("{table}"),
        Err(e) => println!("(no ranking: {e})"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Extract(args) => run_extract(args),
        Command::Score(args) => run_score(args),
        Command::BenchMetrics(args) => run_bench(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Report(args) => run_report(args),
    }
}
