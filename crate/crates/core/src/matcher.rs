//! Set-level best-match scoring of extracted definitions against ground
//! truth.
//!
//! Every gold/prediction pair gets a pair score: the definition-field
//! similarity `d`, gated at the threshold `τ`, averaged with a binary
//! type-agreement term (and, in training mode, a context-similarity term).
//! Each item then matches its best-scoring counterpart in the opposite set:
//! the mean of row maxima is recall-like coverage of the ground truth, the
//! mean of column maxima penalizes over-generation, and the final score is
//! the mean of the two. Deliberately not an optimal assignment: items match
//! independently, so many-to-one matches are allowed.

use serde::{Deserialize, Serialize};

use crate::dataset::DefinitionRecord;
use crate::simmetric::{MetricError, SimilarityMetric};

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("ground-truth set is empty")]
    EmptyGroundTruth,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Pair-score composition: evaluation averages definition similarity with
/// type agreement; training adds a context-similarity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScoreMode {
    Eval,
    DspyTrain,
}

/// The score bundle for one paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    /// Mean over gold items of their best pair score (recall-like).
    pub match_g: f64,
    /// Mean over predictions of their best pair score (precision-like).
    pub match_p: f64,
    /// `(match_g + match_p) / 2`.
    pub score: f64,
    /// Fraction of gold items whose best raw definition similarity clears τ.
    /// Vacuously 1 when there are no gold items.
    pub gt_coverage: f64,
    /// The full pair-score matrix, gold × predictions.
    pub per_item: Vec<Vec<f64>>,
}

impl SetScore {
    /// Diagnostic best match per gold item: the lowest-index prediction
    /// attaining the row maximum, or `None` when the row is empty or fully
    /// gated to zero.
    pub fn best_match_per_gold(&self) -> Vec<Option<usize>> {
        self.per_item
            .iter()
            .map(|row| {
                let mut best: Option<(usize, f64)> = None;
                for (j, &s) in row.iter().enumerate() {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((j, s));
                    }
                }
                best.and_then(|(j, s)| (s > 0.0).then_some(j))
            })
            .collect()
    }
}

fn type_agreement(g: &DefinitionRecord, p: &DefinitionRecord) -> f64 {
    if g.def_type == p.def_type {
        1.0
    } else {
        0.0
    }
}

fn compose(d: f64, m: f64, c: Option<f64>) -> f64 {
    match c {
        None => (d + m) / 2.0,
        Some(c) => (d + m + c) / 3.0,
    }
}

/// Score a single gold/prediction pair.
///
/// `d` is the metric over the definition fields; below `τ` the pair scores
/// 0 and no further metric calls are made. Otherwise evaluation mode yields
/// `(d + m) / 2` with `m` the binary type agreement, and training mode
/// `(d + m + c) / 3` with `c` the metric over the context fields.
pub fn pair_score(
    g: &DefinitionRecord,
    p: &DefinitionRecord,
    tau: f64,
    mode: PairScoreMode,
    metric: &dyn SimilarityMetric,
) -> Result<f64, MatchError> {
    let d = metric.score(&g.definition, &p.definition)?;
    if d < tau {
        return Ok(0.0);
    }
    let m = type_agreement(g, p);
    match mode {
        PairScoreMode::Eval => Ok(compose(d, m, None)),
        PairScoreMode::DspyTrain => {
            let c = metric.score(&g.context, &p.context)?;
            Ok(compose(d, m, Some(c)))
        }
    }
}

/// Score a prediction set against a gold set.
///
/// Empty-set semantics: a paper with no gold definitions is perfectly
/// handled by predicting none (score 1); if exactly one side is empty, both
/// best-match means are vacuous and the score is 0.
pub fn set_score(
    gold: &[DefinitionRecord],
    predictions: &[DefinitionRecord],
    tau: f64,
    mode: PairScoreMode,
    metric: &dyn SimilarityMetric,
) -> Result<SetScore, MatchError> {
    if gold.is_empty() && predictions.is_empty() {
        return Ok(SetScore {
            match_g: 1.0,
            match_p: 1.0,
            score: 1.0,
            gt_coverage: 1.0,
            per_item: Vec::new(),
        });
    }
    if gold.is_empty() || predictions.is_empty() {
        return Ok(SetScore {
            match_g: 0.0,
            match_p: 0.0,
            score: 0.0,
            gt_coverage: if gold.is_empty() { 1.0 } else { 0.0 },
            per_item: vec![Vec::new(); gold.len()],
        });
    }

    let n_g = gold.len();
    let n_p = predictions.len();

    // Definition similarities for the whole matrix in one batch.
    let def_pairs: Vec<(&str, &str)> = gold
        .iter()
        .flat_map(|g| {
            predictions
                .iter()
                .map(move |p| (g.definition.as_str(), p.definition.as_str()))
        })
        .collect();
    let mut d = vec![vec![0.0f64; n_p]; n_g];
    for (idx, result) in metric.score_batch(&def_pairs).into_iter().enumerate() {
        d[idx / n_p][idx % n_p] = result?;
    }

    // Context similarities only where the τ gate passed.
    let mut c = vec![vec![None::<f64>; n_p]; n_g];
    if mode == PairScoreMode::DspyTrain {
        let open: Vec<(usize, usize)> = (0..n_g)
            .flat_map(|i| (0..n_p).map(move |j| (i, j)))
            .filter(|&(i, j)| d[i][j] >= tau)
            .collect();
        let ctx_pairs: Vec<(&str, &str)> = open
            .iter()
            .map(|&(i, j)| (gold[i].context.as_str(), predictions[j].context.as_str()))
            .collect();
        for (&(i, j), result) in open.iter().zip(metric.score_batch(&ctx_pairs)) {
            c[i][j] = Some(result?);
        }
    }

    let mut per_item = vec![vec![0.0f64; n_p]; n_g];
    for i in 0..n_g {
        for j in 0..n_p {
            if d[i][j] >= tau {
                per_item[i][j] =
                    compose(d[i][j], type_agreement(&gold[i], &predictions[j]), c[i][j]);
            }
        }
    }

    let row_max = |row: &[f64]| row.iter().copied().fold(0.0f64, f64::max);
    let match_g = per_item.iter().map(|row| row_max(row)).sum::<f64>() / n_g as f64;
    let match_p = (0..n_p)
        .map(|j| (0..n_g).map(|i| per_item[i][j]).fold(0.0f64, f64::max))
        .sum::<f64>()
        / n_p as f64;
    let covered = (0..n_g)
        .filter(|&i| (0..n_p).any(|j| d[i][j] >= tau))
        .count();

    Ok(SetScore {
        match_g,
        match_p,
        score: (match_g + match_p) / 2.0,
        gt_coverage: covered as f64 / n_g as f64,
        per_item,
    })
}

/// Fraction of gold definitions whose best raw definition similarity against
/// any prediction clears `τ`.
pub fn gt_coverage(
    gold: &[DefinitionRecord],
    predictions: &[DefinitionRecord],
    tau: f64,
    metric: &dyn SimilarityMetric,
) -> Result<f64, MatchError> {
    if gold.is_empty() {
        return Err(MatchError::EmptyGroundTruth);
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let mut covered = 0usize;
    for g in gold {
        for p in predictions {
            if metric.score(&g.definition, &p.definition)? >= tau {
                covered += 1;
                break;
            }
        }
    }
    Ok(covered as f64 / gold.len() as f64)
}

/// Per-paper score record as emitted in machine reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperScoreRecord {
    pub paper_id: String,
    pub match_g: f64,
    pub match_p: f64,
    pub score: f64,
    pub gt_coverage: f64,
    pub n_gold: usize,
    pub n_pred: usize,
}

impl PaperScoreRecord {
    pub fn new(paper_id: impl Into<String>, s: &SetScore, n_gold: usize, n_pred: usize) -> Self {
        PaperScoreRecord {
            paper_id: paper_id.into(),
            match_g: s.match_g,
            match_p: s.match_p,
            score: s.score,
            gt_coverage: s.gt_coverage,
            n_gold,
            n_pred,
        }
    }
}
