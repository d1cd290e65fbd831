//! Threshold-sweep F1 benchmarking.
//!
//! Both the metric scores and the human labels are binarized: the labels
//! once at a fixed ground-truth threshold, the scores at every point of a
//! grid. The report carries the full precision/recall/F1 curve and the best
//! threshold.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("length mismatch: {scores} scores vs {gold} labels")]
    LengthMismatch { scores: usize, gold: usize },
    #[error("no data points")]
    Empty,
    #[error("grid step {0} must lie in (0, 1]")]
    InvalidGridStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset_name: String,
    pub gt_threshold: f64,
    pub grid_step: f64,
    pub best_threshold: f64,
    pub best_f1: f64,
    /// Gold labels all collapsed to one class after binarization; the F1
    /// numbers are reported anyway but should be read with suspicion.
    pub degenerate_gold: bool,
    pub curve: Vec<SweepPoint>,
}

fn confusion_f1(scores: &[f64], gold_pos: &[bool], threshold: f64) -> SweepPoint {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&score, &gold) in scores.iter().zip(gold_pos) {
        let pred = score >= threshold;
        match (pred, gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    SweepPoint {
        threshold,
        precision,
        recall,
        f1,
    }
}

/// Sweep the model threshold over `{0, step, …, 1}` and report the F1 curve
/// of the positive class.
///
/// `gold` must already be normalized to `[0, 1]`; it is binarized once at
/// `gt_threshold` (≥). Ties on best F1 resolve to the smallest threshold.
pub fn sweep_f1(
    scores: &[f64],
    gold: &[f64],
    gt_threshold: f64,
    grid_step: f64,
    dataset_name: &str,
) -> Result<SweepReport, SweepError> {
    if scores.len() != gold.len() {
        return Err(SweepError::LengthMismatch {
            scores: scores.len(),
            gold: gold.len(),
        });
    }
    if scores.is_empty() {
        return Err(SweepError::Empty);
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(SweepError::InvalidGridStep(grid_step));
    }

    let gold_pos: Vec<bool> = gold.iter().map(|&g| g >= gt_threshold).collect();
    let positives = gold_pos.iter().filter(|&&p| p).count();
    let degenerate_gold = positives == 0 || positives == gold_pos.len();
    if degenerate_gold {
        log::warn!(
            "gold labels for {dataset_name} are all-{} at gt_threshold {gt_threshold}",
            if positives == 0 {
                "negative"
            } else {
                "positive"
            }
        );
    }

    // The grid always reaches 1.0, even when the step does not divide it.
    let steps = (1.0 / grid_step - 1e-9).ceil() as usize;
    let mut curve = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let threshold = (i as f64 * grid_step).min(1.0);
        curve.push(confusion_f1(scores, &gold_pos, threshold));
    }

    let mut best = &curve[0];
    for point in &curve[1..] {
        if point.f1 > best.f1 {
            best = point;
        }
    }

    Ok(SweepReport {
        dataset_name: dataset_name.to_string(),
        gt_threshold,
        grid_step,
        best_threshold: best.threshold,
        best_f1: best.f1,
        degenerate_gold,
        curve,
    })
}
