//! Annotator-agreement and metric–human correlation statistics.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Agreement bundle. Statistics that are undefined on the given input
/// (constant vectors, one-class binarization) are reported as absent, never
/// as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub alpha: Option<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub mcc: Option<f64>,
}

/// Interval-level Krippendorff's alpha over a raters × items matrix.
///
/// Missing entries are allowed; items with fewer than two ratings drop out.
/// Observed disagreement uses within-item squared differences weighted by
/// `1 / (m_u - 1)`; expected disagreement uses all cross-item pairs. When
/// nothing varies at all, agreement is perfect and alpha is 1.
pub fn krippendorff_alpha(ratings: &[Vec<Option<f64>>]) -> Result<f64, StatsError> {
    if ratings.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "{} rater(s); need at least 2",
            ratings.len()
        )));
    }
    let items = ratings.iter().map(|row| row.len()).max().unwrap_or(0);

    let mut units: Vec<Vec<f64>> = Vec::new();
    for item in 0..items {
        let values: Vec<f64> = ratings
            .iter()
            .filter_map(|row| row.get(item).copied().flatten())
            .collect();
        if values.len() >= 2 {
            units.push(values);
        }
    }
    if units.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "{} item(s) with >=2 ratings; need at least 2",
            units.len()
        )));
    }

    // Observed disagreement: ordered within-unit pairs, each weighted by
    // 1/(m_u - 1), averaged over the n pairable values.
    let n: usize = units.iter().map(|u| u.len()).sum();
    let mut observed = 0.0;
    for unit in &units {
        let m = unit.len();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let d = unit[i] - unit[j];
                    observed += d * d / (m as f64 - 1.0);
                }
            }
        }
    }
    let d_o = observed / n as f64;

    // Expected disagreement: ordered pairs over the pooled values.
    let pooled: Vec<f64> = units.iter().flatten().copied().collect();
    let mut expected = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                let d = pooled[i] - pooled[j];
                expected += d * d;
            }
        }
    }
    let d_e = expected / (n as f64 * (n as f64 - 1.0));

    if d_e == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation; `None` when either vector is constant.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ranks with ties assigned the average of their positions (1-based).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Kendall's tau-b with tie corrections; `None` when a vector is constant.
fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                ties_x += 1;
                ties_y += 1;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if dx * dy > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / denom)
}

/// Matthews correlation of the binarized vectors; `None` when the confusion
/// matrix has an empty margin.
fn mcc(x: &[f64], y: &[f64], x_threshold: f64, y_threshold: f64) -> Option<f64> {
    let mut tp = 0f64;
    let mut tn = 0f64;
    let mut fp = 0f64;
    let mut fn_ = 0f64;
    for (&a, &b) in x.iter().zip(y) {
        match (a >= x_threshold, b >= y_threshold) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((tp * tn - fp * fn_) / denom)
}

/// Correlations between metric scores `x` and reference labels `y`.
///
/// Reports Pearson, Spearman (average ranks), Kendall tau-b, and MCC after
/// binarizing `x` at `mcc_pred_threshold` and `y` at `mcc_gold_threshold`
/// (both ≥). The `alpha` field is left empty; fill it from
/// [`krippendorff_alpha`] when a rating matrix is available.
pub fn correlations(
    x: &[f64],
    y: &[f64],
    mcc_gold_threshold: f64,
    mcc_pred_threshold: f64,
) -> Result<AgreementReport, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::InsufficientData(format!(
            "{} pair(s); need at least 3",
            x.len()
        )));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    Ok(AgreementReport {
        n: x.len(),
        alpha: None,
        pearson: pearson(x, y),
        spearman: pearson(&rx, &ry),
        kendall: kendall_tau_b(x, y),
        mcc: mcc(x, y, mcc_pred_threshold, mcc_gold_threshold),
    })
}
