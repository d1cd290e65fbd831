//! Machine and human report output.
//!
//! Machine output is line-delimited JSON with canonical number formatting,
//! so identical runs serialize byte-identically. Human tables round to four
//! decimal places.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellReport, CountStats, ExperimentReport, HarnessError, PaperResult};
use crate::extract::CandidateDefinition;

const REPORT_FORMAT: &str = "scidef-report";
const CANDIDATES_FORMAT: &str = "scidef-candidates";

#[derive(Serialize, Deserialize)]
struct Header<'a> {
    format: &'a str,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct RankingLine {
    record: String,
    cells: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CellLine {
    record: String,
    name: String,
    model: String,
    strategy: String,
    chunking: String,
    failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    avg_score: f64,
    avg_gt_coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count_stats: Option<CountStats>,
}

#[derive(Serialize, Deserialize)]
struct PaperLine {
    record: String,
    cell: String,
    #[serde(flatten)]
    paper: PaperResult,
}

/// Serialize a report to its line-delimited form.
pub fn report_to_jsonl(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let push = |out: &mut String, value: &str| {
        out.push_str(value);
        out.push('\n');
    };
    push(
        &mut out,
        &serde_json::to_string(&Header {
            format: REPORT_FORMAT,
            version: 1,
        })
        .unwrap(),
    );
    push(
        &mut out,
        &serde_json::to_string(&RankingLine {
            record: "ranking".into(),
            cells: report.ranking.clone(),
        })
        .unwrap(),
    );
    for cell in &report.cells {
        push(
            &mut out,
            &serde_json::to_string(&CellLine {
                record: "cell".into(),
                name: cell.name.clone(),
                model: cell.model.clone(),
                strategy: cell.strategy.clone(),
                chunking: cell.chunking.clone(),
                failed: cell.failed,
                error: cell.error.clone(),
                avg_score: cell.avg_score,
                avg_gt_coverage: cell.avg_gt_coverage,
                count_stats: cell.count_stats,
            })
            .unwrap(),
        );
        for paper in &cell.papers {
            push(
                &mut out,
                &serde_json::to_string(&PaperLine {
                    record: "paper".into(),
                    cell: cell.name.clone(),
                    paper: paper.clone(),
                })
                .unwrap(),
            );
        }
    }
    out
}

/// Write a report atomically (temp file, then rename).
pub fn write_report(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, report_to_jsonl(report))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a report written by [`write_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport, HarnessError> {
    let content = std::fs::read_to_string(path.as_ref())?;
    let mut lines = content.lines().filter(|l| !l.trim().is_empty());
    let header: Header = lines
        .next()
        .ok_or_else(|| HarnessError::ReportFormat("empty file".into()))
        .and_then(|l| {
            serde_json::from_str(l).map_err(|e| HarnessError::ReportFormat(e.to_string()))
        })?;
    if header.format != REPORT_FORMAT || header.version != 1 {
        return Err(HarnessError::ReportFormat(format!(
            "unsupported header {}@{}",
            header.format, header.version
        )));
    }

    let mut report = ExperimentReport {
        cells: Vec::new(),
        ranking: Vec::new(),
    };
    for line in lines {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| HarnessError::ReportFormat(e.to_string()))?;
        match value.get("record").and_then(|r| r.as_str()) {
            Some("ranking") => {
                let parsed: RankingLine = serde_json::from_value(value)
                    .map_err(|e| HarnessError::ReportFormat(e.to_string()))?;
                report.ranking = parsed.cells;
            }
            Some("cell") => {
                let parsed: CellLine = serde_json::from_value(value)
                    .map_err(|e| HarnessError::ReportFormat(e.to_string()))?;
                report.cells.push(CellReport {
                    name: parsed.name,
                    model: parsed.model,
                    strategy: parsed.strategy,
                    chunking: parsed.chunking,
                    failed: parsed.failed,
                    error: parsed.error,
                    avg_score: parsed.avg_score,
                    avg_gt_coverage: parsed.avg_gt_coverage,
                    count_stats: parsed.count_stats,
                    papers: Vec::new(),
                });
            }
            Some("paper") => {
                let parsed: PaperLine = serde_json::from_value(value)
                    .map_err(|e| HarnessError::ReportFormat(e.to_string()))?;
                let cell = report
                    .cells
                    .iter_mut()
                    .find(|c| c.name == parsed.cell)
                    .ok_or_else(|| {
                        HarnessError::ReportFormat(format!(
                            "paper line for unknown cell {}",
                            parsed.cell
                        ))
                    })?;
                cell.papers.push(parsed.paper);
            }
            other => {
                return Err(HarnessError::ReportFormat(format!(
                    "unknown record type {other:?}"
                )))
            }
        }
    }
    Ok(report)
}

/// Write extraction candidates (header plus one record per line).
pub fn write_candidates(
    path: impl AsRef<Path>,
    candidates: &[CandidateDefinition],
) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(
        &serde_json::to_string(&Header {
            format: CANDIDATES_FORMAT,
            version: 1,
        })
        .unwrap(),
    );
    out.push('\n');
    for candidate in candidates {
        out.push_str(&serde_json::to_string(candidate).unwrap());
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Read candidates written by [`write_candidates`].
pub fn load_candidates(path: impl AsRef<Path>) -> Result<Vec<CandidateDefinition>, HarnessError> {
    let content = std::fs::read_to_string(path.as_ref())?;
    let mut lines = content.lines().filter(|l| !l.trim().is_empty());
    let header: Header = lines
        .next()
        .ok_or_else(|| HarnessError::ReportFormat("empty candidates file".into()))
        .and_then(|l| {
            serde_json::from_str(l).map_err(|e| HarnessError::ReportFormat(e.to_string()))
        })?;
    if header.format != CANDIDATES_FORMAT || header.version != 1 {
        return Err(HarnessError::ReportFormat(format!(
            "unsupported header {}@{}",
            header.format, header.version
        )));
    }
    lines
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::ReportFormat(e.to_string())))
        .collect()
}

/// Fixed-width summary: per strategy, the best observed configuration with
/// its ground-truth coverage and score.
pub fn render_strategy_summary(report: &ExperimentReport) -> String {
    let mut strategies: Vec<&str> = report
        .cells
        .iter()
        .filter(|c| !c.failed)
        .map(|c| c.strategy.as_str())
        .collect();
    strategies.sort_unstable();
    strategies.dedup();

    let mut rows: Vec<(String, f64, String, f64, f64)> = Vec::new();
    for strategy in strategies {
        let group: Vec<&CellReport> = report
            .cells
            .iter()
            .filter(|c| !c.failed && c.strategy == strategy)
            .collect();
        let avg = group.iter().map(|c| c.avg_score).sum::<f64>() / group.len() as f64;
        let best = group
            .iter()
            .max_by(|a, b| {
                a.avg_score
                    .partial_cmp(&b.avg_score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| b.name.cmp(&a.name))
            })
            .unwrap();
        rows.push((
            strategy.to_string(),
            avg,
            format!("{}, {}", best.model, best.chunking),
            best.avg_gt_coverage,
            best.avg_score,
        ));
    }
    rows.sort_by(|a, b| b.4.partial_cmp(&a.4).unwrap_or(std::cmp::Ordering::Equal));

    let mut out = String::new();
    let name_width = rows
        .iter()
        .map(|r| r.0.len())
        .chain(["strategy".len()])
        .max()
        .unwrap_or(8);
    let config_width = rows
        .iter()
        .map(|r| r.2.len())
        .chain(["best configuration".len()])
        .max()
        .unwrap_or(18);
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>9}  {:<config_width$}  {:>7}  {:>7}",
        "strategy", "avg", "best configuration", "% GT", "score"
    );
    let _ = writeln!(out, "{}", "-".repeat(name_width + config_width + 31));
    for (strategy, avg, config, coverage, score) in rows {
        let _ = writeln!(
            out,
            "{strategy:<name_width$}  {avg:>9.4}  {config:<config_width$}  {:>6.1}%  {score:>7.4}",
            coverage * 100.0
        );
    }
    out
}

/// Fixed-width top-k ranking table.
pub fn render_ranking(report: &ExperimentReport, k: usize) -> Result<String, HarnessError> {
    let top = super::rank_top_k(report, k)?;
    let mut out = String::new();
    let name_width = top
        .iter()
        .map(|c| c.name.len())
        .chain(["configuration".len()])
        .max()
        .unwrap_or(13);
    let _ = writeln!(
        out,
        "{:>4}  {:<name_width$}  {:>7}  {:>7}",
        "rank", "configuration", "score", "% GT"
    );
    let _ = writeln!(out, "{}", "-".repeat(name_width + 26));
    for (i, cell) in top.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:<name_width$}  {:>7.4}  {:>6.1}%",
            i + 1,
            cell.name,
            cell.avg_score,
            cell.avg_gt_coverage * 100.0
        );
    }
    Ok(out)
}
