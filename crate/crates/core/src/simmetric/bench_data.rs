//! Adapters for the public sentence-pair benchmarks.
//!
//! Each adapter reads the dataset's customary tab-separated layout and
//! normalizes the native label scale to `[0, 1]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BenchDataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Supported benchmarks, with their native label scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    /// Semantic textual similarity, 0–5 scale. Columns: genre, file, year,
    /// index, score, sentence1, sentence2.
    StsB,
    /// Sentence-pair similarity, 1–7 scale. Headered TSV with sentence1,
    /// sentence2, score columns.
    Sts3k,
    /// Sentence relatedness, 1–5 scale. Headered TSV with sentence_A,
    /// sentence_B, relatedness_score columns.
    Sick,
    /// Paraphrase pairs, binary. Headered TSV: quality, two ids, two strings.
    Msrp,
    /// Duplicate-question pairs, binary. Headered TSV with question1,
    /// question2, is_duplicate columns.
    Qqp,
}

impl BenchmarkKind {
    /// Native (min, max) of the label scale.
    pub fn label_scale(&self) -> (f64, f64) {
        match self {
            BenchmarkKind::StsB => (0.0, 5.0),
            BenchmarkKind::Sts3k => (1.0, 7.0),
            BenchmarkKind::Sick => (1.0, 5.0),
            BenchmarkKind::Msrp | BenchmarkKind::Qqp => (0.0, 1.0),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkKind::StsB => "sts-b",
            BenchmarkKind::Sts3k => "sts3k",
            BenchmarkKind::Sick => "sick",
            BenchmarkKind::Msrp => "msrp",
            BenchmarkKind::Qqp => "qqp",
        }
    }
}

impl std::str::FromStr for BenchmarkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sts-b" | "stsb" => Ok(BenchmarkKind::StsB),
            "sts3k" => Ok(BenchmarkKind::Sts3k),
            "sick" => Ok(BenchmarkKind::Sick),
            "msrp" => Ok(BenchmarkKind::Msrp),
            "qqp" => Ok(BenchmarkKind::Qqp),
            other => Err(format!(
                "unknown benchmark `{other}` (expected sts-b|sts3k|sick|msrp|qqp)"
            )),
        }
    }
}

/// A sentence pair with its label normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub text_a: String,
    pub text_b: String,
    pub label: f64,
}

struct Columns {
    text_a: usize,
    text_b: usize,
    label: usize,
    has_header: bool,
}

fn header_columns(
    kind: BenchmarkKind,
    header: &[&str],
    path: &str,
) -> Result<Columns, BenchDataError> {
    let find = |names: &[&str]| {
        header.iter().position(|h| {
            let h = h.trim().to_lowercase();
            names.iter().any(|n| h == *n)
        })
    };
    let missing = |what: &str| BenchDataError::Parse {
        path: path.to_string(),
        line: 1,
        message: format!("{} header is missing a {what} column", kind.as_str()),
    };
    match kind {
        BenchmarkKind::StsB => unreachable!("sts-b is positional"),
        BenchmarkKind::Sts3k => Ok(Columns {
            text_a: find(&["sentence1", "sentence_a"]).ok_or_else(|| missing("sentence1"))?,
            text_b: find(&["sentence2", "sentence_b"]).ok_or_else(|| missing("sentence2"))?,
            label: find(&["score", "rating", "mean_rating"]).ok_or_else(|| missing("score"))?,
            has_header: true,
        }),
        BenchmarkKind::Sick => Ok(Columns {
            text_a: find(&["sentence_a"]).ok_or_else(|| missing("sentence_A"))?,
            text_b: find(&["sentence_b"]).ok_or_else(|| missing("sentence_B"))?,
            label: find(&["relatedness_score"]).ok_or_else(|| missing("relatedness_score"))?,
            has_header: true,
        }),
        BenchmarkKind::Msrp => Ok(Columns {
            text_a: 3,
            text_b: 4,
            label: 0,
            has_header: true,
        }),
        BenchmarkKind::Qqp => Ok(Columns {
            text_a: find(&["question1"]).ok_or_else(|| missing("question1"))?,
            text_b: find(&["question2"]).ok_or_else(|| missing("question2"))?,
            label: find(&["is_duplicate"]).ok_or_else(|| missing("is_duplicate"))?,
            has_header: true,
        }),
    }
}

/// Load a benchmark file, normalizing labels to `[0, 1]`.
pub fn load_benchmark(
    kind: BenchmarkKind,
    path: impl AsRef<Path>,
) -> Result<Vec<LabeledPair>, BenchDataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let content = fs::read_to_string(path)?;
    let lines: Vec<&str> = content.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return Err(BenchDataError::Parse {
            path: path_str,
            line: 1,
            message: "empty file".into(),
        });
    }

    let columns = match kind {
        BenchmarkKind::StsB => Columns {
            text_a: 5,
            text_b: 6,
            label: 4,
            has_header: false,
        },
        _ => {
            let header: Vec<&str> = lines[0].split('\t').collect();
            header_columns(kind, &header, &path_str)?
        }
    };

    let (min, max) = kind.label_scale();
    let mut pairs = Vec::new();
    let start = usize::from(columns.has_header);
    for (idx, line) in lines.iter().enumerate().skip(start) {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let needed = columns.text_a.max(columns.text_b).max(columns.label);
        if fields.len() <= needed {
            return Err(BenchDataError::Parse {
                path: path_str.clone(),
                line: lineno,
                message: format!(
                    "expected at least {} tab-separated fields, got {}",
                    needed + 1,
                    fields.len()
                ),
            });
        }
        let raw: f64 = fields[columns.label]
            .trim()
            .parse()
            .map_err(|e| BenchDataError::Parse {
                path: path_str.clone(),
                line: lineno,
                message: format!("bad label {:?}: {e}", fields[columns.label]),
            })?;
        if raw < min - 1e-9 || raw > max + 1e-9 {
            return Err(BenchDataError::Parse {
                path: path_str.clone(),
                line: lineno,
                message: format!(
                    "label {raw} outside the {} scale [{min}, {max}]",
                    kind.as_str()
                ),
            });
        }
        pairs.push(LabeledPair {
            text_a: fields[columns.text_a].trim().to_string(),
            text_b: fields[columns.text_b].trim().to_string(),
            label: ((raw - min) / (max - min)).clamp(0.0, 1.0),
        });
    }
    Ok(pairs)
}
