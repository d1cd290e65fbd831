//! Loading, validation, and splitting of the definition datasets.
//!
//! Both datasets are line-delimited JSON with a version header line. The
//! definition set holds one extracted definition per record; the similarity
//! set holds definition pairs with per-annotator 1–5 ratings.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::util::normalize_ws;

/// Record counts of the released datasets, used for integrity checks.
pub const RELEASED_DEFEXTRA_RECORDS: usize = 268;
pub const RELEASED_DEFEXTRA_PAPERS: usize = 75;
pub const RELEASED_DEFSIM_TASK_A_PAIRS: usize = 60;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}:{line}: schema error: {message}")]
    SchemaError {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate record (paper_id={paper_id})")]
    DuplicateRecord {
        path: String,
        line: usize,
        paper_id: String,
    },
    #[error("{path}:{line}: rating {value} outside 1..=5")]
    RatingOutOfRange {
        path: String,
        line: usize,
        value: i64,
    },
    #[error("{path}:{line}: unsupported task {task:?} (only task A is released)")]
    UnsupportedTask {
        path: String,
        line: usize,
        task: String,
    },
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error("too few papers: {papers} papers cannot fill {splits} non-empty splits")]
    TooFewPapers { papers: usize, splits: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether a definition is quoted word-for-word or slightly paraphrased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefType {
    Explicit,
    Implicit,
}

impl fmt::Display for DefType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefType::Explicit => write!(f, "explicit"),
            DefType::Implicit => write!(f, "implicit"),
        }
    }
}

/// Whether a paper belongs to the media-bias core domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    MediaBias,
    Other,
}

/// One human-extracted definition with its three-sentence context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionRecord {
    pub paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    pub definition: String,
    #[serde(rename = "type")]
    pub def_type: DefType,
    pub context: String,
    pub domain: Domain,
}

/// The definition ground-truth set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefExtraSet {
    pub records: Vec<DefinitionRecord>,
    pub papers: BTreeSet<String>,
}

impl DefExtraSet {
    pub fn from_records(records: Vec<DefinitionRecord>) -> Self {
        let papers = records.iter().map(|r| r.paper_id.clone()).collect();
        DefExtraSet { records, papers }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn paper_count(&self) -> usize {
        self.papers.len()
    }

    /// Records of a single paper, in file order.
    pub fn records_for(&self, paper_id: &str) -> Vec<&DefinitionRecord> {
        self.records
            .iter()
            .filter(|r| r.paper_id == paper_id)
            .collect()
    }

    /// Subset keeping the given papers, record order preserved. Requested
    /// papers stay in the paper set even when they have no records here: a
    /// paper with zero gold definitions is still a scoreable paper.
    pub fn subset(&self, papers: &BTreeSet<String>) -> DefExtraSet {
        DefExtraSet {
            records: self
                .records
                .iter()
                .filter(|r| papers.contains(&r.paper_id))
                .cloned()
                .collect(),
            papers: papers.clone(),
        }
    }

    /// Compare against the released counts. `None` means the set matches;
    /// otherwise a human-readable diff of the deviation.
    pub fn release_diff(&self) -> Option<String> {
        if self.len() == RELEASED_DEFEXTRA_RECORDS && self.paper_count() == RELEASED_DEFEXTRA_PAPERS
        {
            return None;
        }
        Some(format!(
            "expected {} records over {} papers, found {} records over {} papers \
             (record diff {:+}, paper diff {:+})",
            RELEASED_DEFEXTRA_RECORDS,
            RELEASED_DEFEXTRA_PAPERS,
            self.len(),
            self.paper_count(),
            self.len() as i64 - RELEASED_DEFEXTRA_RECORDS as i64,
            self.paper_count() as i64 - RELEASED_DEFEXTRA_PAPERS as i64,
        ))
    }
}

/// A definition pair with its human similarity ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPair {
    pub def_a: String,
    pub def_b: String,
    pub ratings: Vec<u8>,
    pub mean_rating: f64,
}

#[derive(Debug, Deserialize)]
struct RawSimPair {
    definition_a: String,
    definition_b: String,
    ratings: Vec<i64>,
    #[serde(default)]
    task: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let content = fs::read_to_string(path)?;
    Ok(content.lines().map(|l| l.to_string()).collect())
}

fn check_header(path: &str, lines: &[String], expected_format: &str) -> Result<(), DatasetError> {
    let first =
        lines
            .iter()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| DatasetError::SchemaError {
                path: path.into(),
                line: 1,
                message: "empty file (missing version header)".into(),
            })?;
    let header: Header = serde_json::from_str(first).map_err(|e| DatasetError::SchemaError {
        path: path.into(),
        line: 1,
        message: format!("bad version header: {e}"),
    })?;
    if header.format != expected_format {
        return Err(DatasetError::SchemaError {
            path: path.into(),
            line: 1,
            message: format!(
                "header format {:?} does not match expected {:?}",
                header.format, expected_format
            ),
        });
    }
    if header.version != 1 {
        return Err(DatasetError::SchemaError {
            path: path.into(),
            line: 1,
            message: format!("unsupported version {}", header.version),
        });
    }
    Ok(())
}

/// Load a definition dataset file.
///
/// Validates the schema line by line. Explicit-type records whose normalized
/// definition is not a substring of the context are logged as warnings;
/// annotators were allowed minor normalization, so this is not an error.
pub fn load_defextra(path: impl AsRef<Path>) -> Result<DefExtraSet, DatasetError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let lines = read_lines(path)?;
    check_header(&path_str, &lines, "defextra")?;

    let mut records = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut started = false;
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !started {
            started = true; // header line
            continue;
        }
        let record: DefinitionRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: e.to_string(),
            })?;
        if record.definition.trim().is_empty() {
            return Err(DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: "definition must be non-empty".into(),
            });
        }
        if record.context.trim().is_empty() {
            return Err(DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: "context must be non-empty".into(),
            });
        }
        if record.paper_id.trim().is_empty() {
            return Err(DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: "paper_id must be non-empty".into(),
            });
        }
        let key = (record.paper_id.clone(), normalize_ws(&record.definition));
        if !seen.insert(key) {
            return Err(DatasetError::DuplicateRecord {
                path: path_str.clone(),
                line: lineno,
                paper_id: record.paper_id.clone(),
            });
        }
        if record.def_type == DefType::Explicit
            && !normalize_ws(&record.context).contains(&normalize_ws(&record.definition))
        {
            log::warn!(
                "{path_str}:{lineno}: explicit definition for {} is not a verbatim substring of its context",
                record.paper_id
            );
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DatasetError::SchemaError {
            path: path_str,
            line: lines.len().max(1),
            message: "no records after header".into(),
        });
    }
    Ok(DefExtraSet::from_records(records))
}

/// Write records in the on-disk dataset format (header + one record per line).
pub fn write_defextra<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a DefinitionRecord>,
) -> Result<(), DatasetError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, r#"{{"format":"defextra","version":1}}"#)?;
    for record in records {
        writeln!(
            out,
            "{}",
            serde_json::to_string(record).expect("record serializes")
        )?;
    }
    Ok(())
}

/// Load a similarity dataset file (task A).
///
/// Records carrying any other task marker are rejected with
/// [`DatasetError::UnsupportedTask`].
pub fn load_defsim(path: impl AsRef<Path>) -> Result<Vec<SimPair>, DatasetError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let lines = read_lines(path)?;
    check_header(&path_str, &lines, "defsim")?;

    let mut pairs = Vec::new();
    let mut started = false;
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !started {
            started = true;
            continue;
        }
        let raw: RawSimPair =
            serde_json::from_str(line).map_err(|e| DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: e.to_string(),
            })?;
        if let Some(task) = raw.task.as_deref() {
            if task != "A" {
                return Err(DatasetError::UnsupportedTask {
                    path: path_str.clone(),
                    line: lineno,
                    task: task.to_string(),
                });
            }
        }
        if raw.ratings.is_empty() {
            return Err(DatasetError::SchemaError {
                path: path_str.clone(),
                line: lineno,
                message: "ratings must be non-empty".into(),
            });
        }
        let mut ratings = Vec::with_capacity(raw.ratings.len());
        for &value in &raw.ratings {
            if !(1..=5).contains(&value) {
                return Err(DatasetError::RatingOutOfRange {
                    path: path_str.clone(),
                    line: lineno,
                    value,
                });
            }
            ratings.push(value as u8);
        }
        let mean_rating = ratings.iter().map(|&r| f64::from(r)).sum::<f64>() / ratings.len() as f64;
        pairs.push(SimPair {
            def_a: raw.definition_a,
            def_b: raw.definition_b,
            ratings,
            mean_rating,
        });
    }
    if pairs.is_empty() {
        return Err(DatasetError::SchemaError {
            path: path_str,
            line: lines.len().max(1),
            message: "no records after header".into(),
        });
    }
    Ok(pairs)
}

/// Fractions and seed for a train/dev/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.6,
            dev_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [self.train_fraction, self.dev_fraction, self.test_fraction];
        if fractions
            .iter()
            .any(|&f| !(0.0..1.0).contains(&f) || f == 0.0)
        {
            return Err(DatasetError::InvalidSplitSpec(
                "every fraction must lie strictly inside (0, 1)".into(),
            ));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplitSpec(format!(
                "fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Paper-id lists of a saved split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    /// Apply the manifest to a dataset, partitioning its records.
    pub fn apply(&self, set: &DefExtraSet) -> (DefExtraSet, DefExtraSet, DefExtraSet) {
        let to_set = |ids: &[String]| ids.iter().cloned().collect::<BTreeSet<_>>();
        (
            set.subset(&to_set(&self.train)),
            set.subset(&to_set(&self.dev)),
            set.subset(&to_set(&self.test)),
        )
    }
}

/// Largest-remainder apportionment of `n` items into the spec's fractions.
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [0f64; 3];
    let mut assigned = 0usize;
    for (i, &f) in fractions.iter().enumerate() {
        let exact = f * n as f64;
        counts[i] = exact.floor() as usize;
        remainders[i] = exact - exact.floor();
        assigned += counts[i];
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .partial_cmp(&remainders[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Partition a dataset into train/dev/test at paper granularity.
///
/// All records of a paper land in the same split. Deterministic for a fixed
/// seed; fractions are applied to the paper count with largest-remainder
/// rounding.
pub fn split_by_paper(
    set: &DefExtraSet,
    spec: &SplitSpec,
) -> Result<(DefExtraSet, DefExtraSet, DefExtraSet), DatasetError> {
    let manifest = split_manifest(set, spec)?;
    let (train, dev, test) = manifest.apply(set);
    Ok((train, dev, test))
}

/// Compute the paper-id manifest for a split without materializing subsets.
pub fn split_manifest(set: &DefExtraSet, spec: &SplitSpec) -> Result<SplitManifest, DatasetError> {
    spec.validate()?;
    let splits = 3usize;
    if set.paper_count() < splits {
        return Err(DatasetError::TooFewPapers {
            papers: set.paper_count(),
            splits,
        });
    }
    let mut papers: Vec<String> = set.papers.iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    papers.shuffle(&mut rng);

    let counts = apportion(
        papers.len(),
        [spec.train_fraction, spec.dev_fraction, spec.test_fraction],
    );
    let train: Vec<String> = papers[..counts[0]].to_vec();
    let dev: Vec<String> = papers[counts[0]..counts[0] + counts[1]].to_vec();
    let test: Vec<String> = papers[counts[0] + counts[1]..].to_vec();
    Ok(SplitManifest { train, dev, test })
}

/// Save a split manifest: version header plus one line per split.
pub fn save_split_manifest(
    path: impl AsRef<Path>,
    manifest: &SplitManifest,
) -> Result<(), DatasetError> {
    #[derive(Serialize)]
    struct Line<'a> {
        split: &'a str,
        papers: &'a [String],
    }
    let mut out = fs::File::create(path)?;
    writeln!(out, r#"{{"format":"scidef-split","version":1}}"#)?;
    for (name, papers) in [
        ("train", &manifest.train),
        ("dev", &manifest.dev),
        ("test", &manifest.test),
    ] {
        let line = Line {
            split: name,
            papers,
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&line).expect("manifest serializes")
        )?;
    }
    Ok(())
}

/// Load a split manifest saved by [`save_split_manifest`].
pub fn load_split_manifest(path: impl AsRef<Path>) -> Result<SplitManifest, DatasetError> {
    #[derive(Deserialize)]
    struct Line {
        split: String,
        papers: Vec<String>,
    }
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let lines = read_lines(path)?;
    check_header(&path_str, &lines, "scidef-split")?;
    let mut manifest = SplitManifest {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    let mut started = false;
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if !started {
            started = true;
            continue;
        }
        let parsed: Line = serde_json::from_str(line).map_err(|e| DatasetError::SchemaError {
            path: path_str.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        match parsed.split.as_str() {
            "train" => manifest.train = parsed.papers,
            "dev" => manifest.dev = parsed.papers,
            "test" => manifest.test = parsed.papers,
            other => {
                return Err(DatasetError::SchemaError {
                    path: path_str.clone(),
                    line: idx + 1,
                    message: format!("unknown split name {other:?}"),
                })
            }
        }
    }
    Ok(manifest)
}
