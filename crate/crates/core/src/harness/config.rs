//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::ChunkStrategy;
use crate::dataset::SplitSpec;
use crate::extract::{ChatClient, HttpChatClient, StrategyKind};
use crate::simmetric::{
    Aggregation, EmbeddingBackend, ExactMatchMetric, LlmJudgeBackend, NliBackend, SimilarityMetric,
};

use super::HarnessError;

/// Default pair-match threshold.
pub const DEFAULT_TAU: f64 = 0.25;

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_in_flight() -> usize {
    1
}

fn default_version() -> u32 {
    1
}

/// Which split to use: an inline spec or a saved manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitConfig {
    Manifest { manifest: PathBuf },
    Spec(SplitSpec),
}

/// Similarity-backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// `nli`, `embedding`, `judge`, or `exact` (offline stub).
    pub kind: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// NLI only; defaults to arithmetic.
    #[serde(default)]
    pub aggregation: Option<Aggregation>,
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
}

impl MetricConfig {
    pub fn exact() -> Self {
        MetricConfig {
            kind: "exact".into(),
            endpoint: None,
            model: None,
            aggregation: None,
            in_flight: 1,
        }
    }

    /// Build the configured backend. `exact` needs no endpoint; the rest do.
    pub fn build(&self) -> Result<Arc<dyn SimilarityMetric>, HarnessError> {
        let endpoint = || {
            self.endpoint.clone().ok_or_else(|| {
                HarnessError::Config(format!("metric kind {:?} requires an endpoint", self.kind))
            })
        };
        let model = self.model.clone().unwrap_or_default();
        match self.kind.as_str() {
            "exact" => Ok(Arc::new(ExactMatchMetric)),
            "nli" => Ok(Arc::new(
                NliBackend::new(
                    &endpoint()?,
                    &model,
                    self.aggregation.unwrap_or(Aggregation::Arithmetic),
                )
                .with_in_flight(self.in_flight),
            )),
            "embedding" => Ok(Arc::new(
                EmbeddingBackend::new(&endpoint()?, &model).with_in_flight(self.in_flight),
            )),
            "judge" => {
                let client: Arc<dyn ChatClient> =
                    Arc::new(HttpChatClient::new(&endpoint()?, api_key_from_env()));
                Ok(Arc::new(
                    LlmJudgeBackend::new(client, &model).with_in_flight(self.in_flight),
                ))
            }
            other => Err(HarnessError::Config(format!(
                "unknown metric kind {other:?}"
            ))),
        }
    }
}

/// API key for hosted endpoints; the only environment variable the tool
/// reads.
pub fn api_key_from_env() -> Option<String> {
    std::env::var("SCIDEF_API_KEY")
        .ok()
        .filter(|k| !k.is_empty())
}

/// One experiment cell: a model–strategy–chunking combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub strategy: StrategyKind,
    pub chunking: ChunkStrategy,
    /// Optimized-program file; overrides strategy, chunking, and demos.
    #[serde(default)]
    pub program: Option<PathBuf>,
    /// Demo count for manual few-shot cells (without a program).
    #[serde(default)]
    pub k_demos: Option<usize>,
}

impl CellConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}/{}/{}",
                self.model,
                self.strategy.as_str(),
                self.chunking.as_str()
            )
        })
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub corpus_dir: PathBuf,
    pub defextra: PathBuf,
    pub cache_dir: PathBuf,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
    pub split: SplitConfig,
    pub metric: MetricConfig,
    pub cells: Vec<CellConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(content: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(content).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let content = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&content)
    }

    /// Structural checks plus path resolution; all fatal.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != 1 {
            return Err(HarnessError::Config(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(HarnessError::Config(format!(
                "tau {} outside [0, 1]",
                self.tau
            )));
        }
        if self.cells.is_empty() {
            return Err(HarnessError::Config("no cells configured".into()));
        }
        if self.in_flight == 0 {
            return Err(HarnessError::Config("in_flight must be at least 1".into()));
        }
        if let SplitConfig::Spec(spec) = &self.split {
            spec.validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        for (what, path) in self.required_paths() {
            if !path.exists() {
                return Err(HarnessError::Config(format!(
                    "{what} path {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    fn required_paths(&self) -> Vec<(&'static str, PathBuf)> {
        let mut paths = vec![
            ("corpus_dir", self.corpus_dir.clone()),
            ("defextra", self.defextra.clone()),
        ];
        if let SplitConfig::Manifest { manifest } = &self.split {
            paths.push(("split manifest", manifest.clone()));
        }
        for cell in &self.cells {
            if let Some(program) = &cell.program {
                paths.push(("program", program.clone()));
            }
        }
        paths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml(dir: &Path) -> String {
        format!(
            r#"
corpus_dir = "{0}"
defextra = "{0}/defextra.jsonl"
cache_dir = "{0}/cache"
tau = 0.25

[split]
train_fraction = 0.6
dev_fraction = 0.2
test_fraction = 0.2
seed = 7

[metric]
kind = "exact"

[[cells]]
model = "mock-model"
strategy = "onestep"
chunking = "paragraph"
"#,
            dir.display()
        )
    }

    #[test]
    fn parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("defextra.jsonl"), "x").unwrap();
        let config = ExperimentConfig::from_toml_str(&minimal_toml(dir.path())).unwrap();
        assert_eq!(config.tau, 0.25);
        assert_eq!(
            config.cells[0].display_name(),
            "mock-model/onestep/paragraph"
        );
        assert!(matches!(config.split, SplitConfig::Spec(_)));
    }

    #[test]
    fn missing_path_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        // defextra.jsonl not created
        let err = ExperimentConfig::from_toml_str(&minimal_toml(dir.path())).unwrap_err();
        assert!(err.to_string().contains("defextra"));
    }

    #[test]
    fn tau_out_of_range_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("defextra.jsonl"), "x").unwrap();
        let toml = minimal_toml(dir.path()).replace("tau = 0.25", "tau = 1.5");
        assert!(ExperimentConfig::from_toml_str(&toml).is_err());
    }

    #[test]
    fn manifest_split_variant_parses() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("defextra.jsonl"), "x").unwrap();
        std::fs::write(dir.path().join("split.jsonl"), "x").unwrap();
        let toml = minimal_toml(dir.path()).replace(
            "[split]\ntrain_fraction = 0.6\ndev_fraction = 0.2\ntest_fraction = 0.2\nseed = 7",
            &format!(
                "[split]\nmanifest = \"{}/split.jsonl\"",
                dir.path().display()
            ),
        );
        let config = ExperimentConfig::from_toml_str(&toml).unwrap();
        assert!(matches!(config.split, SplitConfig::Manifest { .. }));
    }
}
