use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::GeneratorConfig;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::sampling::SmoteConfig;

pub const SEED_ENV: &str = "SUBCREDIT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProvider {
    /// Deterministic feature-hashing embeddings of the descriptions.
    Hash,
    /// Vectors read from an EMB1 file.
    File,
    /// No embedding block.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub provider: EmbeddingProvider,
    /// Width of hash embeddings; file embeddings take the file's width.
    pub dim: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
    /// Fill records missing from the file with hash embeddings.
    pub hash_fallback: bool,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            provider: EmbeddingProvider::Hash,
            dim: 32,
            seed: 0,
            path: None,
            hash_fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSettings {
    pub smote: bool,
    pub k_neighbors: usize,
    pub target_ratio: f64,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        let s = SmoteConfig::default();
        SamplingSettings {
            smote: false,
            k_neighbors: s.k_neighbors,
            target_ratio: s.target_ratio,
        }
    }
}

impl SamplingSettings {
    pub fn smote_config(&self, seed: u64) -> SmoteConfig {
        SmoteConfig {
            k_neighbors: self.k_neighbors,
            target_ratio: self.target_ratio,
            seed,
            nominal_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub test_fraction: f64,
    pub stratified: bool,
    pub k_folds: usize,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings {
            test_fraction: 0.3,
            stratified: true,
            k_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub n_trials: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { n_trials: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSettings {
    /// Test rows explained, highest scores first.
    pub rows: usize,
    pub background: usize,
    /// Permutations per row; 0 computes exact values.
    pub n_samples: usize,
}

impl Default for AttributionSettings {
    fn default() -> Self {
        AttributionSettings {
            rows: 20,
            background: 100,
            n_samples: 2000,
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub description: String,
    pub output_dir: PathBuf,
    /// Directory holding `records.csv`; records are generated when unset.
    pub data_dir: Option<PathBuf>,
    /// Decision threshold for confusion counts.
    pub threshold: f64,
    pub generator: GeneratorConfig,
    pub embedding: EmbeddingSettings,
    pub sampling: SamplingSettings,
    pub split: SplitSettings,
    pub model: ModelSpec,
    pub search: SearchSettings,
    pub attribution: AttributionSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            description: String::new(),
            output_dir: PathBuf::from("runs/run"),
            data_dir: None,
            threshold: 0.5,
            generator: GeneratorConfig::default(),
            embedding: EmbeddingSettings::default(),
            sampling: SamplingSettings::default(),
            split: SplitSettings::default(),
            model: ModelSpec::default(),
            search: SearchSettings::default(),
            attribution: AttributionSettings::default(),
        }
    }
}

/// Parses `text` as a TOML literal, falling back to a plain string.
fn parse_literal(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Applies `key=value` with a dotted key path, creating tables as needed.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {assignment:?} is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("non-empty");
    let mut table = root;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    table.insert(last.to_string(), parse_literal(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, then applies overrides and the seed variable.
    pub fn from_toml_with(text: &str, overrides: &[String], env_seed: Option<&str>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let env = std::env::var(SEED_ENV).ok();
        Self::from_toml_with(&text, overrides, env.as_deref())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold <= 1.0) {
            return Err(Error::config("threshold must lie in [0, 1]"));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::config("split.test_fraction must lie in (0, 1)"));
        }
        if self.embedding.provider == EmbeddingProvider::Hash && self.embedding.dim == 0 {
            return Err(Error::config("embedding.dim must be positive for hash embeddings"));
        }
        if self.embedding.provider == EmbeddingProvider::File && self.embedding.path.is_none() {
            return Err(Error::config("embedding.path is required for file embeddings"));
        }
        self.sampling.smote_config(0).validate(0)?;
        self.model.validate()
    }

    /// Generator settings with the experiment seed applied.
    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed,
            ..self.generator.clone()
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        self.model.clone().with_seed(crate::rng::derive_seed(self.seed, "model"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GbtConfig, ModelKind};

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ExperimentConfig::from_toml_with("", &[], None).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn overrides_and_env_seed() {
        let text = "seed = 3\n[model]\nkind = \"gbt\"\nmax_depth = 4\n";
        let cfg = ExperimentConfig::from_toml_with(
            text,
            &[
                "model.max_depth=7".into(),
                "generator.n_records=5000".into(),
                "description=quick run".into(),
                "embedding.provider=\"none\"".into(),
            ],
            Some("11"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.generator.n_records, 5000);
        assert_eq!(cfg.description, "quick run");
        assert_eq!(cfg.embedding.provider, EmbeddingProvider::None);
        let ModelSpec::Gbt(GbtConfig { max_depth, .. }) = cfg.model else { panic!() };
        assert_eq!(max_depth, 7);
    }

    #[test]
    fn bad_inputs() {
        assert!(ExperimentConfig::from_toml_with("bogus = 1", &[], None).is_err());
        assert!(ExperimentConfig::from_toml_with("", &["nokey".into()], None).is_err());
        assert!(ExperimentConfig::from_toml_with("", &[], Some("abc")).is_err());
        assert!(ExperimentConfig::from_toml_with("threshold = 2.0", &[], None).is_err());
        let e = ExperimentConfig::from_toml_with("[embedding]\nprovider = \"file\"", &[], None).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn toml_echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.model = ModelSpec::Gbt(GbtConfig::default());
        let back = ExperimentConfig::from_toml_with(&cfg.to_toml().unwrap(), &[], None).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.model.kind(), ModelKind::Gbt);
    }
}
