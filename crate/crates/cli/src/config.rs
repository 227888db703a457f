//! JSON run configuration. Every field is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use submatch_core::encoder::EncoderConfig;
use submatch_core::sampler::SamplerConfig;
use submatch_core::synthetic::SyntheticConfig;
use submatch_core::trainer::TrainConfig;
use submatch_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Directory of a TUDataset corpus; the synthetic generator is used when
    /// absent.
    pub tu_dir: Option<PathBuf>,
    pub tu_name: Option<String>,
    /// Connected components smaller than this are dropped on load.
    pub min_component_size: usize,
    pub synthetic: SyntheticConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            tu_dir: None,
            tu_name: None,
            min_component_size: 3,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub val_pairs: usize,
    pub test_pairs: usize,
    pub chain_count: usize,
    pub chain_length: usize,
    pub hit_k: Vec<usize>,
    pub histogram_bins: usize,
    /// Neighborhood radius for `index`; the encoder depth when absent.
    pub index_k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            val_pairs: 256,
            test_pairs: 512,
            chain_count: 50,
            chain_length: 5,
            hit_k: vec![1, 3],
            histogram_bins: 20,
            index_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Output of `sample`, input of `train`, `rank` and `eval`.
    pub data_dir: PathBuf,
    /// Output of `train`, input of the scoring commands.
    pub model_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data_dir: PathBuf::from("run/data"),
            model_dir: PathBuf::from("run/model"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub sampler: SamplerConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
    /// Master seed; copied into every section's own seed field.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            sampler: SamplerConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
            seed: 0,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub timeout_ms: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                Self::from_json(&text, p)
            }
        }
    }

    /// Applies overrides, propagates the master seed and validates.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.timeout_ms {
            self.sampler.oracle_timeout_ms = t;
        }
        self.dataset.synthetic.seed = self.seed;
        self.sampler.seed = self.seed;
        self.train.seed = self.seed;
        self.sampler.validate()?;
        self.encoder.validate()?;
        self.train.validate()?;
        self.dataset.synthetic.validate()?;
        if self.dataset.tu_dir.is_some() != self.dataset.tu_name.is_some() {
            return Err(Error::Argument("dataset.tu_dir and dataset.tu_name go together".into()));
        }
        if self.eval.chain_length == 0 || self.eval.hit_k.contains(&0) {
            return Err(Error::Argument("chain_length and every hit_k must be positive".into()));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}", Path::new("x")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.encoder.num_layers, 6);
        assert_eq!(c.sampler.data_walk_range, [10, 30]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"trian": {}}"#, Path::new("x")).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"lr": 0.1, "momentum": 1}}"#, Path::new("x")).is_err());
    }

    #[test]
    fn seed_propagates() {
        let c = RunConfig::from_json(r#"{"seed": 4, "train": {"seed": 9}}"#, Path::new("x"))
            .unwrap()
            .resolve(&Overrides {
                seed: Some(7),
                timeout_ms: Some(50),
            })
            .unwrap();
        assert_eq!((c.seed, c.train.seed, c.sampler.seed, c.dataset.synthetic.seed), (7, 7, 7, 7));
        assert_eq!(c.sampler.oracle_timeout_ms, 50);
    }

    #[test]
    fn invalid_sections_fail_resolution() {
        let c = RunConfig::from_json(r#"{"encoder": {"hidden_dim": 10}}"#, Path::new("x")).unwrap();
        assert!(c.resolve(&Overrides::default()).is_err());
    }
}
