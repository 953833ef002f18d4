//! JSON configuration files. Relative paths inside a config resolve against
//! the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use pel_core::data::{
    gen_nsphere, load_iris, normalize, Dataset, NSphereConfig, NormalizeMode, IRIS_PATH_ENV,
};
use pel_core::encodings::{EncodingConfig, EncodingKind, EncodingSpec};
use pel_core::photonic::ArchitectureConfig;
use pel_core::training::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Iris from a local CSV; falls back to `$PEL_IRIS_PATH`. Features are
    /// min-max normalized to `[-1, 1]`.
    Iris {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    /// Synthetic radius task, used as generated (already in `[-1, 1]`).
    Nsphere(NSphereConfig),
}

impl DatasetConfig {
    pub fn load(&self, base: &Path) -> CliResult<Dataset> {
        match self {
            DatasetConfig::Iris { path } => {
                let path = match path {
                    Some(p) => base.join(p),
                    None => std::env::var_os(IRIS_PATH_ENV)
                        .map(PathBuf::from)
                        .ok_or_else(|| {
                            CliError::Config(format!(
                                "dataset.path: not set and ${IRIS_PATH_ENV} is unset"
                            ))
                        })?,
                };
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "dataset.path: {} does not exist",
                        path.display()
                    )));
                }
                let raw = load_iris(&path)
                    .map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
                Ok(normalize(&raw, NormalizeMode::MinmaxSymmetric)?)
            }
            DatasetConfig::Nsphere(cfg) => {
                Ok(gen_nsphere(cfg).map_err(|e| CliError::from(e).context("dataset"))?)
            }
        }
    }

    /// Choices the outputs should carry as labels.
    pub fn artifact_choices(&self) -> Vec<String> {
        match self {
            DatasetConfig::Iris { .. } => {
                vec!["iris features min-max normalized to [-1, 1]".into()]
            }
            DatasetConfig::Nsphere(cfg) => vec![
                "n-sphere samples uniform on the cube [-1, 1]^n".into(),
                format!(
                    "n-sphere n_dims = {}, n_samples = {}, radius threshold = {}{}",
                    cfg.n_dims,
                    cfg.n_samples,
                    cfg.threshold(),
                    if cfg.radius_threshold.is_none() {
                        " (median radius, balanced classes)"
                    } else {
                        ""
                    }
                ),
            ],
        }
    }
}

fn default_seeds() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// An encoding-comparison study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub encodings: Vec<EncodingConfig>,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Checks that need the data: every encoding must fit it, and an
    /// independent baseline must be present.
    pub fn build_specs(&self, data: &Dataset) -> CliResult<Vec<EncodingSpec>> {
        if self.n_seeds == 0 {
            return Err(CliError::Config("n_seeds: must be >= 1".into()));
        }
        if self.encodings.is_empty() {
            return Err(CliError::Config(
                "encodings: must list at least one encoding".into(),
            ));
        }
        self.architecture
            .validate()
            .map_err(|e| CliError::Config(format!("architecture: {e}")))?;
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))?;
        let specs = self
            .encodings
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.build(&data.feature_ranges)
                    .map_err(|err| CliError::Config(format!("encodings[{i}]: {err}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        if !specs.iter().any(|s| s.kind == EncodingKind::Independent) {
            return Err(CliError::Config(
                "encodings: include an \"independent\" baseline to compare against".into(),
            ));
        }
        Ok(specs)
    }
}

/// Which network an importance report is computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    /// A single identity layer read out as a field.
    Identity,
    /// A freshly sampled network.
    Fresh {
        #[serde(default)]
        architecture: ArchitectureConfig,
        #[serde(default)]
        seed: u64,
    },
    /// Sampled, then trained on the training split for `seed`.
    Trained {
        #[serde(default)]
        architecture: ArchitectureConfig,
        #[serde(default)]
        train: TrainConfig,
        #[serde(default)]
        seed: u64,
    },
    /// A model saved as JSON.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceConfig {
    pub dataset: DatasetConfig,
    pub encoding: EncodingConfig,
    pub model: ModelSource,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// A config file with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

/// Read and parse a JSON config; errors name the offending field path.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<Loaded<T>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse_config(&text).map_err(|e| e.context(&path.display().to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_names_the_field_path() {
        let text = r#"{"dataset": {"type": "nsphere"}, "encodings": [{"kind": "linear", "pairing": [[0, "x"]]}]}"#;
        match parse_config::<ExperimentConfig>(text) {
            Err(CliError::Config(msg)) => {
                assert!(msg.starts_with("encodings[0].pairing[0]"), "{msg}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"dataset": {"type": "nsphere", "radius": 1}, "encodings": []}"#;
        assert!(matches!(
            parse_config::<ExperimentConfig>(text),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg: ExperimentConfig = parse_config(
            r#"{"dataset": {"type": "nsphere"}, "encodings": [{"kind": "independent", "singles": [0, 1, 2, 3]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.n_seeds, 10);
        assert_eq!(cfg.train, TrainConfig::default());
        let DatasetConfig::Nsphere(ns) = &cfg.dataset else {
            panic!("nsphere expected")
        };
        assert_eq!((ns.n_dims, ns.n_samples), (4, 1000));
    }

    #[test]
    fn baseline_is_required() {
        let cfg: ExperimentConfig = parse_config(
            r#"{"dataset": {"type": "nsphere"}, "encodings": [{"kind": "linear", "pairing": [[0, 1], [2, 3]]}]}"#,
        )
        .unwrap();
        let data = cfg.dataset.load(Path::new(".")).unwrap();
        assert!(matches!(cfg.build_specs(&data), Err(CliError::Config(_))));
    }
}
