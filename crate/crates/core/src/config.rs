//! JSON run configuration: parsing with positioned errors, validation of
//! every block, and the embedded hypothesis report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::minimax::{GroundPipeline, NodalPipeline};
use crate::model::{validate_model, ModelParams, PerturbationParams, Problem, ValidationReport};
use crate::radial::GridSpec;
use crate::report::content_hash;
use crate::study::SweepConfig;
use crate::suite::SuiteConfig;

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelParams,
    pub perturbation: PerturbationParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub ground: GroundPipeline,
    /// Simplex block of the nodal pipelines.
    #[serde(default)]
    pub nodal: NodalPipeline,
    #[serde(default)]
    pub study: SweepConfig,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Config {
    /// Checks every block; the first violation is returned.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.perturbation.validate(&self.model)?;
        self.grid.build()?;
        self.flow.validate()?;
        self.ground.bump.validate()?;
        self.nodal.validate()?;
        self.study.validate()?;
        self.suite.validate()
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.model.clone(), self.perturbation, self.grid.build()?)
    }

    /// The configured problem with the perturbation switched off.
    pub fn unperturbed(&self) -> Result<Problem> {
        Ok(self.problem()?.unperturbed())
    }
}

/// A validated configuration with its hypothesis report and content hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub validation: ValidationReport,
    /// SHA-256 of the canonical JSON of `config`.
    pub hash: String,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let config: Config = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })?;
    config.validate()?;
    let grid = config.grid.build()?;
    let validation = validate_model(&config.model, &config.perturbation, &grid);
    let hash = content_hash(&config)?;
    Ok(LoadedConfig {
        config,
        validation,
        hash,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
