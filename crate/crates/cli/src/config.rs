//! The single JSON experiment document.

use std::path::{Path, PathBuf};

use fieno::evalbench::{GridConfig, Protocol};
use fieno::geometry::BoundaryId;
use fieno::model::{IanConfig, KanConfig, ModelConfig};
use fieno::trainer::TrainConfig;
use fieno::truth::{BcKind, Equation, PdeSpec, TruthMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable overriding the top-level `seed`.
pub const SEED_ENV: &str = "FIENO_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub bc_kind: BcKind,
    #[serde(default)]
    pub truth_mode: Option<TruthMode>,
    /// Boundary used by `gen-data`.
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryId,
    /// Seed for data generation and single training runs.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seeds of the grid.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_holdout")]
    pub holdout_points: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub kan: KanConfig,
    #[serde(default)]
    pub ian: IanConfig,
    #[serde(default)]
    pub grid: GridSection,
}

/// Grid axes; equation and BC kind default to the top-level ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub equations: Option<Vec<Equation>>,
    pub bc_kinds: Option<Vec<BcKind>>,
    pub boundaries: Vec<BoundaryId>,
    pub n_interior: Vec<usize>,
    pub protocols: Vec<Protocol>,
    pub finetune_steps: usize,
    pub workers: usize,
    pub record_wall_time: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            equations: None,
            bc_kinds: None,
            boundaries: g.boundaries,
            n_interior: g.n_interior,
            protocols: g.protocols,
            finetune_steps: g.finetune_steps,
            workers: g.workers,
            record_wall_time: g.record_wall_time,
        }
    }
}

fn default_boundary() -> BoundaryId {
    BoundaryId::BTrain
}

fn default_seed() -> u64 {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_holdout() -> usize {
    500
}

impl ExperimentConfig {
    /// Parses, applies the seed override and validates.
    pub fn parse(text: &str, seed_override: Option<&str>) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Validation(format!("config error at `{path}`: {}", e.inner()))
        })?;
        if let Some(s) = seed_override {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let env = std::env::var(SEED_ENV).ok();
        Self::parse(&text, env.as_deref())
    }

    pub fn pde(&self) -> PdeSpec {
        match self.truth_mode {
            Some(mode) => PdeSpec::new(self.equation, self.bc_kind, mode),
            None => PdeSpec::with_default_truth(self.equation, self.bc_kind),
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            kan: self.kan.clone(),
            ian: self.ian.clone(),
            bc_kind: self.bc_kind,
            init_seed: self.seed,
        }
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            equations: self.grid.equations.clone().unwrap_or_else(|| vec![self.equation]),
            bc_kinds: self.grid.bc_kinds.clone().unwrap_or_else(|| vec![self.bc_kind]),
            boundaries: self.grid.boundaries.clone(),
            n_interior: self.grid.n_interior.clone(),
            protocols: self.grid.protocols.clone(),
            truth_mode: self.truth_mode,
            train: self.train.clone(),
            model: self.model(),
            finetune_steps: self.grid.finetune_steps,
            holdout_points: self.holdout_points,
            workers: self.grid.workers,
            record_wall_time: self.grid.record_wall_time,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.pde().validate()?;
        self.train.validate()?;
        self.model().validate()?;
        if self.ian.m != self.train.m_boundary {
            return Err(CliError::Validation(format!(
                "config error at `ian.m`: {} must equal train.m_boundary ({})",
                self.ian.m, self.train.m_boundary
            )));
        }
        if self.holdout_points == 0 {
            return Err(CliError::Validation("config error at `holdout_points`: must be positive".into()));
        }
        self.grid_config().validate()?;
        Ok(())
    }
}
