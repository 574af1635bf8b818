//! Experiment grid, result store, tables, plots and a thin-plate-spline
//! sanity baseline.

mod baseline;
mod plot;
mod table;

pub use baseline::{baseline_rbf, ThinPlateSpline};
pub use plot::{emit_plots, plot_file_name, PlotKind};
pub use table::{emit_table, format_cell, Table};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundaryId;
use crate::model::{FienoModel, ModelConfig, ModelError};
use crate::rng::derive_seed;
use crate::trainer::{evaluate, train, TrainConfig, TrainError};
use crate::truth::{build_dataset, BcKind, Dataset, Equation, PdeSpec, TruthError, TruthMode};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid grid: {0}")]
    Config(String),
    #[error("baseline needs Dirichlet data")]
    NeumannBaseline,
    #[error("singular interpolation system even after regularisation")]
    Singular,
    #[error(transparent)]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a test boundary is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    /// Frozen model trained on the training boundary, scored on `n` fresh
    /// interior points of the test boundary.
    #[serde(rename = "zero-shot")]
    ZeroShot,
    /// Fine-tuned with `n` supervised points on the test boundary, scored on
    /// a disjoint held-out set.
    #[serde(rename = "few-shot")]
    FewShot,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::ZeroShot => "zero-shot",
            Protocol::FewShot => "few-shot",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-shot" | "zero_shot" => Ok(Protocol::ZeroShot),
            "few-shot" | "few_shot" => Ok(Protocol::FewShot),
            _ => Err(format!("unknown protocol {s:?} (expected zero-shot or few-shot)")),
        }
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub equation: Equation,
    pub bc_kind: BcKind,
    pub boundary_id: BoundaryId,
    pub n_interior: usize,
    pub seed: u64,
    pub protocol: Protocol,
    pub truth_mode: TruthMode,
    pub mse: f64,
    pub wall_time_s: f64,
}

pub const RESULTS_HEADER: [&str; 9] = [
    "equation",
    "bc_kind",
    "boundary_id",
    "n_interior",
    "seed",
    "protocol",
    "truth_mode",
    "mse",
    "wall_time_s",
];

/// Writes `records` to `path`, replacing any existing file.
pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record(RESULTS_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends `records`, writing the header only when the file is new or empty.
pub fn append_results(path: &Path, records: &[ResultRecord]) -> Result<(), BenchError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    if fresh && records.is_empty() {
        w.write_record(RESULTS_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// The experiment slice to run. Every model starts from one trained on
/// [`BoundaryId::BTrain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub equations: Vec<Equation>,
    pub bc_kinds: Vec<BcKind>,
    pub boundaries: Vec<BoundaryId>,
    pub n_interior: Vec<usize>,
    pub protocols: Vec<Protocol>,
    /// Truth mode for every cell; `None` picks the per-equation default.
    pub truth_mode: Option<TruthMode>,
    /// Base training on the training boundary.
    pub train: TrainConfig,
    /// Architecture; `bc_kind` and seeds are set per cell.
    pub model: ModelConfig,
    pub finetune_steps: usize,
    pub holdout_points: usize,
    pub workers: usize,
    /// Store measured wall time; off by default so reruns give identical CSVs.
    pub record_wall_time: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            equations: vec![Equation::Laplace],
            bc_kinds: vec![BcKind::Dirichlet],
            boundaries: BoundaryId::TEST.to_vec(),
            n_interior: vec![50, 100, 200],
            protocols: vec![Protocol::FewShot],
            truth_mode: None,
            train: TrainConfig::default(),
            model: ModelConfig::new(BcKind::Dirichlet),
            finetune_steps: 500,
            holdout_points: 500,
            workers: 1,
            record_wall_time: false,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let empty = [
            ("equations", self.equations.is_empty()),
            ("bc_kinds", self.bc_kinds.is_empty()),
            ("boundaries", self.boundaries.is_empty()),
            ("n_interior", self.n_interior.is_empty()),
            ("protocols", self.protocols.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(BenchError::Config(format!("{name} must not be empty")));
        }
        if self.n_interior.contains(&0) || self.holdout_points == 0 {
            return Err(BenchError::Config("interior counts must be positive".into()));
        }
        self.train.validate()?;
        self.model.validate()?;
        if self.model.ian.m != self.train.m_boundary {
            return Err(BenchError::Config(format!(
                "model.ian.m ({}) must equal train.m_boundary ({})",
                self.model.ian.m, self.train.m_boundary
            )));
        }
        for &eq in &self.equations {
            for &bc in &self.bc_kinds {
                self.pde(eq, bc).validate()?;
            }
        }
        Ok(())
    }

    fn pde(&self, equation: Equation, bc_kind: BcKind) -> PdeSpec {
        match self.truth_mode {
            Some(mode) => PdeSpec::new(equation, bc_kind, mode),
            None => PdeSpec::with_default_truth(equation, bc_kind),
        }
    }

    /// Largest interior count any cell needs on one boundary.
    fn support_size(&self) -> usize {
        self.n_interior.iter().copied().max().unwrap_or(0).max(self.train.n_interior)
    }
}

/// A cell whose training failed; the rest of the grid still runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub equation: Equation,
    pub bc_kind: BcKind,
    pub boundary_id: Option<BoundaryId>,
    pub n_interior: Option<usize>,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridReport {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<CellFailure>,
}

/// Base models keyed by everything that determines them, so several grids
/// can share training runs.
#[derive(Debug, Default)]
pub struct BaseModels(Mutex<BTreeMap<String, FienoModel>>);

impl BaseModels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct BaseSpec {
    equation: Equation,
    bc_kind: BcKind,
    seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    base: BaseSpec,
    boundary: BoundaryId,
    n: usize,
    protocol: Protocol,
}

fn base_key(cfg: &GridConfig, b: &BaseSpec) -> String {
    let pde = cfg.pde(b.equation, b.bc_kind);
    serde_json::json!({
        "pde": pde,
        "seed": b.seed,
        "support": cfg.support_size(),
        "train": cfg.train,
        "model": cfg.model,
    })
    .to_string()
}

fn support_dataset(cfg: &GridConfig, b: &BaseSpec, boundary: BoundaryId) -> Result<Dataset, BenchError> {
    let pde = cfg.pde(b.equation, b.bc_kind);
    let seed = derive_seed(b.seed, &format!("support/{boundary}"));
    Ok(build_dataset(boundary, &pde, cfg.train.dense_boundary, cfg.support_size(), seed)?)
}

fn holdout_dataset(cfg: &GridConfig, b: &BaseSpec, boundary: BoundaryId) -> Result<Dataset, BenchError> {
    let pde = cfg.pde(b.equation, b.bc_kind);
    let seed = derive_seed(b.seed, &format!("holdout/{boundary}"));
    Ok(build_dataset(boundary, &pde, cfg.train.m_boundary, cfg.holdout_points, seed)?)
}

fn fresh_model(cfg: &GridConfig, b: &BaseSpec) -> Result<FienoModel, BenchError> {
    let mut mc = cfg.model.clone();
    mc.bc_kind = b.bc_kind;
    mc.init_seed = b.seed;
    mc.kan.elm_seed = b.seed;
    Ok(FienoModel::new(mc)?)
}

fn train_base(cfg: &GridConfig, b: &BaseSpec) -> Result<FienoModel, BenchError> {
    let data = support_dataset(cfg, b, BoundaryId::BTrain)?;
    let tc = TrainConfig {
        seed: derive_seed(b.seed, "base-train"),
        ..cfg.train.clone()
    };
    Ok(train(fresh_model(cfg, b)?, &data, &tc, None)?.model)
}

fn run_cell(cfg: &GridConfig, cell: &Cell, base: &FienoModel) -> Result<f64, BenchError> {
    let b = &cell.base;
    match cell.protocol {
        Protocol::ZeroShot => {
            let pde = cfg.pde(b.equation, b.bc_kind);
            let seed = derive_seed(b.seed, &format!("zero-shot/{}/{}", cell.boundary, cell.n));
            let scoring = build_dataset(cell.boundary, &pde, cfg.train.m_boundary, cell.n, seed)?;
            Ok(evaluate(base, &scoring)?)
        }
        Protocol::FewShot => {
            let holdout = holdout_dataset(cfg, b, cell.boundary)?;
            if cell.boundary == BoundaryId::BTrain && cell.n == cfg.train.n_interior {
                return Ok(evaluate(base, &holdout)?);
            }
            let support = support_dataset(cfg, b, cell.boundary)?;
            let (start, steps) = if cell.boundary == BoundaryId::BTrain {
                (fresh_model(cfg, b)?, cfg.train.steps)
            } else {
                (base.clone(), cfg.finetune_steps)
            };
            let tc = TrainConfig {
                steps,
                n_interior: cell.n,
                seed: derive_seed(b.seed, &format!("finetune/{}/{}", cell.boundary, cell.n)),
                ..cfg.train.clone()
            };
            let model = train(start, &support, &tc, None)?.model;
            Ok(evaluate(&model, &holdout)?)
        }
    }
}

/// Runs every (equation × bc × boundary × n × protocol × seed) cell.
///
/// Records come back in grid order regardless of scheduling. On the training
/// boundary, few-shot means training from scratch with `n` points for the
/// full step budget.
pub fn run_grid(cfg: &GridConfig, seeds: &[u64]) -> Result<GridReport, BenchError> {
    run_grid_with(cfg, seeds, &BaseModels::new())
}

/// [`run_grid`] reusing (and filling) a cache of base models.
pub fn run_grid_with(cfg: &GridConfig, seeds: &[u64], cache: &BaseModels) -> Result<GridReport, BenchError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(BenchError::Config("at least one seed is required".into()));
    }
    let mut bases = Vec::new();
    for &equation in &cfg.equations {
        for &bc_kind in &cfg.bc_kinds {
            for &seed in seeds {
                bases.push(BaseSpec { equation, bc_kind, seed });
            }
        }
    }
    let mut cells = Vec::new();
    for b in &bases {
        for &boundary in &cfg.boundaries {
            for &n in &cfg.n_interior {
                for &protocol in &cfg.protocols {
                    cells.push(Cell {
                        base: *b,
                        boundary,
                        n,
                        protocol,
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;

    let base_models: Vec<Result<FienoModel, String>> = pool.install(|| {
        bases
            .par_iter()
            .map(|b| {
                let key = base_key(cfg, b);
                if let Some(m) = cache.0.lock().expect("cache lock").get(&key) {
                    return Ok(m.clone());
                }
                let model = train_base(cfg, b).map_err(|e| e.to_string())?;
                cache.0.lock().expect("cache lock").insert(key, model.clone());
                Ok(model)
            })
            .collect()
    });

    let per_base = cfg.boundaries.len() * cfg.n_interior.len() * cfg.protocols.len();
    let outcomes: Vec<Result<ResultRecord, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                let b = &cell.base;
                let fail = |error: String| CellFailure {
                    equation: b.equation,
                    bc_kind: b.bc_kind,
                    boundary_id: Some(cell.boundary),
                    n_interior: Some(cell.n),
                    seed: b.seed,
                    error,
                };
                let base = base_models[i / per_base]
                    .as_ref()
                    .map_err(|e| fail(format!("base training failed: {e}")))?;
                let start = Instant::now();
                let mse = run_cell(cfg, cell, base).map_err(|e| fail(e.to_string()))?;
                let wall = if cfg.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                Ok(ResultRecord {
                    equation: b.equation,
                    bc_kind: b.bc_kind,
                    boundary_id: cell.boundary,
                    n_interior: cell.n,
                    seed: b.seed,
                    protocol: cell.protocol,
                    truth_mode: cfg.pde(b.equation, b.bc_kind).truth_mode,
                    mse,
                    wall_time_s: wall,
                })
            })
            .collect()
    });

    let mut report = GridReport::default();
    for o in outcomes {
        match o {
            Ok(r) => report.records.push(r),
            Err(f) => {
                log::warn!("cell failed: {f:?}");
                report.failures.push(f);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
