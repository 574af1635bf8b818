use fieno::evalbench::BenchError;
use fieno::model::ModelError;
use fieno::trainer::TrainError;
use fieno::truth::TruthError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or input files (exit 2).
    #[error("{0}")]
    Validation(String),
    /// Divergence, failed fits, singular systems (exit 3).
    #[error("{0}")]
    Numerical(String),
    /// Could not write outputs (exit 1).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn input(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    pub fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<TruthError> for CliError {
    fn from(e: TruthError) -> Self {
        match e {
            TruthError::Mfs(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Diff(_) => CliError::Numerical(e.to_string()),
            ModelError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Numerical(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Io(_) => CliError::Io(e.to_string()),
            TrainError::Config(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Singular => CliError::Numerical(e.to_string()),
            BenchError::Truth(t) => t.into(),
            BenchError::Train(t) => t.into(),
            BenchError::Model(m) => m.into(),
            BenchError::Io(_) | BenchError::Csv(_) => CliError::Io(e.to_string()),
            BenchError::Config(_) | BenchError::NeumannBaseline => CliError::Validation(e.to_string()),
        }
    }
}
