//! `fieno`: data generation, training, evaluation, grids, tables, plots and
//! self-checks for the FIE-NO pipeline.

mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fieno::evalbench::{
    append_results, emit_plots, emit_table, read_results, run_grid, write_results, Protocol, ResultRecord,
};
use fieno::geometry::BoundaryId;
use fieno::model::{FienoModel, ModelError};
use fieno::rng::derive_seed;
use fieno::trainer::{evaluate, train, write_loss_csv};
use fieno::truth::{build_dataset, BcKind, Dataset, Equation};
use fieno::verify::{run_suite, Suite};

use config::ExperimentConfig;
use error::CliError;

const TRAIN_FILE: &str = "train.json";
const HOLDOUT_FILE: &str = "holdout.json";
const CHECKPOINT_FILE: &str = "checkpoint.json";
const LOSS_FILE: &str = "loss.csv";
const RESULTS_FILE: &str = "results.csv";

#[derive(Parser)]
#[command(name = "fieno", version, about = "Fredholm integral equation neural operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    ZeroShot,
    FewShot,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::ZeroShot => Protocol::ZeroShot,
            ProtocolArg::FewShot => Protocol::FewShot,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Rff,
    Grad,
    Oracle,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Rff => Suite::Rff,
            SuiteArg::Grad => Suite::Grad,
            SuiteArg::Oracle => Suite::Oracle,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build training and held-out datasets.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes checkpoint.json and loss.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset file, or a directory holding train.json (and optionally
        /// holdout.json).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint and append the result to results.csv next to it.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file, or a directory holding holdout.json.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "few-shot")]
        protocol: ProtocolArg,
    },
    /// Run the experiment grid; writes results.csv and one table per slice.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print a boundary × sample-count table from results.csv.
    Table {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        equation: String,
        #[arg(long)]
        bc: String,
        #[arg(long, value_enum, default_value = "few-shot")]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value = "text")]
        format: TableFormat,
    },
    /// Write prediction, truth and error scatter plots.
    Plot {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in check suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::GenData { config, out } => gen_data(&ExperimentConfig::load(&config)?, &out),
        Command::Train { config, data, out } => train_cmd(&ExperimentConfig::load(&config)?, &data, &out),
        Command::Eval {
            checkpoint,
            data,
            protocol,
        } => eval_cmd(&checkpoint, &data, protocol.into()),
        Command::Grid { config, out, workers } => grid_cmd(&ExperimentConfig::load(&config)?, out, workers),
        Command::Table {
            results,
            equation,
            bc,
            protocol,
            format,
        } => table_cmd(&results, &equation, &bc, protocol.into(), format),
        Command::Plot { checkpoint, data, out } => plot_cmd(&checkpoint, &data, &out),
        Command::Verify { suite } => verify_cmd(suite.into()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn load_checkpoint(path: &Path) -> Result<FienoModel, CliError> {
    FienoModel::load(path).map_err(|e| match e {
        ModelError::Io(_) => CliError::input(path, e),
        e => e.into(),
    })
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| CliError::input(path, e))
}

/// Resolves `--data`: a file is used as is, a directory yields `default`.
fn data_file(path: &Path, default: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default)
    } else {
        path.to_path_buf()
    }
}

fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let pde = cfg.pde();
    let t = &cfg.train;
    let train_set = build_dataset(cfg.boundary, &pde, t.dense_boundary, t.n_interior, cfg.seed)?;
    let holdout = build_dataset(
        cfg.boundary,
        &pde,
        t.m_boundary,
        cfg.holdout_points,
        derive_seed(cfg.seed, "holdout"),
    )?;
    create_dir(out)?;
    for (name, d) in [(TRAIN_FILE, &train_set), (HOLDOUT_FILE, &holdout)] {
        let path = out.join(name);
        d.save(&path).map_err(|e| CliError::output(&path, e))?;
        println!("wrote {} ({} boundary, {} interior)", path.display(), d.boundary.len(), d.interior.len());
    }
    Ok(())
}

fn train_cmd(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let train_set = load_dataset(&data_file(data, TRAIN_FILE))?;
    if train_set.pde.bc_kind != cfg.bc_kind || train_set.pde.equation != cfg.equation {
        return Err(CliError::Validation(format!(
            "dataset is {}/{} but config asks for {}/{}",
            train_set.pde.equation, train_set.pde.bc_kind, cfg.equation, cfg.bc_kind
        )));
    }
    let holdout_path = data.join(HOLDOUT_FILE);
    let holdout = if data.is_dir() && holdout_path.exists() {
        Some(load_dataset(&holdout_path)?)
    } else {
        None
    };
    let tc = fieno::trainer::TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let outcome = train(FienoModel::new(cfg.model())?, &train_set, &tc, holdout.as_ref())?;
    create_dir(out)?;
    let ck = out.join(CHECKPOINT_FILE);
    outcome.model.save(&ck)?;
    let loss = out.join(LOSS_FILE);
    write_loss_csv(&outcome.history, &loss).map_err(|e| CliError::output(&loss, e))?;
    println!(
        "best training mse {:.6e} at step {} ({} steps run)",
        outcome.best_loss,
        outcome.best_step,
        outcome.history.len()
    );
    if let Some(h) = &holdout {
        println!("held-out mse {:.6e}", evaluate(&outcome.model, h)?);
    }
    println!("wrote {} and {}", ck.display(), loss.display());
    Ok(())
}

fn eval_cmd(checkpoint: &Path, data: &Path, protocol: Protocol) -> Result<(), CliError> {
    let model = load_checkpoint(checkpoint)?;
    let set = load_dataset(&data_file(data, HOLDOUT_FILE))?;
    if set.pde.bc_kind != model.bc_kind() {
        return Err(CliError::Validation(format!(
            "checkpoint was trained for {} data, dataset is {}",
            model.bc_kind(),
            set.pde.bc_kind
        )));
    }
    let boundary_id: BoundaryId = set.shape_id.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
    let mse = evaluate(&model, &set)?;
    let record = ResultRecord {
        equation: set.pde.equation,
        bc_kind: set.pde.bc_kind,
        boundary_id,
        n_interior: set.interior.len(),
        seed: model.config().init_seed,
        protocol,
        truth_mode: set.pde.truth_mode,
        mse,
        wall_time_s: 0.0,
    };
    let results = checkpoint.parent().unwrap_or(Path::new(".")).join(RESULTS_FILE);
    append_results(&results, &[record])?;
    println!("mse {mse:e}");
    Ok(())
}

fn grid_cmd(cfg: &ExperimentConfig, out: Option<PathBuf>, workers: Option<usize>) -> Result<(), CliError> {
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Validation("grid needs --out or output_dir in the config".into()))?;
    let mut grid = cfg.grid_config();
    if let Some(w) = workers {
        grid.workers = w;
    }
    let report = run_grid(&grid, &cfg.seeds)?;
    create_dir(&out)?;
    let results = out.join(RESULTS_FILE);
    write_results(&results, &report.records)?;
    for &eq in &grid.equations {
        for &bc in &grid.bc_kinds {
            for &protocol in &grid.protocols {
                let table = emit_table(&report.records, eq, bc, protocol);
                let stem = format!("table_{}_{bc}_{protocol}", eq.to_string().replace([':', '='], "_"));
                for (ext, body) in [("txt", table.render_text()), ("csv", table.render_csv())] {
                    let path = out.join(format!("{stem}.{ext}"));
                    fs::write(&path, body).map_err(|e| CliError::output(&path, e))?;
                }
                println!("{}", table.render_text());
            }
        }
    }
    println!("wrote {} ({} records)", results.display(), report.records.len());
    if report.failures.is_empty() {
        Ok(())
    } else {
        for f in &report.failures {
            eprintln!(
                "failed cell {}/{}/{}/n={}/seed={}: {}",
                f.equation,
                f.bc_kind,
                f.boundary_id.map(|b| b.to_string()).unwrap_or_default(),
                f.n_interior.map(|n| n.to_string()).unwrap_or_default(),
                f.seed,
                f.error
            );
        }
        Err(CliError::Numerical(format!("{} grid cells failed", report.failures.len())))
    }
}

fn table_cmd(results: &Path, equation: &str, bc: &str, protocol: Protocol, format: TableFormat) -> Result<(), CliError> {
    let equation: Equation = equation.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
    let bc: BcKind = bc.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
    let records = read_results(results).map_err(|e| CliError::input(results, e))?;
    let table = emit_table(&records, equation, bc, protocol);
    match format {
        TableFormat::Text => print!("{}", table.render_text()),
        TableFormat::Csv => print!("{}", table.render_csv()),
    }
    Ok(())
}

fn plot_cmd(checkpoint: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let model = load_checkpoint(checkpoint)?;
    let set = load_dataset(&data_file(data, HOLDOUT_FILE))?;
    for p in emit_plots(&model, &set, out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn verify_cmd(suite: Suite) -> Result<(), CliError> {
    let checks = run_suite(suite);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{failed} of {} checks failed", checks.len())))
    }
}
