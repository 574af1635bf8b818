use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fieno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieno"))
        .args(args)
        .env_remove("FIENO_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = r#"{
  "equation": "laplace",
  "bc_kind": "dirichlet",
  "seed": 3,
  "seeds": [1],
  "holdout_points": 40,
  "train": {"steps": 20, "m_boundary": 24, "n_interior": 20, "dense_boundary": 120, "eval_every": 10},
  "ian": {"m": 24},
  "grid": {"n_interior": [50, 100, 200], "finetune_steps": 5}
}"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_train_eval_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let plots = dir.path().join("plots");

    let o = fieno(&["gen-data", "--config", &cfg, "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(data.join("train.json").exists() && data.join("holdout.json").exists());

    let o = fieno(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&run)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let loss = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,train_mse,holdout_mse\n"));
    assert_eq!(loss.lines().count(), 21);

    let ck = run.join("checkpoint.json");
    let o = fieno(&["eval", "--checkpoint", s(&ck), "--data", s(&data), "--protocol", "zero-shot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mse: f64 = stdout(&o).trim().strip_prefix("mse ").unwrap().parse().unwrap();
    assert!(mse.is_finite() && mse >= 0.0);
    let o = fieno(&["eval", "--checkpoint", s(&ck), "--data", s(&data)]);
    assert!(o.status.success());
    let results = fs::read_to_string(run.join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 3, "one header and two appended rows");
    assert!(lines[1].contains(",3,zero-shot,") && lines[2].contains(",3,few-shot,"));

    let o = fieno(&["plot", "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svgs = fs::read_dir(&plots).unwrap().count();
    assert_eq!(svgs, 3);
}

#[test]
fn training_is_reproducible_to_the_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let data = dir.path().join("data");
    assert!(fieno(&["gen-data", "--config", &cfg, "--out", s(&data)]).status.success());
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = fieno(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        bytes.push(fs::read(out.join("checkpoint.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn grid_then_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("grid");
    let o = fieno(&["grid", "--config", &cfg, "--out", s(&out), "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = out.join("results.csv");
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 1 + 4 * 3);

    let o = fieno(&["table", "--results", s(&results), "--equation", "laplace", "--bc", "dirichlet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with('B')).collect();
    assert_eq!(rows.len(), 4, "{text}");
    for row in rows {
        let cells: Vec<f64> = row.split_whitespace().skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 3, "{row}");
    }

    let o = fieno(&["table", "--results", s(&results), "--equation", "laplace", "--bc", "dirichlet", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("boundary,"));
}

#[test]
fn verify_rff_suite_passes() {
    let o = fieno(&["verify", "--suite", "rff"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("[PASS]"));
    assert!(!stdout(&o).contains("[FAIL]"));
}

#[test]
fn missing_required_field_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"bc_kind": "dirichlet"}"#);
    let o = fieno(&["gen-data", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("equation"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"equation": "laplace", "bc_kind": "dirichlet", "kan": {"elm_layerz": [8]}}"#,
    );
    let o = fieno(&["gen-data", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kan.elm_layerz"), "{}", stderr(&o));
}

#[test]
fn mismatched_boundary_resolution_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"equation": "laplace", "bc_kind": "dirichlet", "train": {"m_boundary": 30}, "ian": {"m": 24}}"#,
    );
    let o = fieno(&["gen-data", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn seed_can_be_overridden_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let gen = |seed: Option<&str>, out: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fieno"));
        c.args(["gen-data", "--config", &cfg, "--out", s(out)]);
        match seed {
            Some(v) => c.env("FIENO_SEED", v),
            None => c.env_remove("FIENO_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        fs::read(out.join("train.json")).unwrap()
    };
    let base = gen(None, &dir.path().join("a"));
    let same = gen(Some("3"), &dir.path().join("b"));
    let other = gen(Some("4"), &dir.path().join("c"));
    assert_eq!(base, same);
    assert_ne!(base, other);

    let mut c = Command::new(env!("CARGO_BIN_EXE_fieno"));
    c.args(["gen-data", "--config", &cfg, "--out", s(dir.path())]).env("FIENO_SEED", "nope");
    assert_eq!(c.output().unwrap().status.code(), Some(2));
}

#[test]
fn missing_checkpoint_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("nope.json");
    let o = fieno(&["eval", "--checkpoint", s(&ck), "--data", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
