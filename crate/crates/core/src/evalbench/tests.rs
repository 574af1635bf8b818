use super::*;
use crate::diffcore::Padding;
use crate::model::{IanConfig, KanConfig};
use crate::trainer::predict;
use crate::truth::AnalyticField;

fn tiny_grid() -> GridConfig {
    GridConfig {
        boundaries: vec![BoundaryId::B1],
        n_interior: vec![10],
        train: TrainConfig {
            steps: 20,
            lr: 1e-2,
            m_boundary: 16,
            n_interior: 20,
            dense_boundary: 64,
            seed: 0,
            early_stop_patience: 500,
            eval_every: 0,
        },
        model: ModelConfig {
            kan: KanConfig {
                elm_layers: vec![8, 8],
                mlp_layers: vec![8, 4],
                d: 4,
                elm_seed: 0,
                elm_fan_in_scaling: true,
            },
            ian: IanConfig {
                conv_channels: vec![2, 2],
                kernel_size: 3,
                fc_layers: vec![4, 4],
                d: 4,
                m: 16,
                padding: Padding::Valid,
            },
            bc_kind: BcKind::Dirichlet,
            init_seed: 0,
        },
        finetune_steps: 5,
        holdout_points: 30,
        ..GridConfig::default()
    }
}

fn record(boundary: BoundaryId, n: usize, seed: u64, mse: f64) -> ResultRecord {
    ResultRecord {
        equation: Equation::Laplace,
        bc_kind: BcKind::Dirichlet,
        boundary_id: boundary,
        n_interior: n,
        seed,
        protocol: Protocol::FewShot,
        truth_mode: TruthMode::Analytic,
        mse,
        wall_time_s: 0.0,
    }
}

#[test]
fn one_cell_one_record() {
    let report = run_grid(&tiny_grid(), &[1]).unwrap();
    assert_eq!(report.records.len(), 1);
    assert!(report.failures.is_empty());
    let r = &report.records[0];
    assert_eq!((r.boundary_id, r.n_interior, r.seed), (BoundaryId::B1, 10, 1));
    assert!(r.mse >= 0.0 && r.mse.is_finite());
    assert_eq!(r.wall_time_s, 0.0);
}

#[test]
fn grid_is_deterministic_and_counts_cells() {
    let cfg = GridConfig {
        boundaries: BoundaryId::TEST.to_vec(),
        n_interior: vec![5, 10, 20],
        finetune_steps: 2,
        ..tiny_grid()
    };
    let a = run_grid(&cfg, &[1, 2, 3]).unwrap();
    assert_eq!(a.records.len(), 36);
    let b = run_grid(&cfg, &[1, 2, 3]).unwrap();
    assert_eq!(a.records, b.records);

    let parallel = GridConfig { workers: 3, ..cfg };
    assert_eq!(run_grid(&parallel, &[1, 2, 3]).unwrap().records, a.records);
}

#[test]
fn base_models_are_shared_through_the_cache() {
    let cache = BaseModels::new();
    let cfg = tiny_grid();
    let a = run_grid_with(&cfg, &[4, 5], &cache).unwrap();
    assert_eq!(cache.len(), 2);
    let zero = GridConfig {
        protocols: vec![Protocol::ZeroShot],
        ..cfg.clone()
    };
    let z = run_grid_with(&zero, &[4, 5], &cache).unwrap();
    assert_eq!(cache.len(), 2);
    assert_eq!(z.records[0].protocol, Protocol::ZeroShot);
    assert_eq!(run_grid(&cfg, &[4, 5]).unwrap().records, a.records);
}

#[test]
fn training_boundary_cell_matches_base_model() {
    let cfg = GridConfig {
        boundaries: vec![BoundaryId::BTrain],
        n_interior: vec![20],
        ..tiny_grid()
    };
    let report = run_grid(&cfg, &[6]).unwrap();
    let spec = BaseSpec {
        equation: Equation::Laplace,
        bc_kind: BcKind::Dirichlet,
        seed: 6,
    };
    let base = train_base(&cfg, &spec).unwrap();
    let holdout = holdout_dataset(&cfg, &spec, BoundaryId::BTrain).unwrap();
    assert_eq!(report.records[0].mse, evaluate(&base, &holdout).unwrap());
}

#[test]
fn diverging_cells_are_reported_not_fatal() {
    let mut cfg = tiny_grid();
    cfg.train.lr = 1e300;
    let report = run_grid(&cfg, &[1]).unwrap();
    assert!(report.records.is_empty());
    assert_eq!(report.failures.len(), 1);
}

#[test]
fn invalid_grids_are_rejected() {
    let mut cfg = tiny_grid();
    cfg.n_interior.clear();
    assert!(run_grid(&cfg, &[1]).is_err());
    let mut cfg = tiny_grid();
    cfg.equations = vec![Equation::Darcy];
    cfg.truth_mode = Some(TruthMode::MfsOracle);
    assert!(run_grid(&cfg, &[1]).is_err());
    assert!(run_grid(&tiny_grid(), &[]).is_err());
}

#[test]
fn results_csv_round_trip_and_append() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let recs = vec![record(BoundaryId::B1, 50, 1, 1.25e-4), record(BoundaryId::B4, 200, 2, 3e-5)];
    write_results(&path, &recs).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(
        "equation,bc_kind,boundary_id,n_interior,seed,protocol,truth_mode,mse,wall_time_s\n\
         laplace,dirichlet,B1,50,1,few-shot,analytic,"
    ));
    assert_eq!(read_results(&path).unwrap(), recs);

    let appended = dir.path().join("appended.csv");
    append_results(&appended, &recs[..1]).unwrap();
    append_results(&appended, &recs[1..]).unwrap();
    assert_eq!(std::fs::read_to_string(&appended).unwrap(), text);
}

#[test]
fn table_cells() {
    assert_eq!(format_cell(Some(1.09e-4)), "0.109");
    assert_eq!(format_cell(Some(0.0)), "0.000");
    assert_eq!(format_cell(None), "—");
    assert_eq!(format_cell(Some(1.7225e-3)), "1.722");
    assert_eq!(format_cell(Some(1.7235e-3)), "1.724");

    let recs = vec![
        record(BoundaryId::B1, 200, 1, 1.09e-4),
        record(BoundaryId::B2, 50, 1, 1e-4),
        record(BoundaryId::B2, 50, 2, 3e-4),
    ];
    let t = emit_table(&recs, Equation::Laplace, BcKind::Dirichlet, Protocol::FewShot);
    assert_eq!(t.boundaries, BoundaryId::TEST.to_vec());
    assert_eq!(t.counts, vec![50, 100, 200]);
    assert_eq!(format_cell(t.cells[0][2]), "0.109");
    assert_eq!(format_cell(t.cells[1][0]), "0.200");
    assert_eq!(t.filled(), 2);
    let csv = t.render_csv();
    assert_eq!(csv.lines().next().unwrap(), "boundary,50,100,200");
    assert!(csv.contains("B1,—,—,0.109"));
    let text = t.render_text();
    assert_eq!(text.lines().count(), 6);

    let other = emit_table(&recs, Equation::Darcy, BcKind::Dirichlet, Protocol::FewShot);
    assert_eq!(other.filled(), 0);
}

#[test]
fn table_is_regenerable_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let recs = vec![record(BoundaryId::B3, 100, 1, 2.345e-3), record(BoundaryId::B3, 100, 2, 1.1e-3)];
    write_results(&path, &recs).unwrap();
    let from_disk = read_results(&path).unwrap();
    let a = emit_table(&recs, Equation::Laplace, BcKind::Dirichlet, Protocol::FewShot);
    let b = emit_table(&from_disk, Equation::Laplace, BcKind::Dirichlet, Protocol::FewShot);
    assert_eq!(a.render_csv(), b.render_csv());
    assert_eq!(format_cell(a.cells[2][1]), "1.722");
}

fn svg_attr(svg: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let start = svg.find(&key).unwrap() + key.len();
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end].parse().unwrap()
}

#[test]
fn plots_for_perfect_and_imperfect_models() {
    let cfg = tiny_grid();
    let model = FienoModel::new(cfg.model.clone()).unwrap();
    let pde = PdeSpec::with_default_truth(Equation::Laplace, BcKind::Dirichlet);
    let dir = tempfile::tempdir().unwrap();

    for id in [BoundaryId::B2, BoundaryId::B4] {
        let mut data = build_dataset(id, &pde, 16, 25, 3).unwrap();
        let imperfect = emit_plots(&model, &data, dir.path()).unwrap();
        let names: Vec<String> = imperfect.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
        assert_eq!(
            names,
            [
                format!("laplace_dirichlet_{id}_25_pred.svg"),
                format!("laplace_dirichlet_{id}_25_truth.svg"),
                format!("laplace_dirichlet_{id}_25_error.svg"),
            ]
        );
        let err_svg = std::fs::read_to_string(&imperfect[2]).unwrap();
        let pred = predict(&model, &data).unwrap();
        let emax = pred
            .iter()
            .zip(data.truths())
            .map(|(p, t)| (p - t) * (p - t))
            .fold(0.0, f64::max);
        assert_eq!(svg_attr(&err_svg, "data-vmax"), emax);
        assert_eq!(svg_attr(&err_svg, "data-vmin"), 0.0);
        for path in &imperfect {
            let svg = std::fs::read_to_string(path).unwrap();
            assert!(svg.contains("id=\"boundary\""));
            assert_eq!(svg.matches("<circle").count(), 25);
        }

        for (p, y) in data.interior.iter_mut().zip(&pred) {
            p.true_value = *y;
        }
        let perfect = emit_plots(&model, &data, dir.path()).unwrap();
        let svg = std::fs::read_to_string(&perfect[2]).unwrap();
        let zero = format!("fill=\"{}\"", plot::colormap(0.0));
        assert_eq!(svg.matches(&zero).count(), 25);
    }
}

#[test]
fn tps_baseline() {
    let mut pde = PdeSpec::new(Equation::Laplace, BcKind::Dirichlet, TruthMode::Analytic);
    pde.analytic_field = AnalyticField::Constant(2.5);
    let data = build_dataset(BoundaryId::B1, &pde, 200, 100, 1).unwrap();
    assert!(baseline_rbf(&data, 200).unwrap() < 1e-20);

    let pde = PdeSpec::with_default_truth(Equation::Laplace, BcKind::Dirichlet);
    let data = build_dataset(BoundaryId::B3, &pde, 200, 100, 2).unwrap();
    let centers: Vec<[f64; 2]> = data.boundary.iter().map(|s| [s.point.x, s.point.y]).collect();
    let values: Vec<f64> = data.boundary.iter().map(|s| s.value).collect();
    let tps = ThinPlateSpline::fit(&centers, &values).unwrap();
    for (c, v) in centers.iter().zip(&values) {
        assert!((tps.eval(c[0], c[1]) - v).abs() < 1e-8);
    }
    let mse = baseline_rbf(&data, 200).unwrap();
    assert!(mse.is_finite() && mse >= 0.0);

    let neumann = PdeSpec::with_default_truth(Equation::Laplace, BcKind::Neumann);
    let data = build_dataset(BoundaryId::B1, &neumann, 20, 5, 1).unwrap();
    assert!(matches!(baseline_rbf(&data, 20), Err(BenchError::NeumannBaseline)));
}

#[test]
fn tps_survives_duplicate_centres() {
    let centers = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
    let values = [1.0, 2.0, 3.0, 4.0, 4.0];
    let tps = ThinPlateSpline::fit(&centers, &values).unwrap();
    assert!((tps.eval(1.0, 1.0) - 4.0).abs() < 1e-6);
}

#[test]
fn protocol_strings() {
    assert_eq!("few-shot".parse::<Protocol>().unwrap(), Protocol::FewShot);
    assert_eq!(Protocol::ZeroShot.to_string(), "zero-shot");
    assert!("both".parse::<Protocol>().is_err());
}
