mod common;

use std::fs;

use fedrep::data::{write_images, SyntheticSpec};
use fedrep::error::Error;
use fedrep::experiment::{
    execute, run_experiment, DataSource, ExperimentConfig, ModeSelection, Overrides, RunResult, RESULT_FILE,
};
use fedrep::federation::Mode;
use fedrep::models::ModelKind;
use fedrep::report::parse_matrix_csv;

fn small(out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec {
            nodes: 15,
            samples: 60,
            planted: vec![2, 5, 9],
            signal: 1.0,
            noise: 0.2,
            seed: 4,
        }),
        output: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.federation.rounds = 2;
    cfg.federation.epochs = 2;
    cfg.federation.top_k = 4;
    cfg.federation.learning_rates.gcn = 0.05;
    cfg.federation.learning_rates.diffpool = 0.05;
    cfg
}

fn assert_usage(err: Error, expected_field: &str) {
    match err {
        Error::Usage { field, .. } => assert_eq!(field, expected_field),
        other => panic!("expected a usage error for {expected_field}, got {other:?}"),
    }
}

#[test]
fn default_config_matches_reference_settings() {
    let cfg = ExperimentConfig::default();
    let f = &cfg.federation;
    assert_eq!(
        (f.hospitals, f.rounds, f.epochs, f.batch_size, f.top_k),
        (3, 5, 100, 1, 20)
    );
    assert_eq!(f.learning_rates.diffpool, 1e-4);
    assert_eq!(cfg.models, vec![ModelKind::Gcn, ModelKind::DiffPool]);
    assert_eq!(cfg.mode, ModeSelection::Both);
    let text = cfg.to_toml();
    for line in [
        "hospitals = 3",
        "rounds = 5",
        "epochs = 100",
        "batch_size = 1",
        "top_k = 20",
        "diffpool = 0.0001",
    ] {
        assert!(text.lines().any(|l| l.trim() == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn partial_toml_fills_defaults() {
    let cfg = ExperimentConfig::from_toml(
        r#"
        mode = "federated"
        [data]
        kind = "synthetic"
        nodes = 10
        samples = 40
        planted = [1, 2]
        signal = 1.0
        noise = 0.1
        seed = 3
        [federation]
        rounds = 2
        "#,
    )
    .unwrap();
    assert_eq!(cfg.mode, ModeSelection::Federated);
    assert_eq!(cfg.federation.rounds, 2);
    assert_eq!(cfg.federation.epochs, 100);
    assert_eq!(cfg.repeats, 1);
}

#[test]
fn unknown_or_bad_fields_name_the_field() {
    let base = "[data]\nkind = \"connectome\"\nmatrices = \"m\"\nlabels = \"l\"\n";
    assert_usage(
        ExperimentConfig::from_toml(&format!("{base}[federation]\nepochz = 3\n")).unwrap_err(),
        "epochz",
    );
    assert_usage(
        ExperimentConfig::from_toml(&format!("colour = 1\n{base}")).unwrap_err(),
        "colour",
    );

    let mut cfg = small(std::path::Path::new("unused"));
    cfg.federation.rounds = 0;
    assert_usage(execute(&cfg).unwrap_err(), "rounds");
    let mut cfg = small(std::path::Path::new("unused"));
    cfg.models = vec![];
    assert_usage(execute(&cfg).unwrap_err(), "models");
    let mut cfg = small(std::path::Path::new("unused"));
    cfg.federation.top_k = 16;
    assert!(matches!(execute(&cfg).unwrap_err(), Error::Usage { .. }));
}

#[test]
fn overrides_replace_config_values() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply(&Overrides {
        seed: Some(9),
        hospitals: Some(2),
        batch: Some(4),
        top_k: Some(7),
        mode: Some(ModeSelection::Baseline),
        models: Some(vec![ModelKind::DiffPool]),
        ..Overrides::default()
    });
    let f = &cfg.federation;
    assert_eq!((f.seed, f.hospitals, f.batch_size, f.top_k, f.rounds), (9, 2, 4, 7, 5));
    assert_eq!(cfg.mode, ModeSelection::Baseline);
    assert_eq!(cfg.models, vec![ModelKind::DiffPool]);
}

#[test]
fn relative_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "output = \"results\"\n[data]\nkind = \"connectome\"\nmatrices = \"m.csv\"\nlabels = \"l.csv\"\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.output, dir.path().join("results"));
    match cfg.data {
        DataSource::Connectome { matrices, .. } => assert_eq!(matrices, dir.path().join("m.csv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn both_modes_produce_complete_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let result = run_experiment(&cfg).unwrap();
    assert_eq!((result.nodes, result.samples), (15, 60));
    assert_eq!(result.arms.len(), 2);

    for mode in [Mode::Baseline, Mode::Federated] {
        let arm = result.arm(mode).unwrap();
        let name = mode.name();
        assert_eq!(arm.hospital_matrices.len(), 3);
        assert_eq!(arm.average_matrix.size(), 2);
        assert_eq!(arm.biomarkers.len(), 4);
        assert_eq!(arm.accuracies.len(), 2 * 3 * 3);
        assert!(arm.accuracies.iter().all(|a| (0.0..=1.0).contains(&a.accuracy)));
        assert_eq!(arm.rounds.is_empty(), mode == Mode::Baseline);

        let text = fs::read_to_string(dir.path().join(format!("{name}_average_matrix.csv"))).unwrap();
        assert_eq!(parse_matrix_csv(&text, 4).unwrap(), arm.average_matrix);
        let rows = fs::read_to_string(dir.path().join(format!("{name}_biomarkers.csv"))).unwrap();
        assert_eq!(rows.lines().count(), 1 + 4);
        for file in [
            format!("{name}_average_matrix.svg"),
            format!("{name}_hospital_2_matrix.svg"),
        ] {
            let svg = fs::read_to_string(dir.path().join(file)).unwrap();
            assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        }
    }
    assert!(dir.path().join("federated_rounds.csv").exists());
    assert!(!dir.path().join("baseline_rounds.csv").exists());

    let reloaded = RunResult::load(&dir.path().join(RESULT_FILE)).unwrap();
    assert_eq!(reloaded, result);
}

#[test]
fn baseline_only_run_has_no_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.mode = ModeSelection::Baseline;
    cfg.models = vec![ModelKind::Gcn];
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.arms.len(), 1);
    assert!(result.arms[0].rounds.is_empty());
    assert_eq!(result.arms[0].average_matrix.values().as_slice(), &[1.0]);
    assert!(!dir.path().join("baseline_rounds.csv").exists());
    assert!(!dir.path().join("federated_average_matrix.csv").exists());
}

#[test]
fn execute_is_deterministic() {
    let cfg = small(std::path::Path::new("unused"));
    let (mut a, mut b) = (execute(&cfg).unwrap(), execute(&cfg).unwrap());
    a.wall_clock_seconds = 0.0;
    b.wall_clock_seconds = 0.0;
    assert_eq!(a, b);
}

#[test]
fn image_source_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    // 4×4 images: class 1 has a bright left half
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut r = common::rng(7);
    for i in 0..24 {
        let label = i % 2;
        let noise = common::random_matrix(&mut r, 1, 16, 20.0);
        let img: Vec<f64> = (0..16)
            .map(|p| {
                let base = if label == 1 && p % 4 < 2 { 200.0 } else { 60.0 };
                (base + noise.as_slice()[p]).round()
            })
            .collect();
        images.push(img);
        labels.push(label);
    }
    let (ip, lp) = (dir.path().join("images.csv"), dir.path().join("labels.csv"));
    write_images(&images, &labels, &ip, &lp).unwrap();

    let mut cfg = small(&dir.path().join("out"));
    cfg.data = DataSource::Image {
        images: ip,
        labels: lp,
        side: 4,
        downsample: 2,
    };
    cfg.federation.top_k = 2;
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.nodes, 4);
    assert_eq!(result.arm(Mode::Federated).unwrap().biomarkers.len(), 2);

    cfg.apply(&Overrides {
        downsample: Some(3),
        ..Overrides::default()
    });
    assert_usage(execute(&cfg).unwrap_err(), "data.downsample");
}

#[test]
fn missing_data_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.data = DataSource::Connectome {
        matrices: dir.path().join("nope.csv"),
        labels: dir.path().join("nope_labels.csv"),
    };
    let err = execute(&cfg).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 5);
}
