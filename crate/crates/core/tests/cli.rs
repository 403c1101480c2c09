use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fedrep(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedrep"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SPEC: &str = "nodes = 12\nsamples = 54\nplanted = [1, 6]\nsignal = 1.0\nnoise = 0.2\nseed = 5\n";

fn config(data: &str) -> String {
    format!(
        "models = [\"gcn\", \"diffpool\"]\noutput = \"out\"\n{data}\n[federation]\nrounds = 2\nepochs = 2\ntop_k = 3\n\
         [federation.learning_rates]\ngcn = 0.05\ndiffpool = 0.05\n"
    )
}

const CONNECTOME: &str = "[data]\nkind = \"connectome\"\nmatrices = \"m.csv\"\nlabels = \"l.csv\"";

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedrep(&["check"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.lines().count() >= 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn synth_run_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.toml"), SPEC).unwrap();
    let out = fedrep(&["synth", "spec.toml", "m.csv", "l.csv"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(d.join("l.csv")).unwrap().lines().count(), 54);

    fs::write(d.join("exp.toml"), config(CONNECTOME)).unwrap();
    let out = fedrep(
        &[
            "run",
            "exp.toml",
            "--seed",
            "3",
            "--hospitals",
            "2",
            "--rounds",
            "1",
            "--epochs",
            "1",
            "--batch",
            "2",
            "--top-k",
            "4",
            "--mode",
            "both",
            "--models",
            "gcn,diffpool",
        ],
        d,
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("most reproducible model"));
    let bio = fs::read_to_string(d.join("out/federated_biomarkers.csv")).unwrap();
    assert_eq!(bio.lines().count(), 5);
    assert!(d.join("out/federated_hospital_1_matrix.csv").exists());
    assert!(!d.join("out/federated_hospital_2_matrix.csv").exists());

    let out = fedrep(&["report", "out/result.json", "again"], d);
    assert_eq!(code(&out), 0);
    for name in [
        "federated_average_matrix.csv",
        "baseline_average_matrix.svg",
        "accuracies.csv",
    ] {
        assert_eq!(
            fs::read(d.join("out").join(name)).unwrap(),
            fs::read(d.join("again").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fedrep(&[], d)), 2);
    assert_eq!(code(&fedrep(&["frobnicate"], d)), 2);
    assert_eq!(code(&fedrep(&["run", "x.toml", "--mode", "sideways"], d)), 2);
    assert_eq!(code(&fedrep(&["run", "x.toml", "--rounds", "-1"], d)), 2);
    assert_eq!(code(&fedrep(&["--help"], d)), 0);

    fs::write(d.join("bad.toml"), format!("{}\nflavour = 1\n", config(CONNECTOME))).unwrap();
    assert_eq!(code(&fedrep(&["run", "bad.toml"], d)), 2);
    fs::write(
        d.join("zero.toml"),
        config(CONNECTOME).replace("rounds = 2", "rounds = 0"),
    )
    .unwrap();
    fs::write(d.join("m.csv"), "0,1,1,0\n0,2,2,0\n").unwrap();
    fs::write(d.join("l.csv"), "0\n1\n").unwrap();
    assert_eq!(code(&fedrep(&["run", "zero.toml"], d)), 2);
}

#[test]
fn malformed_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.csv"), "0,1,1\n").unwrap();
    fs::write(d.join("l.csv"), "0\n").unwrap();
    fs::write(d.join("exp.toml"), config(CONNECTOME)).unwrap();
    let out = fedrep(&["run", "exp.toml"], d);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("m.csv:1"));

    fs::write(d.join("result.json"), "{ not json").unwrap();
    assert_eq!(code(&fedrep(&["report", "result.json", "o"], d)), 3);
}

#[test]
fn missing_files_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fedrep(&["run", "absent.toml"], d)), 5);
    assert_eq!(code(&fedrep(&["report", "absent.json", "o"], d)), 5);
    fs::write(d.join("exp.toml"), config(CONNECTOME)).unwrap();
    assert_eq!(code(&fedrep(&["run", "exp.toml"], d)), 5);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.toml"), SPEC).unwrap();
    assert_eq!(code(&fedrep(&["synth", "spec.toml", "m.csv", "l.csv"], d)), 0);
    let cfg = config(CONNECTOME).replace("gcn = 0.05", "gcn = 1e300");
    fs::write(d.join("exp.toml"), cfg).unwrap();
    let out = fedrep(&["run", "exp.toml", "--models", "gcn"], d);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
