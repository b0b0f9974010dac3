use std::path::Path;
use std::process::{Command, Output};

use spectral_nns::container;
use spectral_nns::harness;
use spectral_nns::model::verify_gap;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-nns"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path, name: &str) {
    let o = run(
        dir,
        &["generate", "--n", "200", "--d", "100", "--k", "10", "--eps", "0.05", "--seed", "1", "-o", name],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn generate_then_solve_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let inst = container::load(dir.path().join("inst.snns")).unwrap().latent;
    assert!(verify_gap(&inst));

    let o = run(dir.path(), &["perturb", "inst.snns", "--sigma", "0", "--seed", "3", "-o", "inst-noisy.snns"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for algo in ["svd", "naive"] {
        let o = run(dir.path(), &["solve", "--algo", algo, "--k", "10", "inst-noisy.snns"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), (inst.nn_index() + 1).to_string());
    }
}

#[test]
fn solve_with_sigma_prints_estimates() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let o = run(dir.path(), &["solve", "inst.snns", "--sigma", "0", "--knn", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "point,estimated_sq_distance");
    assert_eq!(lines.len(), 2 + 200 + 1);
    assert!(lines[202].starts_with(&format!("knn,{} ", lines[0])));
}

#[test]
fn sweep_writes_one_row_per_algorithm_and_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let args = [
        "sweep", "--algo", "svd", "--algo", "naive", "--sigma-grid", "0.05:0.8:geometric:16", "--trials", "10",
        "inst.snns", "-o", "out.csv", "--plot", "out.svg",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = harness::read_csv(dir.path().join("out.csv")).unwrap();
    assert_eq!(records.len(), 32);
    let svg = std::fs::read_to_string(dir.path().join("out.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    // same seed, same bytes
    let again = run(dir.path(), &[&args[..10], &["-o", "again.csv"]].concat());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("out.csv")).unwrap(),
        std::fs::read(dir.path().join("again.csv")).unwrap()
    );
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.cfg"),
        "algorithms = svd\nsigma_grid = 0, 0.01\ntrials = 4\nseed = 2\nn = 20\nd = 10\nk = 2\neps = 0.1\n",
    )
    .unwrap();
    let o = run(dir.path(), &["sweep", "--config", "sweep.cfg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = harness::parse_csv(&stdout(&o)).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].success_rate, 1.0);
}

#[test]
fn input_files_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let before = std::fs::read(dir.path().join("inst.snns")).unwrap();
    run(dir.path(), &["perturb", "inst.snns", "--sigma", "0.1", "-o", "noisy.snns"]);
    run(dir.path(), &["solve", "inst.snns"]);
    run(dir.path(), &["info", "inst.snns"]);
    assert_eq!(std::fs::read(dir.path().join("inst.snns")).unwrap(), before);
}

#[test]
fn parameter_errors_exit_2_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["generate", "--n", "200", "--d", "100", "--k", "101", "--eps", "0.05", "-o", "x.snns"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--k"), "{}", stderr(&o));

    let o = run(dir.path(), &["generate", "--n", "201", "--d", "100", "--k", "10", "--eps", "0.05", "-o", "x.snns"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--n"));

    let o = run(dir.path(), &["generate", "--n", "abc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--n"));

    generate(dir.path(), "inst.snns");
    let o = run(dir.path(), &["sweep", "inst.snns", "--sigma-grid", "0.3,0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--sigma-grid"));

    let o = run(dir.path(), &["perturb", "inst.snns", "--sigma", "-1", "-o", "y.snns"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--sigma"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["info", "missing.snns"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.snns"));

    std::fs::write(dir.path().join("junk.snns"), b"SNNS2 not really").unwrap();
    let o = run(dir.path(), &["solve", "junk.snns"]);
    assert_eq!(o.status.code(), Some(1));

    generate(dir.path(), "inst.snns");
    let o = run(dir.path(), &["threshold", "inst.snns", "--sigma-grid", "0,0.0001", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("widen"));
}

#[test]
fn info_reports_caps_and_regime() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let o = run(dir.path(), &["info", "inst.snns", "--sigma", "0.9", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("\"binding_term\""));
    assert!(out.contains("\"regime\":\"IMPOSSIBLE\""), "{out}");
}

#[test]
fn lowerbound_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["lowerbound", "--k", "1,16", "--sigma", "0.5,2", "--trials", "200", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5);
    assert!(out.starts_with("k,sigma,epsilon,trials"));
    let o = run(dir.path(), &["lowerbound", "--game", "eps", "--eps", "0.1,1", "--sigma", "1", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn threads_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--threads", "1", "lowerbound", "--k", "4", "--sigma", "1", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(dir.path(), &["--threads", "0", "lowerbound", "--k", "4", "--sigma", "1", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn in_process_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "inst.snns");
    let path = dir.path().join("inst.snns");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = spectral_nns::cli::run_with(
        ["spectral-nns", "solve", path.to_str().unwrap()],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    let binary = run(dir.path(), &["solve", "inst.snns"]);
    assert_eq!(out, binary.stdout);
}
