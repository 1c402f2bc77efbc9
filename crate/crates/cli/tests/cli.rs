//! End-to-end tests of the command-line interface: exit codes, file outputs,
//! JSON purity, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stratreg::facility::{generalized_median, phantoms};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stratreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stratreg")
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_collinear_csv_interpolates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write(&input, "x,y\n0.0,0.25\n0.5,0.5\n1.0,0.75\n");
    let output = dir.path().join("fit.json");

    let res = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let fitted = json_file(&output);
    let residuals = fitted["residuals"].as_array().unwrap();
    assert!(residuals.iter().all(|r| r.as_f64().unwrap() <= 1e-8));

    // Manifest exists and names the output file.
    let manifest = json_file(&dir.path().join("fit.json.manifest.json"));
    assert_eq!(manifest["command"], "fit");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs[0].as_str().unwrap().ends_with("fit.json"));
    assert!(manifest["artifact_version"].as_str().unwrap().starts_with("stratreg-"));
}

#[test]
fn fit_different_p_different_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.csv");
    write(&input, "x,y\n0.0,0.1\n0.3,0.9\n0.7,0.2\n1.0,0.8\n0.5,0.4\n");
    let out2 = dir.path().join("p2.json");
    let out3 = dir.path().join("p3.json");

    assert!(run(&["fit", "--input", input.to_str().unwrap(), "--p", "2", "--output", out2.to_str().unwrap()]).status.success());
    assert!(run(&["fit", "--input", input.to_str().unwrap(), "--p", "3", "--output", out3.to_str().unwrap()]).status.success());

    let b2 = json_file(&out2)["coefficients"].as_array().unwrap().clone();
    let b3 = json_file(&out3)["coefficients"].as_array().unwrap().clone();
    let gap: f64 = b2
        .iter()
        .zip(&b3)
        .map(|(a, b)| (a.as_f64().unwrap() - b.as_f64().unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1e-6, "p = 2 and p = 3 should fit different hyperplanes");
}

#[test]
fn fit_missing_file_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("never.json");
    let res = run(&[
        "fit",
        "--input",
        dir.path().join("absent.csv").to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!output.exists());
}

#[test]
fn fit_json_mode_stdout_is_pure_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write(&input, "x,y\n0.0,0.0\n1.0,1.0\n0.5,0.5\n");
    let output = dir.path().join("fit.json");
    let res = run(&[
        "--json",
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(parsed["command"], "fit");
}

#[test]
fn equilibrium_facility_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("fac.csv");
    // Constant feature only; target spans [0,1] so normalization is identity.
    write(&input, "y\n0.0\n0.35\n0.6\n0.85\n1.0\n");
    let output = dir.path().join("eq.json");
    let res = run(&[
        "equilibrium",
        "--input",
        input.to_str().unwrap(),
        "--features",
        "",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let eq = json_file(&output);
    assert_eq!(eq["converged"], true);
    let outcome = eq["outcomes"][0].as_f64().unwrap();
    let peaks = [0.0, 0.35, 0.6, 0.85, 1.0];
    let want = generalized_median(&peaks, &phantoms::<f64>(5, 2.0).unwrap());
    assert!(
        (outcome - want).abs() <= 1e-5,
        "outcome {outcome} vs closed form {want}"
    );
}

#[test]
fn equilibrium_collinear_everyone_happy() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write(&input, "x,y\n0.0,0.0\n0.25,0.25\n0.5,0.5\n1.0,1.0\n");
    let output = dir.path().join("eq.json");
    let res = run(&[
        "equilibrium",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let eq = json_file(&output);
    assert_eq!(eq["converged"], true);
    assert!(eq["pne_violation"].as_f64().unwrap() <= 1e-6);
    // Everyone perfectly happy: outcomes equal the (normalized) targets.
    let outcomes = eq["outcomes"].as_array().unwrap();
    for (o, y) in outcomes.iter().zip([0.0, 0.25, 0.5, 1.0]) {
        assert!((o.as_f64().unwrap() - y).abs() <= 1e-6);
    }
}

/// The knife-edge fixture at a tolerance below the best-response
/// granularity: dynamics cannot converge; exit code 3 with diagnostics.
#[test]
fn equilibrium_non_terminating_fixture_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // Build the 4-point instance via the library to get the exact peaks.
    let inst = stratreg::experiments::unbounded_instance(0.1, 2.0).unwrap();
    let xs = [0.0, 0.45, 0.55, 1.0];
    let peaks = inst.game.dataset().true_responses();
    let mut csv = String::from("x,y\n");
    for (x, y) in xs.iter().zip(peaks) {
        csv.push_str(&format!("{x},{y:.17}\n"));
    }
    let input = dir.path().join("knife.csv");
    write(&input, &csv);
    let output = dir.path().join("eq.json");

    let res = run(&[
        "equilibrium",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "dynamics",
        "--tolerance",
        "1e-13",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let eq = json_file(&output);
    assert_eq!(eq["converged"], false);
    assert!(eq["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn demo_theorem10_reports_analytic_ppoa() {
    let res = run(&["demo", "theorem10", "--epsilon", "0.1"]);
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    let payload: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let measured = payload["measured_ppoa"].as_f64().unwrap();
    assert!((measured - 101.0).abs() / 101.0 <= 1e-3, "measured {measured}");
    assert_eq!(payload["profile_is_pne"], true);
}

#[test]
fn demo_theorem2_matches_n() {
    let res = run(&["demo", "theorem2", "--n", "10", "--p", "2"]);
    assert!(res.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(res.stdout).unwrap().trim()).unwrap();
    let measured = payload["measured_ppoa"].as_f64().unwrap();
    assert!((measured - 10.0).abs() <= 1e-3, "measured {measured}");
}

#[test]
fn demo_example2_lists_both_outcomes() {
    let res = run(&["demo", "example2"]);
    assert!(res.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(res.stdout).unwrap().trim()).unwrap();
    let equilibria = payload["equilibria"].as_array().unwrap();
    assert!(equilibria.len() >= 2);
}

#[test]
fn demo_example1_finite_game_contrast() {
    let res = run(&["demo", "example1"]);
    assert!(res.status.success());
    let payload: serde_json::Value =
        serde_json::from_str(String::from_utf8(res.stdout).unwrap().trim()).unwrap();
    assert_eq!(payload["honest_is_pne_continuous"], false);
    assert_eq!(payload["honest_is_pne_finite_game"], true);
    assert!((payload["pne_outcome"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
}

#[test]
fn demo_unknown_name_exits_one() {
    let res = run(&["demo", "nonsense"]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("example1"), "stderr should list valid names: {stderr}");
}

#[test]
fn sweep_alpha_zero_unit_ppoa_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    write(
        &config,
        r#"{"swept_parameter":"alpha","values":[0.0],"n":10,"d":2,"trials":5,"seed":3}"#,
    );
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");

    let res = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        out1.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let csv1 = fs::read_to_string(out1.join("sweep.csv")).unwrap();
    let mut lines = csv1.lines();
    assert_eq!(
        lines.next().unwrap(),
        "swept_value,mean_ppoa,ci_half_width,mean_iterations,lad_ppoa,converged_fraction"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "1");

    assert!(run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        out2.to_str().unwrap(),
    ])
    .status
    .success());
    let csv2 = fs::read_to_string(out2.join("sweep.csv")).unwrap();
    assert_eq!(csv1, csv2, "same seed must give byte-identical CSV");

    let manifest = json_file(&out1.join("manifest.json"));
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["finished_at_epoch_ms"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_failure_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    // n = 1 cannot be normalized; every trial fails.
    write(
        &config,
        r#"{"swept_parameter":"n","values":[1],"trials":4,"seed":1}"#,
    );
    let res = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn sweep_bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    write(&config, "{ not json");
    let res = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn thread_cap_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write(&input, "x,y\n0.0,0.0\n1.0,1.0\n0.5,0.5\n");
    let output = dir.path().join("fit.json");
    let res = bin()
        .env("STRATREG_THREADS", "1")
        .args([
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(res.status.success());
}
