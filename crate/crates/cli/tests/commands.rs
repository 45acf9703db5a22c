//! End-to-end runs of the `qobs` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qobserver_cli::output::{read_matrices, read_trajectory};
use qobserver_cli::RunReport;
use qobserver_core::reference::expected_transformed_coupling;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn qobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qobs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> RunReport {
    RunReport::from_json(&String::from_utf8_lossy(&out.stdout)).expect("valid report")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn write_variant(dir: &Path, name: &str, from: &str, edit: impl Fn(String) -> String) -> String {
    let text = std::fs::read_to_string(configs().join(from)).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, edit(text)).unwrap();
    path.to_string_lossy().into_owned()
}

/// Six-mode plant with an explicit `c_p` of the given entries.
fn six_mode_with_cp(dir: &Path, c_p: &[f64]) -> String {
    let c = c_p
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(", ");
    write_variant(dir, "explicit.toml", "six_mode.toml", |t| {
        let start = t.find("c_p2_tilde").unwrap();
        let end = start + t[start..].find(']').unwrap() + 1;
        format!("{}c_p = [{c}]{}", &t[..start], &t[end..])
    })
}

#[test]
fn analyze_six_mode() {
    let out = qobs(&["analyze", &config("six_mode.toml"), "--json"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert!(report.conditions.all_ok());
    assert_eq!(report.conditions.rank_cr, 2);
    assert_eq!(
        (report.decomposition.n_p1, report.decomposition.n_p2),
        (2, 4)
    );
}

#[test]
fn odd_dimension_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "odd.toml", "toy.toml", |t| {
        t.replace("n_p = 4", "n_p = 5")
    });
    let out = qobs(&["analyze", &path]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("plant.n_p") && err.contains("line 5"), "{err}");
}

#[test]
fn zero_output_fails_rank() {
    let dir = tempfile::tempdir().unwrap();
    let path = six_mode_with_cp(dir.path(), &[0.0; 12]);
    let out = qobs(&["analyze", &path, "--json"]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    assert!(!report.conditions.rank_ok);
    assert!(!report.passed);
}

#[test]
fn explicit_output_matches_transformed_form() {
    let dir = tempfile::tempdir().unwrap();
    let transformed = json(&qobs(&["analyze", &config("six_mode.toml"), "--json"]));
    let c_p = transformed.decomposition.c_p.data.clone();
    let out = qobs(&["analyze", &six_mode_with_cp(dir.path(), &c_p), "--json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out).decomposition.c_p.data, c_p);
}

#[test]
fn synthesize_six_mode() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("observer.csv");
    let report_path = dir.path().join("report.json");
    let out = qobs(&[
        "synthesize",
        &config("six_mode.toml"),
        csv.to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let matrices = read_matrices(&csv).unwrap();
    let names: Vec<&str> = matrices.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["R_o", "R_c", "R_c_tilde", "C_o", "beta", "Theta_o"]);
    assert_eq!(matrices[2].1, expected_transformed_coupling());

    let report = RunReport::from_json(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let obs = report.observer.unwrap();
    assert_eq!(obs.output_identity_residual, 0.0);
    // the CSV reproduces the designed matrices bit for bit
    assert_eq!(matrices[1].1, obs.r_c.to_matrix());
    assert_eq!(matrices[4].1, obs.beta.to_matrix());
}

#[test]
fn default_observer_satisfies_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "defaults.toml", "six_mode.toml", |t| {
        let start = t.find("[observer]").unwrap();
        let end = t.find("[simulation]").unwrap();
        format!("{}{}", &t[..start], &t[end..])
    });
    let out = qobs(&[
        "synthesize",
        &path,
        dir.path().join("o.csv").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let obs = json(&out).observer.unwrap();
    assert_eq!(obs.output_identity_residual, 0.0);
    assert_eq!(obs.beta.data, [-1.0, 0.0, 0.0, -1.0]);
}

#[test]
fn odd_output_count_pads_observer() {
    let dir = tempfile::tempdir().unwrap();
    let out = qobs(&[
        "synthesize",
        &config("toy.toml"),
        dir.path().join("o.csv").to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out).observer.unwrap().n_o, 2);
}

#[test]
fn synthesize_refuses_failing_plant() {
    let dir = tempfile::tempdir().unwrap();
    let path = six_mode_with_cp(dir.path(), &[0.0; 12]);
    let csv = dir.path().join("o.csv");
    let out = qobs(&["synthesize", &path, csv.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank C_p = 0"));
    assert!(!csv.exists());
}

#[test]
fn simulate_six_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = qobs(&[
        "simulate",
        &config("six_mode.toml"),
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report =
        RunReport::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let c_p = report.decomposition.c_p.to_matrix();

    let (header, zp) = read_trajectory(&dir.path().join("zp.csv")).unwrap();
    assert_eq!(header.len(), 1 + 2 * 8);
    assert_eq!((header[0].as_str(), header[1].as_str()), ("t", "zp_1_x1"));
    assert_eq!(zp.len(), 20001);
    for row in &zp {
        for (k, v) in row[1..].iter().enumerate() {
            let (i, j) = (k / 8, k % 8);
            let expected = if j < 6 { c_p[(i, j)] } else { 0.0 };
            assert!(
                (v - expected).abs() <= 1e-6,
                "t = {}: {v} vs {expected}",
                row[0]
            );
        }
    }
    // first row is [C_p, 0] exactly
    assert_eq!(
        zp[0][1..7],
        c_p.row(0).iter().copied().collect::<Vec<_>>()[..]
    );

    let (_, avg) = read_trajectory(&dir.path().join("zo_avg.csv")).unwrap();
    let last = avg.last().unwrap();
    assert_eq!(last[0], 200.0);
    let k = report.convergence.as_ref().unwrap();
    assert!(k.passed);
    for i in 0..2 {
        let err: f64 = (0..8)
            .map(|j| {
                let target = if j < 6 { c_p[(i, j)] } else { 0.0 };
                (last[1 + 8 * i + j] - target).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!(err <= 0.05, "row {i}: {err}");
    }
}

#[test]
fn decoupled_observer_does_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let out = qobs(&[
        "simulate",
        &config("decoupled.toml"),
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let report =
        RunReport::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let k = report.convergence.unwrap();
    assert!(!k.passed);
    assert!(k.zp_drift <= 1e-9);
}

#[test]
fn degenerate_horizon_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "zero.toml", "toy.toml", |t| {
        t.replace("t_end = 100.0", "t_end = 0.0")
    });
    let out = qobs(&["simulate", &path, dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.t_end"));
    let short = qobs(&["simulate", &config("toy.toml"), "unused", "--t-end", "5"]);
    assert_eq!(code(&short), 2);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = qobs(&[
        "simulate",
        &config("toy.toml"),
        dir.path().to_str().unwrap(),
        "--t-end",
        "20",
        "--dt",
        "0.02",
        "--omega",
        "2",
        "--tol",
        "1e-8",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let s = report.settings;
    assert_eq!((s.t_end, s.dt, s.omega, s.tol), (20.0, 0.02, 2.0, 1e-8));
    assert_eq!(report.conditions.tolerance, 1e-8);
    assert_eq!(report.observer.unwrap().r_o.data, [2.0, 0.0, 0.0, 2.0]);

    let bad = qobs(&["analyze", &config("toy.toml"), "--dt", "-1"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn demo_passes_and_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.json");
    let out = qobs(&["demo", "--report", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&path).unwrap();
    let report = RunReport::from_json(&text).unwrap();
    assert!(report.passed && report.checks.len() == 6);
    assert!(report.checks.iter().all(|c| c.passed));
    assert_eq!(report.to_json(), text);
    assert_eq!(RunReport::from_json(&report.to_json()).unwrap(), report);
}

#[test]
fn runs_are_deterministic() {
    let a = qobs(&["analyze", &config("six_mode.toml"), "--json"]);
    let b = qobs(&["analyze", &config("six_mode.toml"), "--json"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&a), code(&b));
}
