use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fpme::output::{read_diagnostics, read_manifest, DIAG_HEADER, MANIFEST_NAME};

fn fpme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpme")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cmd(cmd: &str, config: &Path, out: &Path) -> Output {
    fpme(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

const GAUSSIAN_RUN: &str = r#"{
    "mesh": {"domain": [0, 1, 0, 1], "nx": 6},
    "initial": {"kind": "gaussian", "sigma": 0.05},
    "s": 0.5, "delta": 1e-3, "dt": 0.01, "t_final": 0.05,
    "snapshot_every": 2
}"#;

#[test]
fn run_writes_diagnostics_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", GAUSSIAN_RUN);
    let out = tmp.path().join("out");
    let res = run_cmd("run", &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let text = std::fs::read_to_string(out.join("diag.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(DIAG_HEADER));
    let records = read_diagnostics(&out.join("diag.csv")).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.windows(2).all(|w| (w[1].mass - w[0].mass).abs() <= 1e-12 * w[0].mass));

    for step in [0, 2, 4, 5] {
        assert!(out.join(format!("snap_{step:06}.csv")).exists(), "snapshot {step}");
    }
    assert!(out.join("vertices.csv").exists() && out.join("triangles.csv").exists());
    assert!(out.join(MANIFEST_NAME).exists());
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.command, "run");
    assert_eq!(manifest.results["steps"], 5);
    assert_eq!(manifest.mesh.num_vertices, 49);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", GAUSSIAN_RUN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_cmd("run", &cfg, &a).status.success());
    assert!(run_cmd("run", &cfg, &b).status.success());
    for name in ["diag.csv", "snap_000004.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn constant_density_stays_put() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "run.json",
        r#"{"mesh": {"domain": [0, 2, 0, 1], "nx": 4, "ny": 2}, "initial": {"kind": "uniform", "mass": 3},
            "s": 0.3, "delta": 0.01, "dt": 0.1, "t_final": 0.5}"#,
    );
    let out = tmp.path().join("out");
    assert!(run_cmd("run", &cfg, &out).status.success());
    let records = read_diagnostics(&out.join("diag.csv")).unwrap();
    for r in &records {
        assert!((r.mass - 3.0).abs() < 1e-12);
        assert!((r.linf - 1.5).abs() < 1e-12 && (r.min_val - 1.5).abs() < 1e-12);
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", &GAUSSIAN_RUN.replace("\"s\": 0.5", "\"s\": 0.5, \"sigma\": 1"));
    let res = run_cmd("run", &cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sigma"));
}

#[test]
fn bad_parameters_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for (from, to) in [("\"s\": 0.5", "\"s\": 1.5"), ("\"dt\": 0.01", "\"dt\": 0.03"), ("\"nx\": 6", "\"nx\": 0")] {
        let cfg = write_config(tmp.path(), "bad.json", &GAUSSIAN_RUN.replace(from, to));
        assert_eq!(run_cmd("run", &cfg, &tmp.path().join("out")).status.code(), Some(2), "{to}");
    }
    let missing = tmp.path().join("missing.json");
    assert_eq!(run_cmd("run", &missing, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = GAUSSIAN_RUN.replace("\"snapshot_every\": 2", "\"picard_max\": 1, \"picard_tol\": 1e-15");
    let cfg = write_config(tmp.path(), "run.json", &text);
    let res = run_cmd("run", &cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("Picard"));
}

#[test]
fn eig_reports_the_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eig.json",
        r#"{"mesh": {"domain": [0, 1, 0, 1], "nx": 8}, "vectors": 2, "export_matrices": true}"#,
    );
    let out = tmp.path().join("out");
    assert!(run_cmd("eig", &cfg, &out).status.success());
    let eig = std::fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().count(), 81);
    for name in ["eigenvectors.csv", "stiffness.coo", "mass.coo", "vertices.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let manifest = read_manifest(&out).unwrap();
    let lambda_1 = manifest.results["lambda_1"].as_f64().unwrap();
    assert!((lambda_1 - std::f64::consts::PI.powi(2)).abs() < 0.2);
}

#[test]
fn fracpoisson_matches_the_eigenfunction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fp.json",
        r#"{"mesh": {"domain": [0, 1, 0, 1], "nx": 16}, "s": 0.5, "rhs": {"kind": "cosine", "kx": 1, "ky": 0}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run_cmd("fracpoisson", &cfg, &out).status.success());
    let manifest = read_manifest(&out).unwrap();
    assert!(manifest.results["error"]["relative_l2"].as_f64().unwrap() < 1e-2);
    let header = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(header.starts_with("node,x,y,f,c,c_exact"));
}

#[test]
fn selfsim_tracks_the_profile_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ss.json",
        r#"{"mesh": {"domain": [-2, 2, -2, 2], "nx": 8}, "s": 0.5, "delta": 1e-4, "l_cap": 10,
            "dt": 0.05, "t_final": 0.5, "epsilon": 0.25}"#,
    );
    let out = tmp.path().join("out");
    let res = run_cmd("selfsim", &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let dist = std::fs::read_to_string(out.join("profile_distance.csv")).unwrap();
    assert_eq!(dist.lines().count(), 12);
    let records = read_diagnostics(&out.join("diag.csv")).unwrap();
    let m0 = records[0].mass;
    assert!(records.iter().all(|r| (r.mass - m0).abs() <= 1e-12 * m0));
}

#[test]
fn sweep_writes_an_error_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        r#"{"mode": "standard", "domain": [0, 1, 0, 1], "nx": [2, 4, 8], "dt": [0.05, 0.025], "delta": [1e-3],
            "initial": {"kind": "gaussian", "sigma": 0.05}, "s": 0.5, "t_final": 0.05}"#,
    );
    let out = tmp.path().join("out");
    let res = run_cmd("sweep", &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let errors = std::fs::read_to_string(out.join("error_matrix.csv")).unwrap();
    let rows: Vec<&str> = errors.lines().collect();
    assert_eq!(rows.len(), 7);
    let reference: f64 = rows.last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(reference.abs() < 1e-12);
    assert!(out.join("cell_005").join("diag.csv").exists());
}
