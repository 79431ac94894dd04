use std::path::Path;
use std::process::{Command, Output};

use thinplate::io::RunManifest;

fn thinplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinplate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "[grid]\nnx = 4\nny = 4\n[time]\nsteps = 2\n[diagnostics]\nstability_dirs = 4\n";

#[test]
fn zero_loading_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nnx = 4\nny = 4\n[loading]\namplitude = 0\n");
    let out = tmp.path().join("out");
    let o = thinplate(&["--quiet", "--out", out.to_str().unwrap(), "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 11);
}

#[test]
fn manifest_digests_match_the_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = thinplate(&["--out", out.to_str().unwrap(), "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("euler-lagrange"));
    let text = std::fs::read_to_string(out.join("manifest_simulate.txt")).unwrap();
    let manifest = RunManifest::parse(&text).unwrap();
    assert!(manifest.files.iter().any(|(n, _)| n == "trace.csv"));
    assert!(manifest.verify(&out).unwrap().is_empty());

    std::fs::write(out.join("trace.csv"), "tampered").unwrap();
    assert_eq!(manifest.verify(&out).unwrap(), vec!["trace.csv".to_string()]);
}

#[test]
fn invalid_config_reports_line_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[material]\nsigma_y = -1\nsigmay = 2\n");
    let o = thinplate(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("line 2: material.sigma_y: sigma_y must be > 0"), "{err}");
    assert!(err.contains("line 3: material.sigmay"), "{err}");
}

#[test]
fn starved_solver_names_the_stability_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nnx = 4\nny = 4\n[time]\nsteps = 1\n[solver]\nalt_max = 1\n[diagnostics]\nstability_dirs = 12\nel_check = false\nenergy_balance = false\n",
    );
    let out = tmp.path().join("out");
    let o = thinplate(&["--quiet", "--out", out.to_str().unwrap(), "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("check stability failed"), "{}", stderr(&o));
    assert!(out.join("report.txt").exists());
}

#[test]
fn check_needs_a_stored_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let o = thinplate(&["--out", out, "check", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("phase check failed"));

    assert_eq!(thinplate(&["--quiet", "--out", out, "simulate", &cfg]).status.code(), Some(0));
    let o = thinplate(&["--quiet", "--out", out, "check", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(out).join("check.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("boundary,")));
}

#[test]
fn dissipation_output_depends_only_on_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[dissipation]\nsamples = 2\nsegments = 3\nrestarts = 1\n");
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let run = |seed: &str| thinplate(&["--quiet", "--out", out, "--seed", seed, "dissipation", &cfg]);
    let a = run("1");
    let b = run("1");
    let c = run("2");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let table = String::from_utf8(a.stdout).unwrap();
    assert!(table.starts_with("index,kind,dist_id,"));
    assert_eq!(table.lines().count(), 1 + 4);
}

#[test]
fn missing_file_is_a_usage_error() {
    let o = thinplate(&["simulate", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/nonexistent/run.cfg"));
}
