use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpshap::report::AllocationsFile;
use cpshap_core::rng::stream;
use rand::Rng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cpshap"));
    c.env("CPSHAP_THREADS", "2");
    c
}

fn write_data(dir: &Path, name: &str, d: usize, n: usize, constant_target: bool) -> PathBuf {
    let mut rng = stream(41, d as u64);
    let mut text = (0..d).map(|j| format!("x{}", j + 1)).collect::<Vec<_>>().join(",");
    text.push_str(",y\n");
    for _ in 0..n {
        let xs: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let e: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
        let y = if constant_target { 3.0 } else { xs.iter().take(5).sum::<f64>() + 0.3 * e };
        for x in &xs {
            text.push_str(&format!("{x},"));
        }
        text.push_str(&format!("{y}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn attribute(data: &Path, out: &Path, flags: &[&str]) -> Output {
    bin()
        .arg("attribute")
        .arg("--data")
        .arg(data)
        .args(["--target", "y", "--seed", "3"])
        .args(flags)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 3, 120, false);
    let constant = write_data(dir.path(), "c.csv", 2, 120, true);
    let wide = write_data(dir.path(), "w.csv", 21, 120, false);
    let out = dir.path().join("o");

    assert_eq!(code(&attribute(&data, &out, &["--method", "magic"])), 2);
    assert_eq!(code(&attribute(&data, &out, &["--alpha", "1.5"])), 2);
    assert_eq!(code(&attribute(&wide, &out, &["--estimator", "exact"])), 2);
    assert_eq!(code(&bin().args(["benchmark", "nonesuch"]).output().unwrap()), 2);

    assert_eq!(code(&attribute(&dir.path().join("missing.csv"), &out, &[])), 3);
    let o = bin().arg("attribute").arg("--data").arg(&data).args(["--target", "nope"]).output().unwrap();
    assert_eq!(code(&o), 3);

    let o = attribute(&constant, &out, &["--method", "smr", "--normalize"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offending test points"));

    assert_eq!(code(&attribute(&data, &out, &[])), 0);
}

#[test]
fn outputs_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 4, 200, false);
    let out = dir.path().join("both");
    let o = attribute(&data, &out, &["--method", "lacp", "--alloc", "both", "--value", "width,upper"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["allocations.json", "rank_matrix.csv", "top5.csv", "agreement.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let file = AllocationsFile::from_json(&std::fs::read_to_string(out.join("allocations.json")).unwrap())
        .unwrap();
    assert_eq!(file.features.len(), 4);
    // 40 test rows, two value functions, two allocation kinds.
    assert_eq!(file.records.len(), 40 * 4);

    let rep = dir.path().join("rep");
    let o = bin().arg("report").arg(out.join("allocations.json")).arg("--out-dir").arg(&rep).output().unwrap();
    assert!(o.status.success());
    for f in ["rank_matrix.csv", "top5.csv", "agreement.csv"] {
        assert_eq!(std::fs::read(rep.join(f)).unwrap(), std::fs::read(out.join(f)).unwrap(), "{f}");
    }

    let shap_only = dir.path().join("shap");
    let o = attribute(&data, &shap_only, &["--method", "lacp"]);
    assert!(o.status.success());
    assert!(!shap_only.join("agreement.csv").exists());
}

#[test]
fn single_point_rank_matrix_is_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 5, 200, false);
    let out = dir.path().join("o");
    let o = attribute(&data, &out, &["--method", "lacp", "--test-points", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("rank_matrix.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(4).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r.iter().sum::<f64>(), 1.0);
    }
    for k in 0..5 {
        assert_eq!(rows.iter().map(|r| r[k]).sum::<f64>(), 1.0);
    }
}

#[test]
fn manifest_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 4, 200, false);
    let first = dir.path().join("a");
    let o = attribute(&data, &first, &["--method", "cqr", "--estimator", "mc", "--m", "50"]);
    assert!(o.status.success());
    let second = dir.path().join("b");
    let o = bin()
        .arg("attribute")
        .arg("--manifest")
        .arg(first.join("manifest.json"))
        .arg("--out-dir")
        .arg(&second)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(first.join("allocations.json")).unwrap(),
        std::fs::read(second.join("allocations.json")).unwrap()
    );
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 3, 150, false);
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# run settings\nmethod = lacp\nalloc = both\nalpha = 0.2\n").unwrap();
    let out = dir.path().join("o");
    let o = attribute(&data, &out, &["--config", cfg.to_str().unwrap(), "--alpha", "0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["method"], "lacp");
    assert_eq!(manifest["config"]["alloc"], "both");
    assert_eq!(manifest["config"]["alpha"], "0.05");

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(code(&attribute(&data, &out, &["--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn sampled_run_scales_past_exhaustive_limit() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "w.csv", 30, 300, false);
    let out = dir.path().join("o");
    let o = attribute(&data, &out, &["--estimator", "mc", "--m", "200", "--test-points", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let trained = manifest["diagnostics"]["trained_count"].as_u64().unwrap();
    assert!(trained <= 200 * 29 + 32, "{trained}");
}

#[test]
fn tiny_convergence_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["benchmark", "sobol-levitan", "--m-grid", "5,10", "--reps", "2"])
        .args(["--n-train", "100", "--n-cal", "50", "--n-test", "3"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    // Header plus 2 grid points x 2 reps.
    assert_eq!(runs.lines().count(), 5);
    let conv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    // Exact rows, then sampled rows: 3 points x 16 features each.
    assert_eq!(conv.lines().count(), 1 + 3 * 16 + 4 * 3 * 16);
    assert!(dir.path().join("meta.json").exists());
}
