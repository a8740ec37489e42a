//! The `relaylab` binary end to end.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn relaylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaylab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn records(path: &Path) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| headers.iter().zip(r.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

const FIXED: &str = r#"
schemes = ["basic", "baseline", "selection", "feedback"]
engine = "both"
[position]
d_ub = 220.0
theta_u = 0.3
[mc]
trials = 50000
seed = 9
"#;

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.toml", FIXED);
    let out = dir.path().join("fixed.csv");
    let o = relaylab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rows = records(&out);
    assert_eq!(rows.len(), 8);
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fixed.csv.json")).unwrap()).unwrap();
    let digest = format!("{:x}", Sha256::digest(fs::read(&out).unwrap()));
    assert_eq!(sidecar["csv_sha256"], digest.as_str());
    assert_eq!(sidecar["rows"], 8);
    assert_eq!(sidecar["command"], "run");
}

#[test]
fn both_engines_agree_row_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.toml", FIXED);
    let out = dir.path().join("both.csv");
    assert!(relaylab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows = records(&out);
    for scheme in ["basic", "baseline", "selection", "feedback"] {
        let pick = |engine: &str| rows.iter().find(|r| r["scheme"] == scheme && r["engine"] == engine).unwrap();
        let (a, m) = (pick("analytic"), pick("mc"));
        let exact: f64 = a["throughput"].parse().unwrap();
        let mean: f64 = m["throughput"].parse().unwrap();
        let se: f64 = m["throughput_se"].parse().unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "{scheme}: {mean} vs {exact} ± {se}");
        assert_eq!(m["n_trials"], "50000");
        assert_eq!(m["seed"], "9");
    }
    let basic = rows.iter().find(|r| r["scheme"] == "basic" && r["engine"] == "analytic").unwrap();
    assert_eq!(basic["energy_normalized"].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn sidecar_reingestion_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.toml",
        r#"
schemes = ["basic", "selection/nosic-lower", "feedback/sc-opt-relay"]
[sweep]
axis = "d_rb"
values = [100.0, 200.0]
[analytic]
cell_rel_tol = 1e-3
"#,
    );
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    assert!(relaylab(&["run", "--config", &cfg, "--out", first.to_str().unwrap()]).status.success());
    let sidecar = dir.path().join("first.csv.json");
    let o = relaylab(&["run", "--config", sidecar.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let rows = records(&first);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["axis"] == "d_rb"));
}

#[test]
fn cdf_ends_at_one_and_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cdf.toml",
        r#"
schemes = ["basic", "feedback"]
[cdf]
thresholds = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
"#,
    );
    let out = dir.path().join("cdf.csv");
    let o = relaylab(&["cdf", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&out);
    for scheme in ["basic", "feedback"] {
        let probs: Vec<f64> = rows.iter().filter(|r| r["scheme"] == scheme).map(|r| r["prob"].parse().unwrap()).collect();
        assert_eq!(probs.len(), 6);
        assert!(probs.windows(2).all(|w| w[0] <= w[1]), "{scheme}: {probs:?}");
        assert!((probs[5] - 1.0).abs() < 1e-12, "{scheme}: {probs:?}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("empty_sweep.toml", "[sweep]\naxis = \"d_rb\"\nvalues = []\n", "sweep"),
        ("unknown_key.toml", "[network]\nlamda = 1e-5\n", "lamda"),
        ("low_threshold.toml", "[network]\ntheta_db = -1.0\n", ">= 1"),
        ("bad_scheme.toml", "schemes = [\"relayless\"]\n", "relayless"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(dir.path(), name, text);
        let out = dir.path().join("never.csv");
        let o = relaylab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(stderr.contains(needle), "{name}: {stderr}");
    }
    assert_eq!(relaylab(&["run", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn tampered_tolerance_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "strict.toml", "[validate]\nchecks = [1]\nhypergeometric_rel_tol = 1e-20\n");
    let o = relaylab(&["validate", "--config", &cfg]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("[FAIL]"), "{stdout}");

    let cfg = write_config(dir.path(), "plain.toml", "[validate]\nchecks = [1]\n");
    let o = relaylab(&["validate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

fn cdf_curves(dir: &Path, schemes: &[&str], thresholds: &[f64]) -> HashMap<String, Vec<f64>> {
    let text = format!("schemes = {schemes:?}\n[cdf]\nthresholds = {thresholds:?}\n");
    let cfg = write_config(dir, "shape.toml", &text);
    let out = dir.join("shape.csv");
    let o = relaylab(&["cdf", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut curves: HashMap<String, Vec<f64>> = HashMap::new();
    for r in records(&out) {
        curves.entry(r["scheme"].clone()).or_default().push(r["prob"].parse().unwrap());
    }
    curves
}

#[test]
fn relaying_cdfs_at_150m() {
    // Baseline lifts the low tail but caps the cell centre; feedback keeps both.
    let dir = tempfile::tempdir().unwrap();
    let t: Vec<f64> = (1..=19).map(|i| i as f64 * 0.1).collect();
    let c = cdf_curves(dir.path(), &["basic", "baseline", "feedback"], &t);
    let diff: Vec<f64> = c["baseline"].iter().zip(&c["basic"]).map(|(a, b)| a - b).collect();
    assert!(diff.iter().any(|&d| d < -0.1), "{diff:?}");
    assert!(diff.iter().any(|&d| d > 0.1), "{diff:?}");
    // Two radial cells of the CDF grid (400 rings).
    for (f, b) in c["feedback"].iter().zip(&c["basic"]) {
        assert!(f <= &(b + 2.0 / 400.0), "feedback {:?} basic {:?}", c["feedback"], c["basic"]);
    }
}

#[test]
fn superposition_cdfs_at_150m() {
    // Relaying helps the cell edge; direct SC wins the high-throughput tail.
    let dir = tempfile::tempdir().unwrap();
    let c = cdf_curves(dir.path(), &["basic/sc-opt-relay", "feedback/sc-opt-relay"], &[0.1, 0.2, 1.5, 1.7]);
    let (direct, relayed) = (&c["basic/sc-opt-relay"], &c["feedback/sc-opt-relay"]);
    assert!(relayed[0] < direct[0] && relayed[1] < direct[1], "{direct:?} {relayed:?}");
    assert!(direct[2] < relayed[2] && direct[3] < relayed[3], "{direct:?} {relayed:?}");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = relaylab_cli::acceptance::determinism_config(&relaylab_cli::ExperimentConfig::default());
    let path = dir.path().join("determinism.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let o = relaylab(&["run", "--threads", threads, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
