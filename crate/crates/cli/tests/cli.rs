use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL: &str = r#"
output_dir = "unused"

[system]
equations = ["-2*x1", "-3*(x2 - x1^2)"]

[domain]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]

[collocation]
grid_n = 10
eta = 1e-10
fill_probe_resolution = 41

[test_grid]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
resolution = 21

[cpa]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
n = 20
b_override = [[6.0, 0.0], [0.0, 0.0]]

[oracle]
enabled = true
sample_points = [[1.0, 0.0], [0.5, -0.5]]
"#;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koopman-lyap"))
        .args(args)
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn bundled_configs_load() {
    for name in ["example1.cfg", "duffing.cfg"] {
        koopman_lyap_cli::load_config(&bundled(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn linearize_reports_diagonal_jacobian() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["linearize"], &bundled("example1.cfg"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("linearization.txt")).unwrap();
    assert!(text.contains("jacobian\n-2 0\n0 -3\n"), "{text}");
    let m = manifest(tmp.path());
    assert_eq!(m["eigenvalues"], serde_json::json!([-2.0, -3.0]));
}

#[test]
fn invalid_grid_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("grid_n = 10", "grid_n = 1"));
    let o = cli(&["run"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("collocation.grid_n"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("n = 20", "n = 20\nbogus = 1"));
    let o = cli(&["linearize"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 25"), "{}", stderr(&o));
}

#[test]
fn certify_without_coefficients_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = cli(&["certify"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("alpha_1.csv"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = cli(&["linearize"], &cfg, &blocker);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["linearize"], &tmp.path().join("nope.cfg"), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn staged_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = cli(&["lyapunov"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["alpha_1.csv", "alpha_2.csv", "rhs_1.csv", "centers.csv", "V.csv", "Vdot.csv", "diagnostics.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let o = cli(&["certify"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["command"], "certify");
    assert_eq!(m["cpa"]["vertices"], 441);
    assert_eq!(m["cpa"]["simplices"], 800);
    let failures = fs::read_to_string(out.join("cpa_failures.csv")).unwrap();
    assert!(failures.starts_with("simplex_index,vertex_index,x1,x2,lhs_margin\n"));
}

#[test]
fn runs_are_deterministic_and_manifest_is_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("fill_probe_resolution = 41", "fill_probe_resolution = 41\ndump_system = true"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = cli(&["run"], &cfg, dir);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    assert!(names.contains(&"gram_1.csv".to_string()));
    assert!(names.contains(&"oracle.csv".to_string()));
    for name in names.iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }

    let m = manifest(&a);
    let files = m["files"].as_array().unwrap();
    let listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(listed, names.iter().map(String::as_str).collect::<Vec<_>>());
    for f in files {
        let data = fs::read(a.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), data.len() as u64);
        let hex: String = Sha256::digest(&data).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hex);
    }
}

#[test]
fn surface_csv_has_header_and_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert!(cli(&["lyapunov"], &cfg, &out).status.success());
    let text = fs::read_to_string(out.join("Vdot.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21 * 21);
    assert!(rows.iter().all(|r| r.len() == 3));
}

#[test]
fn example1_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["run"], &bundled("example1.cfg"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(tmp.path());
    assert!(m["cpa"]["failure_radius"].as_f64().unwrap() <= 0.15, "{}", m["cpa"]);
    assert!(m["oracle_max_abs_diff"].as_f64().unwrap() <= 1e-2, "{}", m["oracle_max_abs_diff"]);
    let diag = fs::read_to_string(tmp.path().join("diagnostics.txt")).unwrap();
    assert!(diag.contains("fill_distance"), "{diag}");
}
