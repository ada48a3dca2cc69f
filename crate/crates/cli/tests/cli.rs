use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_julia-thermo");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("spawn")
}

fn body_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dimension_of_chebyshev_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
command = "dimension"
seed = 11
lambda = [[-1.9, 0.0]]
solve = true
family = { name = "quadratic", relations = [{ critical_index = 0, preperiod = 2, period = 1 }] }
"#,
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("dimension.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "# seed = 11"));
    let lines = body_lines(&csv);
    assert_eq!(lines[0], "lambda_re,lambda_im,delta,residual,uncertainty");
    let cells: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((cells[0] + 2.0).abs() < 1e-10);
    assert!((cells[2] - 1.0).abs() < 1e-3);
}

#[test]
fn pressure_table_on_the_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["pressure", "--t", "0,0.5,1", "--depth", "10"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
    let lines = body_lines(&csv);
    assert_eq!(lines[0], "lambda_re,lambda_im,t,pressure,uncertainty");
    for line in &lines[1..] {
        let c: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((c[3] - (1.0 - c[2]) * std::f64::consts::LN_2).abs() < 1e-9);
    }
    assert_eq!(lines.len(), 4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"pressure\"\ndepth = 6\nt = [0.0]\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--t", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
    let lines = body_lines(&csv);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0.0,0.0,2.0,"));
    assert!(csv.contains("\"depth\":6"));
}

#[test]
fn joint_pressure_reduces_to_single_at_zero_t2() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["joint-pressure", "--lambda", "0.05,0.02", "--mu", "-0.04,0.03", "--t", "0.5,1", "--t2", "0", "--depth", "8"];
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let joint = std::fs::read_to_string(dir.path().join("joint_pressure.csv")).unwrap();
    let out = run(&["pressure", "--lambda", "0.05,0.02", "--t", "0.5,1", "--depth", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let single = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
    let j: Vec<&str> = body_lines(&joint)[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    let s: Vec<&str> = body_lines(&single)[1..].iter().map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(j, s);
}

#[test]
fn chi_star_outside_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["tower-spectrum", "--family", "quadratic", "--relation", "0,2,1", "--lambda", "-2,0", "--chi-star", "2.5"];
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 < chi_star < sqrt(chi_hat)"), "{err}");
    let report = read_json(&dir.path().join("failure.json"));
    assert_eq!(report["error"], "ParamOutOfRange");
}

#[test]
fn invalid_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["pressure", "--kappa", "3"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["metric-field"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["dimension", "--lambda", "1,2;3,4"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"pressure\"\nunknown_knob = 1\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // c = 1 is not Misiurewicz: the relation check fails
    let args = ["tower-spectrum", "--family", "quadratic", "--relation", "0,2,1", "--lambda", "1,0"];
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("failure.json"))["error"], "NotMisiurewicz");
}

#[test]
fn tower_spectrum_of_chebyshev() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["tower-spectrum", "--family", "quadratic", "--relation", "0,2,1", "--lambda", "-2,0", "--kmax", "8", "--mesh", "64", "--t", "1"];
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("tower_spectrum.json"));
    assert_eq!(report["header"]["constants"]["chi_hat"], 4.0);
    let eta = report["spectra"][0]["eta"].as_f64().unwrap();
    assert!((eta - 1.0).abs() < 5e-2, "eta {eta}");
    assert_eq!(report["spectra"][0]["K_max"], 8);
}

#[test]
fn distance_on_two_nodes_is_symmetric_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "distance",
        "--family",
        "cubic_pm_a",
        "--relation",
        "0,1,1",
        "--lambda",
        "1.7320508075688772,0.3;6,4.7",
        "--solve",
        "--grid",
        "1.72,1.74,0.29,0.31,2,1",
        "--kmax",
        "5",
        "--mesh",
        "32",
        "--threads",
        "2",
        "--seed",
        "3",
    ];
    let forward: Vec<&str> = base.iter().copied().chain(["--from", "0", "--to", "1"]).collect();
    let backward: Vec<&str> = base.iter().copied().chain(["--from", "1", "--to", "0"]).collect();
    let out = run(&forward, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = read_json(&dir.path().join("distance.json"));
    let bytes_a = std::fs::read(dir.path().join("distance.json")).unwrap();
    assert_eq!(run(&forward, dir.path()).status.code(), Some(0));
    assert_eq!(bytes_a, std::fs::read(dir.path().join("distance.json")).unwrap());
    assert_eq!(run(&backward, dir.path()).status.code(), Some(0));
    let b = read_json(&dir.path().join("distance.json"));
    let d = a["distance"].as_f64().unwrap();
    assert!(d > 0.0 && d.is_finite());
    assert_eq!(a["distance"], b["distance"]);
    assert_eq!(a["path"], serde_json::json!([0, 1]));
    assert_eq!(b["path"], serde_json::json!([1, 0]));
    assert_eq!(a["header"]["seed"], 3);
}
