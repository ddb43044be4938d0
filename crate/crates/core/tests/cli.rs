use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gp-limit-lab");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).args(["--out", out.to_str().unwrap()]).output().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn audit_exits_zero_and_marks_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["audit"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("audit.csv"));
    let header = csv.lines().next().unwrap();
    assert!(header.ends_with("config_hash,c,c_prime"));
    assert!(csv.lines().any(|l| l.starts_with("sharpness,") && l.contains(",false,false,")));
    assert!(csv.lines().filter(|l| l.starts_with("quadratic_opnorm,")).count() == 16);
}

#[test]
fn coefficient_table_for_relu() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["coeffs", "--activation", "relu", "--dmax", "12"], dir.path());
    assert!(out.status.success());
    let csv = read(&dir.path().join("coeffs.csv"));
    assert_eq!(csv.lines().count(), 14);
    let row4: Vec<&str> = csv.lines().nth(5).unwrap().split(',').collect();
    assert_eq!(row4[0], "4");
    assert!((row4[4].parse::<f64>().unwrap() - 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn sigma_writes_spectrum_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sigma", "--poly", "0,0,1", "--n", "4"], dir.path());
    assert!(out.status.success());
    let spectrum = read(&dir.path().join("sigma_spectrum.csv"));
    let first: Vec<&str> = spectrum.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert!((first[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    let last = spectrum.lines().last().unwrap().split(',').nth(2).unwrap().parse::<f64>().unwrap();
    assert!((last - 1.0).abs() < 1e-12);
    let audit = read(&dir.path().join("sigma_audit.csv"));
    assert!(audit.lines().skip(1).all(|l| l.split(',').nth(3) == Some("true")));
}

#[test]
fn sample_then_distance_on_marginals_and_point_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let out = run(&["sample", "--activation", "tanh", "--k", "4", "--points", "3", "--reps", "50"], &s);
    assert!(out.status.success());
    let marg = read(&s.join("marginals.csv"));
    assert_eq!(marg.lines().count(), 1 + 50 * 3);
    assert!(marg.starts_with("rep_id,point_id,value,"));
    assert!(read(&s.join("kernel.csv")).lines().count() == 1 + 9);

    let d = dir.path().join("d");
    let a = s.join("marginals.csv");
    let b = s.join("gp_marginals.csv");
    let out = run(&["distance", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--method", "exact"], &d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(&d.join("estimate.json"))).unwrap();
    assert_eq!(json["estimate"]["normalization"]["m"], 3);
    assert_eq!(json["estimate"]["squared"], true);
    assert_eq!(json["constants"]["c_prime"], 1.0);

    let cloud = dir.path().join("cloud.csv");
    std::fs::write(&cloud, "x,y\n0,0\n1,0\n").unwrap();
    let shifted = dir.path().join("shifted.csv");
    std::fs::write(&shifted, "x,y\n0,2\n1,2\n").unwrap();
    let e = dir.path().join("e");
    let out = run(&["distance", "--a", cloud.to_str().unwrap(), "--b", shifted.to_str().unwrap()], &e);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&read(&e.join("estimate.json"))).unwrap();
    assert_eq!(json["estimate"]["value"], 4.0);
    assert_eq!(json["estimate"]["normalization"]["kind"], "raw");
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small\nactivation = poly:0,0,1\nreps = 32\npoints = 2\nbootstrap = 3\nk_grid = 4..7\n").unwrap();
    let out = run(&["rate", "--config", cfg.to_str().unwrap(), "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rate = read(&dir.path().join("rate.csv"));
    assert_eq!(rate.lines().count(), 1 + 2 * 4);
    let fit = read(&dir.path().join("rate_fit.csv"));
    assert_eq!(fit.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_str(&read(&dir.path().join("config.json"))).unwrap();
    assert_eq!(json["seed"], 3);
    assert_eq!(json["k_grid"], serde_json::json!([16, 32, 64, 128]));
    let hash = json["config_hash"].as_str().unwrap();
    assert!(rate.lines().skip(1).all(|l| l.contains(hash)));
}

#[test]
fn bad_input_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "k_grid = 64, 16\n").unwrap();
    let out = run(&["rate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
    let out = run(&["coeffs", "--set", "colour=red"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dimension_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .env("GPLL_MAX_DIM", "5")
        .args(["sigma", "--poly", "0,0,1", "--n", "4", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds cap"));
}
