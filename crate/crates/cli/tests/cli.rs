use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_latelump");

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_config() -> Value {
    serde_json::from_str(&fs::read_to_string(root().join("configs/default.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(config: Option<&Path>, out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--out").arg(out).args(args).env_remove("LATELUMP_OUT");
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_report_valid(report: &Value) {
    let schema: Value = serde_json::from_str(&fs::read_to_string(root().join("schema/report.schema.json")).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errs: Vec<String> = v.iter_errors(report).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errs.is_empty(), "{errs:?}");
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Default config with a smaller window and sweep so debug builds stay fast.
fn small_config() -> Value {
    let mut c = default_config();
    c["window"] = serde_json::json!({"re_min": -40.0, "im_max": 120.0});
    c["convergence"]["n_max"] = 6.into();
    c["simulation"]["cells"] = 100.into();
    c["simulation"]["T"] = 1.0.into();
    c
}

#[test]
fn shipped_default_config_is_schema_valid_and_matches_reference() {
    let cfg = default_config();
    let schema: Value = serde_json::from_str(&fs::read_to_string(root().join("schema/config.schema.json")).unwrap()).unwrap();
    assert!(jsonschema::validator_for(&schema).unwrap().is_valid(&cfg));
    let parsed = latelump::config::RunConfig::from_json(&cfg.to_string()).unwrap();
    assert_eq!(parsed, latelump::config::RunConfig::reference());
}

#[test]
fn desired_spectrum_has_target_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(None, dir.path(), &["spectrum", "--which", "desired"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("spectrum_desired.csv"));
    let parsed: Vec<(f64, f64)> = rows.iter().map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap())).collect();
    assert!(parsed.iter().any(|(re, im)| (re + 12.0).abs() < 1e-10 && *im == 0.0));
    assert!(parsed.iter().filter(|(re, _)| (re + 10.0).abs() < 1e-10).count() >= 8);
    assert!(rows.iter().enumerate().all(|(i, r)| r[0] == "controller" && r[1] == i.to_string()));
}

#[test]
fn empty_window_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = default_config();
    c["window"]["re_min"] = (-1.0).into();
    let cfg = write_config(dir.path(), &c);
    let o = run(Some(&cfg), dir.path(), &["spectrum", "--which", "intermediate"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("spectrum_intermediate.csv")).unwrap(), "set,index,re,im\n");
}

#[test]
fn closed_loop_at_zero_order_is_byte_identical_to_intermediate() {
    let dir = tempfile::tempdir().unwrap();
    for basis in ["intermediate", "open_loop", "desired"] {
        assert_eq!(code(&run(None, dir.path(), &["spectrum", "--which", "closed_loop", "--n", "0", "--basis", basis])), 0);
        assert_eq!(code(&run(None, dir.path(), &["spectrum", "--which", "intermediate"])), 0);
        let a = fs::read(dir.path().join("spectrum_closed_loop.csv")).unwrap();
        let b = fs::read(dir.path().join("spectrum_intermediate.csv")).unwrap();
        assert_eq!(a, b, "basis {basis}");
    }
    assert_eq!(code(&run(None, dir.path(), &["spectrum", "--which", "observer_closed_loop", "--n", "0"])), 0);
    assert_eq!(code(&run(None, dir.path(), &["spectrum", "--which", "observer_intermediate"])), 0);
    assert_eq!(
        fs::read(dir.path().join("spectrum_observer_closed_loop.csv")).unwrap(),
        fs::read(dir.path().join("spectrum_observer_intermediate.csv")).unwrap()
    );
}

#[test]
fn invalid_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(None, dir.path(), &["spectrum", "--which", "sideways"])), 2);
}

#[test]
fn design_report_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(None, dir.path(), &["design"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("design.json"));
    assert_report_valid(&r);
    assert!((r["controller"]["rho"].as_f64().unwrap() + 0.7973).abs() < 1e-4);
    assert_eq!(r["controller"]["gains"].as_array().unwrap().len(), 10);
    assert_eq!(r["observer"]["l"].as_array().unwrap().len(), 10);
    assert!(r["assumptions_ok"].as_bool().unwrap());
    assert!(r["controller"]["assumptions"]["a2_bound_M"].as_f64().unwrap() > 0.0);
}

#[test]
fn design_rejects_mu_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = default_config();
    c["controller_target"]["mu"] = 1.5.into();
    let cfg = write_config(dir.path(), &c);
    let o = run(Some(&cfg), dir.path(), &["design"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("design.json").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(Some(&dir.path().join("missing.json")), dir.path(), &["design"])), 2);
    let p = dir.path().join("broken.json");
    fs::write(&p, "{ not json").unwrap();
    assert_eq!(code(&run(Some(&p), dir.path(), &["design"])), 2);
    let mut c = default_config();
    c["unexpected"] = 1.into();
    assert_eq!(code(&run(Some(&write_config(dir.path(), &c)), dir.path(), &["design"])), 2);
    let mut c = default_config();
    c["controller_target"]["kappa"] = serde_json::json!([12.0, 0.0]);
    assert_eq!(code(&run(Some(&write_config(dir.path(), &c)), dir.path(), &["design"])), 2);
}

#[test]
fn design_without_observer_omits_section() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.as_object_mut().unwrap().remove("observer_target");
    let cfg = write_config(dir.path(), &c);
    assert_eq!(code(&run(Some(&cfg), dir.path(), &["design"])), 0);
    let r = read_json(&dir.path().join("design.json"));
    assert_report_valid(&r);
    assert!(r.get("observer").is_none());
    assert_eq!(code(&run(Some(&cfg), dir.path(), &["observe"])), 2);
}

#[test]
fn converge_intermediate_reaches_order_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = default_config();
    c["convergence"]["n_max"] = 10.into();
    let cfg = write_config(dir.path(), &c);
    let o = run(Some(&cfg), dir.path(), &["converge"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("converge.json"));
    assert_report_valid(&r);
    assert!(r["minimal_order"]["suffix"].as_u64().unwrap() <= 3);
    let rows = csv_rows(&dir.path().join("converge.csv"));
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[2][0], "3");
    assert_eq!(rows[2][5], "true");
}

#[test]
fn converge_unmet_criterion_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(None, dir.path(), &["converge", "--n-min", "1", "--n-max", "2"]);
    assert_eq!(code(&o), 4);
    let r = read_json(&dir.path().join("converge.json"));
    assert_report_valid(&r);
    assert!(!r["criterion_met"].as_bool().unwrap());
}

#[test]
fn converge_margin_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let o = run(Some(&cfg), dir.path(), &["converge", "--margin", "-9", "--n-min", "3", "--n-max", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("converge.json"));
    assert_report_valid(&r);
    assert_eq!(r["criterion"]["margin"].as_f64().unwrap(), -9.0);
}

#[test]
fn simulate_default_matches_spectral_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(None, dir.path(), &["simulate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&dir.path().join("simulate.json"));
    assert_report_valid(&s);
    assert!(s["relative_gap"].as_f64().unwrap() < 0.1);
    let head = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    assert!(head.starts_with("t,energy,u_re,u_im\n"));
}

#[test]
fn simulate_zero_state_and_zero_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c["simulation"]["x0"] = "zero".into();
    let cfg = write_config(dir.path(), &c);
    assert_eq!(code(&run(Some(&cfg), dir.path(), &["simulate"])), 0);
    let rows = csv_rows(&dir.path().join("simulate.csv"));
    assert!(rows.len() > 1);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0)));
    assert_report_valid(&read_json(&dir.path().join("simulate.json")));

    let mut c = small_config();
    c["simulation"]["T"] = 0.0.into();
    let cfg = write_config(dir.path(), &c);
    assert_eq!(code(&run(Some(&cfg), dir.path(), &["simulate"])), 0);
    assert_eq!(csv_rows(&dir.path().join("simulate.csv")).len(), 1);
}

#[test]
fn observe_reports_duality_and_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let o = run(Some(&cfg), dir.path(), &["observe", "--n", "4", "--n-min", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("observe.json"));
    assert_report_valid(&r);
    assert!(r["duality_defect"].as_f64().unwrap() < 1e-6);
    assert!(r["flat_residual_max"].as_f64().unwrap() < 1e-9);
    assert!(r["simulate"]["relative_gap"].as_f64().unwrap() < 0.1);
    assert!(dir.path().join("observe_trace.csv").exists());
    assert!(dir.path().join("observe_converge.csv").exists());
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = write_config(cfg_dir.path(), &small_config());
    for d in [a.path(), b.path()] {
        assert_eq!(code(&run(Some(&cfg), d, &["design"])), 0);
        assert_eq!(code(&run(Some(&cfg), d, &["converge"])), 0);
        assert_eq!(code(&run(Some(&cfg), d, &["spectrum", "--which", "closed_loop"])), 0);
    }
    for f in ["design.json", "converge.json", "converge.csv", "spectrum_closed_loop.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let meta = read_json(&a.path().join("design.meta.json"));
    assert!(meta["unix_time"].is_u64());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(BIN)
        .args(["spectrum", "--which", "desired"])
        .env("LATELUMP_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("spectrum_desired.csv").exists());
}
