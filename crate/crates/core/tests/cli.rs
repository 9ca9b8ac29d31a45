use std::path::{Path, PathBuf};
use std::process::Command;

fn p2h(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_p2h"))
        .current_dir(dir)
        .args(args)
        .env_remove("P2H_PRECISION")
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_eq_latex_for_n2() {
    let d = scratch();
    let (code, _) = p2h(d.path(), &["gen-eq", "--n", "2", "--format", "latex", "-o", "p24.tex"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(d.path().join("p24.tex")).unwrap();
    assert!(text.contains("V_{4x} = -6V^{5} + 10V^{2}V_{2x} + 10VV_{x}^{2} + xV + \\alpha"));
    assert!(text.contains("% config: "));
}

#[test]
fn invalid_n_is_a_validation_error() {
    let d = scratch();
    let (code, err) = p2h(d.path(), &["gen-eq", "--n", "0"]);
    assert_eq!(code, 2);
    assert!(err.contains("n must be at least 1"));
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 0);
    let (code, _) = p2h(d.path(), &["series", "--n", "1", "--kind", "zero", "--alpha", "0"]);
    assert_eq!(code, 2);
    let (code, _) = p2h(d.path(), &["no-such-command"]);
    assert_eq!(code, 2);
}

#[test]
fn series_matches_golden_file() {
    let d = scratch();
    let (code, _) = p2h(d.path(), &["series", "--n", "1", "--kind", "infty", "--K", "6", "--alpha", "0", "--format", "json"]);
    assert_eq!(code, 0);
    let v = json(d.path().join("series.json"));
    let golden = json(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden/v1/series_n1_infty_K6.json"));
    assert_eq!(v["result"], golden);
    assert_eq!(v["config"]["command"]["series"]["n"], 1);
    assert!(v["version"].as_str().unwrap().starts_with("p2-hierarchy "));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let d = scratch();
    let args = ["polemap", "--n", "1", "--half-width", "1.5", "--count", "6", "-o", "a.csv"];
    assert_eq!(p2h(d.path(), &args).0, 0);
    let first = std::fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(p2h(d.path(), &args).0, 0);
    assert_eq!(first, std::fs::read(d.path().join("a.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.lines().any(|l| l.starts_with("angle,pole_radius,trigger")));
    assert!(!text.contains(';') || text.contains("error"));
}

#[test]
fn integrate_reads_a_path_file() {
    let d = scratch();
    std::fs::write(
        d.path().join("path.json"),
        r#"{"start": [-30, 52], "segments": [{"arc": {"center": [0, 0], "sweep": -0.2}}, {"line": {"to": [-20, 40]}}]}"#,
    )
    .unwrap();
    let (code, err) = p2h(d.path(), &["integrate", "--n", "1", "--path", "path.json", "--spacing", "2"]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(d.path().join("integrate.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "re_x,im_x,re_y1,im_y1,re_y2,im_y2,err");
    let last = text.lines().filter(|l| !l.starts_with('#')).last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cols[0] + 20.0).abs() < 1e-9 && (cols[1] - 40.0).abs() < 1e-9);
}

#[test]
fn tolerance_outside_range_is_rejected() {
    let d = scratch();
    std::fs::write(d.path().join("p.json"), r#"{"start": [5, 0], "segments": [{"line": {"to": [6, 0]}}]}"#).unwrap();
    let (code, _) = p2h(d.path(), &["integrate", "--n", "1", "--path", "p.json", "--tol", "1e-3"]);
    assert_eq!(code, 2);
}

#[test]
fn sectors_and_rates() {
    let d = scratch();
    assert_eq!(p2h(d.path(), &["sectors", "--n", "2"]).0, 0);
    let v = json(d.path().join("sectors.json"));
    assert_eq!(v["result"]["rays"].as_array().unwrap().len(), 5);
    assert_eq!(p2h(d.path(), &["rates", "--n", "1"]).0, 0);
    let text = std::fs::read_to_string(d.path().join("rates.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "angle,re_nu_1,re_nu_2,re_char_1,re_char_2");
    assert_eq!(rows.len(), 4);
}

#[test]
fn measured_rates_short_window_is_a_fit_error() {
    let d = scratch();
    let (code, _) = p2h(d.path(), &["rates", "--n", "1", "--measure", "--angles", "0.5", "--window", "20,20.5", "--chunks", "2"]);
    assert_eq!(code, 5);
}

#[test]
fn verify_reports_each_check() {
    let d = scratch();
    let (code, _) = p2h(d.path(), &["verify", "--n", "1"]);
    let v = json(d.path().join("verify.json"));
    let checks = v["result"]["checks"].as_array().unwrap();
    let pass = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap()["pass"].as_bool().unwrap();
    assert!(pass("structure") && pass("beta") && pass("series_exact_vs_float"));
    assert_eq!(code, if v["result"]["all_pass"].as_bool().unwrap() { 0 } else { 3 });
}

#[test]
fn extended_precision_is_unavailable() {
    let d = scratch();
    let out = Command::new(env!("CARGO_BIN_EXE_p2h"))
        .current_dir(d.path())
        .args(["sectors", "--n", "1"])
        .env("P2H_PRECISION", "extended")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
