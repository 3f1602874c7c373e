use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pseudomode"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eta_example_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eta", "--which", "1", "--r", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("eta1(0) = 1.0903"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("eta.csv")).unwrap();
    assert!(csv.starts_with("r,eta,series\n"));
    let rep = report(dir.path());
    assert_eq!(rep["status"], "ok");
    assert!(rep["summary"]["max_series_difference"].as_f64().unwrap() < 1e-8);
}

#[test]
fn csv_numbers_use_fixed_scientific_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce-fig3", "--n", "20", "--points", "7", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("omega,j,j_eff"));
    for line in lines {
        for field in line.split(',') {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "{field}");
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    std::fs::write(&cfg, "version = 9\ncommand = \"eta\"\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(&cfg, "version = 1\ncommand = \"jeff\"\n[omega]\nmin = 1.0\nmax = 0.0\ncount = 5\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let out = dir.path().join("o");
    let o = run(&["fit", "--strategy", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prony"));
    assert_eq!(report(&out)["exit_code"], 2);

    assert_eq!(run(&["invert", "--fit-table", "/definitely/missing.csv"]).status.code(), Some(2));
}

#[test]
fn fit_then_invert_lorentzian_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fit.toml");
    std::fs::write(
        &cfg,
        r#"
version = 1
command = "fit"
output = "fit_out"
[model]
kind = "lorentzian_sum"
terms = [
  { amplitude = 0.5, center = -0.5, width = 0.4 },
  { amplitude = 0.3, center = 0.8, width = 0.6 },
]
[fit]
modes = 2
"#,
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit_dir = dir.path().join("fit_out");
    assert!(report(&fit_dir)["summary"]["l2_residual"].as_f64().unwrap() < 1e-8);

    let inv = dir.path().join("inv");
    let o = run(&[
        "invert",
        "--fit-table",
        fit_dir.join("fit.csv").to_str().unwrap(),
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&inv);
    assert!(rep["summary"]["min_gamma"].as_f64().unwrap() >= 0.0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(inv.join("inversion.json")).unwrap()).unwrap();
    for key in ["fit", "choices", "lambda", "gamma", "zeta", "diagnostics"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }

    let jeff = dir.path().join("jeff");
    let o = run(&[
        "jeff",
        "--bath",
        inv.join("bath.json").to_str().unwrap(),
        "--omega-min",
        "-2",
        "--omega-max",
        "2",
        "--omega-count",
        "41",
        "--out",
        jeff.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(jeff.join("jeff.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let w = v[0];
        let exact = 0.5 * 0.4 / ((w + 0.5).powi(2) + 0.04) + 0.3 * 0.6 / ((w - 0.8).powi(2) + 0.09);
        assert!((v[1] - exact).abs() < 1e-7, "omega {w}: {} vs {exact}", v[1]);
    }
}

#[test]
fn infeasible_fit_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("fit.csv");
    std::fs::write(&table, "k,re_kappa,im_kappa,eps,gamma,power\n0,-1.0,0.0,0.0,1.0,0\n").unwrap();
    let o = run(&["invert", "--fit-table", table.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report(dir.path())["status"], "failed");
}

#[test]
fn transmit_inline_setup_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.json");
    std::fs::write(
        &reference,
        r#"{"h_s": [[[0.1, 0.0]]], "baths": [
 {"label": "L", "model": {"kind": "lorentzian_sum", "terms": [{"amplitude": 0.25, "center": 0.0, "width": 0.5}]}},
 {"label": "R", "model": {"kind": "lorentzian_sum", "terms": [{"amplitude": 0.36, "center": 1.0, "width": 0.8}]}}]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(
        &cfg,
        r#"
version = 1
command = "transmit"
output = "out"
[inputs]
reference = "ref.json"
[omega]
min = -3.0
max = 3.0
count = 201
[setup]
h_s = [[[0.1, 0.0]]]
[[setup.baths]]
label = "L"
pseudomode = { lambda = [[[0.0, 0.0]]], gamma = [0.5], zeta = [[[0.5, 0.0]]] }
[[setup.baths]]
label = "R"
pseudomode = { lambda = [[[1.0, 0.0]]], gamma = [0.8], zeta = [[[0.6, 0.0]]] }
"#,
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&dir.path().join("out"));
    assert!(rep["summary"]["max_abs_difference_to_reference"].as_f64().unwrap() < 1e-10);
    assert!(rep["summary"]["max_abs_residual_aggregation_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn fig2_is_deterministic_and_prony_wins() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&["reproduce-fig2", "--seed", "11", "--threads", threads, "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["fig2_true.csv", "fig2_diagonal.csv", "fig2_prony.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let rep = report(a.path());
    let s = &rep["summary"]["fig2"];
    assert!(s["prony_l2"].as_f64().unwrap() < s["baseline_l2"].as_f64().unwrap());
    let header = std::fs::read_to_string(a.path().join("fig2_diagonal.csv")).unwrap();
    assert!(header.starts_with("omega,j_fit,mode_0,"));
}

#[test]
fn tile_reports_nonconvergence_factor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tile.toml");
    std::fs::write(
        &cfg,
        r#"
version = 1
command = "tile"
output = "out"
[model]
kind = "flat_window"
gamma0 = 1.0
omega_min = -1.0
omega_max = 1.0
[tile]
variant = "lorentzian"
n = 200
"#,
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let rep = report(&dir.path().join("out"));
    assert!(rep["summary"]["max_interior_deviation"].as_f64().unwrap() <= 5e-3);
    assert!((rep["summary"]["eta_at_centers"].as_f64().unwrap() - 1.0903).abs() < 1e-4);
}
