//! End-to-end runs of the `dephasing-sim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dephasing_sim::calibration::model_nd;
use dephasing_sim::environment::{read_tabulated_csv, EnvironmentSpectrum};
use dephasing_sim::{fit_spectrum, EnvParams};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dephasing-sim");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8(out.stdout).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, stdout) = run(args);
    assert_eq!(code, 0, "{args:?}");
    stdout
}

fn columns(csv_text: &str, header: &str) -> (Vec<f64>, Vec<f64>) {
    let mut lines = csv_text.lines();
    assert_eq!(lines.next(), Some(header));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap())
        })
        .unzip()
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn rises(d: &[f64]) -> f64 {
    d.windows(2).map(|w| w[1] - w[0]).filter(|&x| x > 1e-12).sum()
}

fn fitted_q0y() -> String {
    let fit: Value = serde_json::from_str(&ok(&["fit"])).unwrap();
    fit["q0y_fit"].as_f64().unwrap().to_string()
}

#[test]
fn env_structured_is_normalized() {
    let (q, d) = columns(&ok(&["env", "--q0y", "3", "--dv-mm", "2.14"]), "q_mm_inv,density");
    assert!((trapezoid(&q, &d) - 1.0).abs() < 1e-9);
}

#[test]
fn env_without_dv_is_gaussian() {
    let (q, d) = columns(&ok(&["env", "--q0y", "3", "--w0-mm", "0.88"]), "q_mm_inv,density");
    let w0: f64 = 0.88;
    let norm = w0 / (2.0 * std::f64::consts::PI).sqrt();
    for (q, d) in q.iter().zip(&d) {
        let expected = norm * (-w0 * w0 * (q - 3.0).powi(2) / 2.0).exp();
        assert!((d - expected).abs() < 1e-9, "{q}: {d} vs {expected}");
    }
}

#[test]
fn ingest_recovers_the_synthetic_beam() {
    let input = data("ccd_synthetic.csv");
    let (q, d) = columns(&ok(&["ingest", "--input", input.to_str().unwrap()]), "q_mm_inv,density");
    assert!((trapezoid(&q, &d) - 1.0).abs() < 1e-9);

    // the synthetic row was generated with w0 = 0.88, dv = 2.14, q0y = 2
    let truth = EnvParams::new(0.88, 2.0, 2.14, 0.0).unwrap();
    let cleaned = EnvironmentSpectrum::from_samples(q, d, None).unwrap();
    let guess = EnvParams::new(0.8, 2.2, 2.0, 0.0).unwrap();
    let fit = fit_spectrum(&cleaned, &guess).unwrap();
    assert!((fit.params.w0 / truth.w0 - 1.0).abs() < 0.03, "{:?}", fit.params);
    assert!((fit.params.dv / truth.dv - 1.0).abs() < 0.03, "{:?}", fit.params);
    assert!((fit.params.q0y - truth.q0y).abs() < 0.03 * truth.q0y, "{:?}", fit.params);

    let raw = read_tabulated_csv(fs::File::open(&input).unwrap()).unwrap();
    assert_eq!(raw.len(), cleaned.len());
}

#[test]
fn env_reads_input_like_ingest() {
    let input = data("ccd_synthetic.csv");
    let a = ok(&["env", "--input", input.to_str().unwrap()]);
    let b = ok(&["ingest", "--input", input.to_str().unwrap()]);
    assert_eq!(a, b);
}

#[test]
fn gaussian_trajectory_is_monotone() {
    let (dc, d) = columns(&ok(&["trajectory", "--q0y", "5"]), "dc_mm,trace_distance");
    assert_eq!(d[0], 1.0);
    assert_eq!(dc[0], 0.0);
    assert!(d.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn structured_trajectory_revives() {
    let q0y = fitted_q0y();
    let (_, d) = columns(&ok(&["trajectory", "--q0y", &q0y, "--dv-mm", "2.14"]), "dc_mm,trace_distance");
    assert_eq!(d[0], 1.0);
    let minima: Vec<usize> = (1..d.len() - 1).filter(|&i| d[i] < d[i - 1] && d[i] <= d[i + 1]).collect();
    let lowest = *minima.iter().min_by(|&&a, &&b| d[a].total_cmp(&d[b])).unwrap();
    let after = d[lowest..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(after - d[lowest] > 0.2, "revival {} over {}", after, d[lowest]);
}

#[test]
fn grid_doubling_from_files() {
    let q0y = fitted_q0y();
    let nd = |n: &str| {
        let text = ok(&["trajectory", "--q0y", &q0y, "--dv-mm", "2.14", "--dc-points", n]);
        rises(&columns(&text, "dc_mm,trace_distance").1)
    };
    let (a, b) = (nd("2000"), nd("4000"));
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn report_single_and_grid() {
    let q0y = fitted_q0y();
    let single: Value = serde_json::from_str(&ok(&["report", "--q0y", &q0y, "--dv-mm", "0.70"])).unwrap();
    assert!(single["nd"].as_f64().unwrap() <= 1e-3);
    assert_eq!(single["classification"], "Markovian");
    assert!(single["dc_max_mm"].is_null());

    let grid: Value = serde_json::from_str(&ok(&["report", "--q0y", &q0y, "--dv-grid", "1:2:0.25"])).unwrap();
    let dvs: Vec<f64> = grid.as_array().unwrap().iter().map(|r| r["dv_mm"].as_f64().unwrap()).collect();
    assert_eq!(dvs, [1.0, 1.25, 1.5, 1.75, 2.0]);

    let csv_text = ok(&["report", "--q0y", &q0y, "--dv-grid", "1:2:0.25", "--format", "csv"]);
    let mut lines = csv_text.lines();
    assert_eq!(lines.next(), Some("dv_mm,w0_mm,q0y_mm_inv,nd,classification,dc_max_mm"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn fit_recovers_self_generated_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut text = String::from("dv_mm,nd\n");
    for dv in [0.6, 0.9, 1.3, 1.8, 2.4] {
        text += &format!("{dv},{}\n", model_nd(0.88, 7.0, dv).unwrap());
    }
    fs::write(&path, text).unwrap();
    let fit: Value = serde_json::from_str(&ok(&["fit", "--table", path.to_str().unwrap()])).unwrap();
    assert!((fit["q0y_fit"].as_f64().unwrap() - 7.0).abs() < 1e-4, "{fit}");
    assert!(fit["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn bad_tables_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "dv_mm,nd\n").unwrap();
    let malformed = dir.path().join("bad.csv");
    fs::write(&malformed, "dv_mm,nd\n0.7,zero\n").unwrap();
    for path in [&empty, &malformed] {
        assert_eq!(run(&["fit", "--table", path.to_str().unwrap()]).0, 2);
    }
    assert_eq!(run(&["fit", "--table", "/nonexistent/table.csv"]).0, 2);
}

#[test]
fn config_file_with_flag_override_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("traj.csv");
    fs::write(&cfg, format!("q0y_mm_inv = 5\ndv_mm = 1.0\ndc_points = 300\noutput_path = {}\n", out.display())).unwrap();
    assert_eq!(ok(&["trajectory", "--config", cfg.to_str().unwrap(), "--dc-points", "400"]), "");
    let (dc, _) = columns(&fs::read_to_string(&out).unwrap(), "dc_mm,trace_distance");
    assert_eq!(dc.len(), 400);
    assert!((dc[399] - (1.0 + 4.0 * 0.88)).abs() < 1e-9);
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["env", "--w0-mm", "0"][..],
        &["report", "--dv-grid", "2:1:0.1"],
        &["trajectory", "--format", "yaml"],
        &["trajectory", "--dc-points", "5", "--q0y", "1"],
        &["env", "--dv-mm", "1", "--dv-grid", "1:2:0.5"],
        &["env", "--config", "/nonexistent.cfg"],
        &["frobnicate"],
    ] {
        assert_eq!(run(args).0, 2, "{args:?}");
    }
}
