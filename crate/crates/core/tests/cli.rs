//! End-to-end checks of the magspec binary: output schemas, determinism,
//! exit codes, and export files.

mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

fn magspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("magspec-cli-int");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn spectrum_circle_matches_oracles() {
    let out = magspec(&[
        "spectrum",
        "--model",
        "circle",
        "--L",
        "6.283185307179586",
        "--n",
        "512",
        "--A",
        "0.5",
        "--k",
        "6",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let values: Vec<f64> = v["spectrum"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let expect = [0.25, 0.25, 2.25, 2.25, 6.25, 6.25];
    for (got, want) in values.iter().zip(expect) {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
    // Against the exact discrete dispersion the agreement is much tighter.
    let oracle = common::circle_discrete_spectrum(6.283185307179586, 512, 0.5, 6);
    for (got, want) in values.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-10, "{got} vs discrete {want}");
    }
    assert!(v["config"]["timestamp_unix"].is_null());
    assert_eq!(v["config"]["n"], 512);
}

#[test]
fn spectrum_timestamp_present_by_default() {
    let out = magspec(&["spectrum", "--model", "circle", "--n", "64", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["config"]["timestamp_unix"].as_u64().is_some());
}

#[test]
fn torus_and_sphere_spectra() {
    let out = magspec(&[
        "spectrum", "--model", "torus", "--n1", "16", "--n2", "16", "--A", "0", "--B", "0",
        "--k", "1", "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let l1 = v["spectrum"]["eigenvalues"][0].as_f64().unwrap();
    assert!(l1.abs() < 1e-9, "torus zero-potential lambda_1 = {l1}");

    let out = magspec(&[
        "spectrum", "--model", "sphere", "--sub", "4", "--s", "0", "--k", "4", "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let values: Vec<f64> = v["spectrum"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(values[0].abs() < 1e-6);
    for l in &values[1..4] {
        assert!((l - 2.0).abs() < 0.01 * 2.0, "sphere eigenvalue {l}");
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "spectrum", "--model", "circle", "--n", "128", "--A", "0.3", "--k", "3",
        "--no-timestamp",
    ];
    let a = magspec(&args);
    let b = magspec(&args);
    assert_eq!(a.stdout, b.stdout);

    let sweep_args = [
        "sweep", "--param", "A", "--from", "0", "--to", "0.5", "--steps", "4", "--model",
        "circle", "--n", "64", "--k", "2", "--no-timestamp", "--jobs", "2",
    ];
    let a = magspec(&sweep_args);
    let b = magspec(&sweep_args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    // Usage errors exit 1.
    assert_eq!(magspec(&["spectrum", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(
        magspec(&["verify", "--theorem", "9.9", "--model", "circle", "--n", "64"])
            .status
            .code(),
        Some(1)
    );
    let conf = tmp("bad.conf");
    std::fs::write(&conf, "no equals sign here\n").unwrap();
    let out = magspec(&["spectrum", "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // k > N is a request error, not a solver failure.
    let out = magspec(&["spectrum", "--model", "circle", "--n", "8", "--k", "9"]);
    assert_eq!(out.status.code(), Some(1));

    // An unreachable residual tolerance is a solver failure: exit 2.
    let out = magspec(&[
        "spectrum", "--model", "circle", "--n", "64", "--A", "0.3", "--k", "2", "--tol",
        "1e-30", "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // All-holds verification exits 0.
    let out = magspec(&[
        "verify", "--theorem", "shigekawa", "--model", "circle", "--n", "128", "--A", "1.0",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["holds"], true);
}

#[test]
fn csv_format_and_config_echo() {
    let out = magspec(&[
        "spectrum", "--model", "circle", "--n", "64", "--k", "2", "--format", "csv",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# model = \"circle\""));
    assert!(text.contains("# n = 64"));
    assert!(text.contains("index,eigenvalue,residual"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);
}

#[test]
fn config_file_with_flag_override() {
    let conf = tmp("run.conf");
    std::fs::write(&conf, "model = circle\nn = 64\nA = 0.25\nk = 2\n").unwrap();
    let out = magspec(&[
        "spectrum", "--config", conf.to_str().unwrap(), "--k", "3", "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["n"], 64);
    assert_eq!(v["config"]["k"], 3, "flag overrides file");
    assert_eq!(v["spectrum"]["eigenvalues"].as_array().unwrap().len(), 3);
}

#[test]
fn export_files() {
    let off = tmp("mesh.off");
    let mm = tmp("stiffness.mtx");
    let evec = tmp("vectors.bin");
    let out = magspec(&[
        "spectrum", "--model", "sphere", "--sub", "2", "--s", "0.1", "--k", "2",
        "--no-timestamp",
        "--export-off", off.to_str().unwrap(),
        "--export-mm", mm.to_str().unwrap(),
        "--export-evec", evec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let off_text = std::fs::read_to_string(&off).unwrap();
    assert!(off_text.starts_with("OFF\n162 320 0\n"));
    let mm_text = std::fs::read_to_string(&mm).unwrap();
    assert!(mm_text.starts_with("%%MatrixMarket matrix coordinate complex hermitian"));
    let evec_bytes = std::fs::read(&evec).unwrap();
    assert_eq!(&evec_bytes[0..8], b"MSPECV01");
    assert_eq!(evec_bytes.len(), 24 + 2 * 162 * 16);

    let part = tmp("partition.csv");
    let out = magspec(&[
        "cheeger", "--model", "circle", "--n", "64", "--A", "2.5", "--k", "2", "--no-timestamp",
        "--export-partition", part.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let part_text = std::fs::read_to_string(&part).unwrap();
    assert!(part_text.starts_with("vertex,part\n"));
    assert_eq!(part_text.lines().count(), 1 + 64);
}

#[test]
fn cheeger_output_schema() {
    let out = magspec(&[
        "cheeger", "--model", "circle", "--n", "256", "--A", "0.25", "--k", "1",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["gauge_trivial"], false);
    let rep = &v["reports"][0];
    assert_eq!(rep["directionality"], "upper-bound-on-h_k");
    let h = rep["h_estimate"].as_f64().unwrap();
    assert!((h - 0.25).abs() < 0.03 * 0.25, "h1 = {h}");
    assert!(rep["parts"][0]["ratio"].as_f64().is_some());
}

#[test]
fn sweep_csv_and_gnuplot() {
    let csv = tmp("sweep.csv");
    let plot = tmp("sweep.gp");
    let out = magspec(&[
        "sweep", "--param", "A", "--from", "0", "--to", "1", "--steps", "5", "--model",
        "circle", "--n", "64", "--k", "2", "--no-timestamp",
        "--out", csv.to_str().unwrap(),
        "--gnuplot", plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap();
    assert_eq!(
        header,
        "index,A,lambda_1,lambda_2,h_1,h_2,buser_k1,higher_buser_k1,buser1,cheeger25a,buser_k2,higher_buser_k2"
    );
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert!(row.contains("holds"));
        assert!(!row.contains("violated"));
    }
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert!(plot_text.contains("plot"));
}

#[test]
fn verify_heat_and_bochner_exit_zero() {
    let out = magspec(&[
        "verify", "--theorem", "heat", "--model", "circle", "--n", "100", "--A", "0.5",
        "--samples", "4", "--t-grid", "0.1,1", "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["holds"], true);

    let out = magspec(&[
        "verify", "--theorem", "bochner", "--model", "circle", "--n", "64", "--A", "0.5",
        "--no-timestamp",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let order = v["payload"]["order"].as_f64().unwrap();
    assert!((1.5..=2.5).contains(&order), "order {order}");
}
