use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psireg::io::{parse_table, read_dataset};
use psireg::{EstimatorConfig, KmFit, WeightedSample};

fn psireg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psireg"))
        .args(args)
        .output()
        .unwrap()
}

fn toy_file(dir: &Path, censored: bool) -> PathBuf {
    let mut text = String::from("x1,y,delta\n");
    for i in 0..60 {
        let x = i as f64 / 60.0;
        let delta = !censored || i % 3 != 0;
        text += &format!(
            "{x},{},{}\n",
            2.0 * x + 0.05 * ((i * 13) % 7) as f64,
            u8::from(delta)
        );
    }
    let path = dir.join(if censored { "toy.csv" } else { "full.csv" });
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_table(out: &Output) -> psireg::io::Table {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    parse_table(std::str::from_utf8(&out.stdout).unwrap())
        .unwrap()
        .1
}

#[test]
fn fit_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = toy_file(dir.path(), true);
    let p = path.to_str().unwrap();
    let table = stdout_table(&psireg(&[
        "fit",
        "--data",
        p,
        "--bandwidth",
        "0.15",
        "--x",
        "0.3",
        "--x",
        "0.7",
    ]));

    let data = read_dataset(&path).unwrap();
    let km = KmFit::from_observations(&data).unwrap();
    let cfg = EstimatorConfig::default().with_bandwidth(0.15);
    let sample = WeightedSample::with_km(&data, &km, cfg.km_floor).unwrap();
    for (row, x) in table.rows.iter().zip([0.3, 0.7]) {
        let local = sample.local(&[x], &cfg).unwrap();
        assert_eq!(
            row[1].as_f64().unwrap().to_bits(),
            local.solve().unwrap().to_bits()
        );
        assert_eq!(row[2].as_f64().unwrap().to_bits(), local.nw().to_bits());
    }
}

#[test]
fn km_on_uncensored_data_is_flat_then_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = toy_file(dir.path(), false);
    let table = stdout_table(&psireg(&["km", "--data", path.to_str().unwrap()]));
    let last = table.rows.len() - 1;
    for (i, row) in table.rows.iter().enumerate() {
        let s = row[1].as_f64().unwrap();
        assert_eq!(s, if i == last { 0.0 } else { 1.0 });
    }
}

#[test]
fn ci_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = toy_file(dir.path(), true);
    let out = psireg(&[
        "ci",
        "--data",
        path.to_str().unwrap(),
        "--bandwidth",
        "0.2",
        "--x",
        "0.5",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &doc["rows"][0];
    assert!(row["lo"].as_f64().unwrap() < row["hi"].as_f64().unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = toy_file(dir.path(), true);
    let p = path.to_str().unwrap();

    // usage: no data source, bad flag value
    assert_eq!(psireg(&["fit", "--x", "0.5"]).status.code(), Some(2));
    assert_eq!(
        psireg(&["fit", "--data", p, "--x", "0.5", "--bandwidth", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        psireg(&["fit", "--data", p, "--x", "0.5", "--kernel", "box"])
            .status
            .code(),
        Some(2)
    );

    // data: missing file, bad delta
    assert_eq!(
        psireg(&["fit", "--data", "/nonexistent.csv", "--x", "0.5"])
            .status
            .code(),
        Some(3)
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,y,delta\n0.1,1,7\n").unwrap();
    assert_eq!(
        psireg(&["km", "--data", bad.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    // estimation: nothing inside the window of a compact kernel
    let out = psireg(&[
        "fit",
        "--data",
        p,
        "--x",
        "5",
        "--kernel",
        "epanechnikov",
        "--bandwidth",
        "0.1",
        "--errors",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 4);
    assert_eq!(err["x"][0].as_f64(), Some(5.0));
}

#[test]
fn output_file_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let scenario =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/gmse_m2_n300_cr20.json");
    let out = dir.path().join("g.csv");
    let status = psireg(&[
        "gmse",
        "--scenario",
        scenario.to_str().unwrap(),
        "--replications",
        "3",
        "--bandwidth",
        "0.2",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(out.exists());
    let side = dir.path().join("g.csv.summary.json");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
    assert_eq!(doc["bandwidth_m"].as_f64(), Some(0.2));
}
