use std::path::PathBuf;
use std::process::{Command, Output};

use popcode::thermal_codec::exact_codec_error;
use serde_json::Value;

fn popcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popcode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("popcode-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn known_case_reports_zero() {
    let v = json(&popcode(&[
        "run", "--case", "0", "--n", "100", "--delta", "0.2",
    ]));
    assert_eq!(v["epsilon_hat"], 0.0);
    assert_eq!(v["ledger"]["cbits"], 0.0);
    assert_eq!(v["ledger"]["qubits"], 0.0);
}

#[test]
fn thermal_case_reports_the_exact_error() {
    let v = json(&popcode(&[
        "run", "--case", "thermal", "--n", "65536", "--beta", "0.3", "--delta", "0.2",
    ]));
    let exact = exact_codec_error(65536, 0.3, 0.2).unwrap();
    assert_eq!(v["exact_error"].as_f64().unwrap(), exact);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "run", "--case", "2", "--n", "10000", "--delta", "0.3", "--alpha", "0.3+0i", "--beta",
        "0.2", "--seed", "7", "--mc", "200",
    ];
    let a = popcode(&args);
    let b = popcode(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sidecar_hash_tracks_the_configuration() {
    let hash = |seed: &str, file: &str| {
        let out = scratch(file);
        let o = popcode(&[
            "run",
            "--case",
            "3",
            "--n",
            "300",
            "--delta",
            "0.2",
            "--alpha",
            "0.2-0.1i",
            "--beta",
            "0.3",
            "--mc",
            "5",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let meta: Value =
            serde_json::from_slice(&std::fs::read(format!("{}.meta.json", out.display())).unwrap())
                .unwrap();
        assert!(meta["timestamp"].is_string());
        meta["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("1", "h1.json"), hash("1", "h2.json"));
    assert_ne!(hash("1", "h3.json"), hash("2", "h4.json"));
}

#[test]
fn exit_codes() {
    assert_eq!(
        popcode(&["run", "--case", "9", "--n", "10", "--delta", "0.2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        popcode(&["run", "--case", "2", "--n", "100", "--delta", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(popcode(&["run", "--n", "100"]).status.code(), Some(2));
    let o = popcode(&[
        "run", "--case", "2", "--n", "10000", "--delta", "0.3", "--alpha", "0.3", "--beta", "0.2",
        "--cutoff", "8", "--mc", "5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn thermal_sweep_rows_decrease() {
    let out = scratch("sweep.csv");
    let o = popcode(&[
        "sweep",
        "--case",
        "thermal",
        "--n",
        "2^8..2^16",
        "--beta",
        "0.3",
        "--delta",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        popcode::cli::CSV_HEADER.to_vec()
    );
    let eps: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[6].parse().unwrap())
        .collect();
    assert_eq!(eps.len(), 9);
    assert!(eps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn fit_recovers_an_exact_power_law() {
    let path = scratch("power.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(popcode::cli::CSV_HEADER).unwrap();
    for k in 8..=16 {
        let n = 1u64 << k;
        let eps = (n as f64).powf(-0.2);
        w.write_record([
            "1",
            &n.to_string(),
            "0.2",
            "0",
            "0",
            "0.3",
            &eps.to_string(),
            "0",
            "0",
            "0",
            "0",
            "0",
            "0",
            "0",
        ])
        .unwrap();
    }
    w.flush().unwrap();
    let v = json(&popcode(&["fit", path.to_str().unwrap()]));
    let slope = v[0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 0.2).abs() < 1e-9);
}

#[test]
fn malformed_csv_is_a_usage_error() {
    let path = scratch("bad.csv");
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert_eq!(
        popcode(&["fit", path.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn audit_of_case_three_passes() {
    let v = json(&popcode(&[
        "audit", "--case", "3", "--n", "10^6", "--delta", "0.1",
    ]));
    assert_eq!(v[0]["verdict"], "pass");
    let bad = popcode(&[
        "audit", "--case", "3", "--n", "10^6", "--delta", "0.1", "--f", "2",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
