use std::process::{Command, Output};

use serde_json::Value;

fn lacunary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacunary"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn generate_prints_shifted_rows() {
    let out = lacunary(&["generate", "--d", "3", "--n", "3", "--h-precision", "4", "--seed", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,x1,x2,x3");
    assert_eq!(lines.len(), 4);

    let bits = lacunary(&["generate", "--d", "2", "--n", "4", "--h-precision", "6", "--format", "bits"]);
    let text = String::from_utf8(bits.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for pair in rows.windows(2) {
        for i in 1..=2 {
            assert_eq!(&pair[0][i][1..], &pair[1][i][..5]);
        }
    }
}

#[test]
fn disc_reads_generated_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let p = path.to_str().unwrap();
    let gen = lacunary(&["generate", "--d", "2", "--n", "20", "--h-precision", "10", "--seed", "5", "--out", p]);
    assert!(gen.status.success());
    let from_file = json(&lacunary(&["disc", "--input", p, "--method", "exact"]));
    let direct = json(&lacunary(&[
        "disc", "--d", "2", "--n", "20", "--h-precision", "10", "--seed", "5", "--method", "exact",
    ]));
    assert_eq!(from_file["dstar"], direct["dstar"]);
    assert_eq!(from_file["method"], "exact");

    let b = json(&lacunary(&["disc", "--input", p, "--method", "brackets", "--delta", "1/64"]));
    assert!(b["lower_approx"].as_f64().unwrap() <= direct["dstar_approx"].as_f64().unwrap());
    assert!(b["upper_approx"].as_f64().unwrap() >= direct["dstar_approx"].as_f64().unwrap());
    assert_eq!(b["delta"], "1/64");
}

#[test]
fn cover_reports_grids() {
    let v = json(&lacunary(&["cover", "--d", "3", "--h", "2", "--snap", "--probe", "2000"]));
    assert_eq!(v["lower_corner_denominator"], 32);
    assert_eq!(v["upper_corner_denominator"], 64);
    assert_eq!(v["passed"], true);
    let base = json(&lacunary(&["cover", "--d", "2", "--delta", "1/4", "--probe", "100"]));
    assert_eq!(base["grid_cells_per_axis"], 8);
    assert_eq!(base["cardinality"], "64");
}

#[test]
fn bound_variants() {
    let v = json(&lacunary(&["bound", "--d", "2", "--n", "65536", "--eps", "0.1"]));
    assert!((v["value"].as_f64().unwrap() - 0.52513).abs() < 1e-5);
    assert_eq!(v["vacuous"], false);
    let h = json(&lacunary(&["bound", "--d", "2", "--n", "8", "--variant", "hnww", "--c-abs", "1"]));
    assert!((h["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let e = json(&lacunary(&["bound", "--d", "2", "--n", "8", "--variant", "existence", "--c-abs", "1"]));
    assert_eq!(e["value"], h["value"]);
}

#[test]
fn audit_passes() {
    let out = lacunary(&["audit"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn indep_counterexample() {
    let v = json(&lacunary(&["indep", "--d", "1", "--h", "0", "--n", "1", "--n-prime", "2", "--box", "0;1/4"]));
    assert_eq!(v["joint"]["factorization_gap"], "1/16");
    assert_eq!(v["gap_condition"], false);
    let ok = json(&lacunary(&["indep", "--d", "1", "--h", "0", "--n", "1", "--n-prime", "3", "--box", "0;1/4"]));
    assert_eq!(ok["joint"]["factorization_gap"], "0");
}

#[test]
fn verify_csv_columns_and_json() {
    let out = lacunary(&["verify", "--d", "2", "--n", "64", "--eps", "0.5", "--trials", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "trial,seed,d,N,H,method,dstar_lower,dstar_upper,bound_stated,bound_detailed,exceeded"
    );
    assert_eq!(text.lines().count(), 4);

    let v = json(&lacunary(&[
        "verify", "--d", "2", "--n-grid", "2^5..2^6", "--eps", "0.5", "--trials", "2", "--format", "json",
    ]));
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    assert_eq!(v["scaling"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["n_grid"], serde_json::json!([32, 64]));
}

#[test]
fn verify_accepts_json_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"d":2,"n_grid":[32],"epsilon":0.5,"trials":2,"master_seed":7}"#).unwrap();
    let a = lacunary(&["verify", "--config", cfg.to_str().unwrap()]);
    let b = lacunary(&["verify", "--d", "2", "--n", "32", "--eps", "0.5", "--trials", "2", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(lacunary(&["--help"]).status.code(), Some(0));
    assert_eq!(lacunary(&["bogus"]).status.code(), Some(1));
    assert_eq!(lacunary(&["verify", "--d", "2", "--n", "64"]).status.code(), Some(1));
    assert_eq!(lacunary(&["bound", "--d", "2", "--n", "64", "--eps", "2"]).status.code(), Some(1));
    // exact on a huge critical grid is infeasible
    let big = lacunary(&["disc", "--d", "3", "--n", "4096", "--method", "exact"]);
    assert_eq!(big.status.code(), Some(2));
    let guard = lacunary(&["indep", "--d", "2", "--h", "0", "--n", "1", "--n-prime", "20", "--box", "0,0;1/2,1/2"]);
    assert_eq!(guard.status.code(), Some(2));
}

#[test]
fn verify_gate_passes_in_vacuous_regime() {
    let out = lacunary(&["verify", "--d", "2", "--n", "128", "--eps", "0.1", "--trials", "4", "--gate"]);
    assert_eq!(out.status.code(), Some(0));
}
