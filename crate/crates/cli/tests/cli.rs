use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn perturbdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perturbdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the pmf of the (0.5, 1e-4) design into `dir` and returns its path.
fn design_pmf(dir: &Path) -> std::path::PathBuf {
    let design = json(&perturbdp(&[
        "design",
        "--epsilon",
        "0.5",
        "--delta",
        "1e-4",
    ]));
    let file = dir.join("pmf.json");
    std::fs::write(&file, design["pmf"].to_string()).unwrap();
    file
}

#[test]
fn design_finds_support_25() {
    let v = json(&perturbdp(&[
        "design",
        "--epsilon",
        "0.5",
        "--delta",
        "1e-4",
    ]));
    assert_eq!(v["D_star"], 25);
    assert!((v["delta_achieved"].as_f64().unwrap() - 9.9129808160e-5).abs() < 1e-9);
    assert_eq!(v["pmf"]["masses"].as_array().unwrap().len(), 51);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "epsilon",
        "delta_target",
        "D_star",
        "kappa",
        "gamma",
        "V",
        "delta_achieved",
        "pmf",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
}

#[test]
fn design_loose_target_uses_d1() {
    let v = json(&perturbdp(&[
        "design",
        "--epsilon",
        "0.5",
        "--delta",
        "0.5",
    ]));
    assert_eq!(v["D_star"], 1);
}

#[test]
fn exit_codes() {
    let unreachable = perturbdp(&[
        "design",
        "--epsilon",
        "0.5",
        "--delta",
        "1e-30",
        "--d-max",
        "50",
    ]);
    assert_eq!(unreachable.status.code(), Some(3));
    let invalid = perturbdp(&["design", "--epsilon=-1", "--delta", "0.1"]);
    assert_eq!(invalid.status.code(), Some(2));
    let out_of_range = perturbdp(&["pmf", "--d", "2", "--variance", "3"]);
    assert_eq!(out_of_range.status.code(), Some(2));
    let conflicting = perturbdp(&[
        "design",
        "--epsilon",
        "0.5",
        "--delta",
        "0.1",
        "--kappa",
        "1e-5",
        "--kappa-fraction",
        "0.1",
    ]);
    assert_eq!(conflicting.status.code(), Some(2));
}

#[test]
fn quantize_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = design_pmf(dir.path());
    let table = dir.path().join("t32.json");
    let q = perturbdp(&[
        "quantize",
        "--pmf",
        path(&pmf),
        "--keysize-log2",
        "32",
        "--out",
        path(&table),
    ]);
    assert!(q.status.success());
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(t["cumulative"][0], 425_760);
    assert_eq!(t["full_support"], true);

    let s = json(&perturbdp(&[
        "sample",
        "--table",
        path(&table),
        "--cell-key",
        "2552",
    ]));
    assert_eq!(s["noise"], -25);
    let s = json(&perturbdp(&[
        "sample",
        "--table",
        path(&table),
        "--cell-key",
        "1200124",
        "--count",
        "40",
    ]));
    assert_eq!(s["noise"], -23);
    assert_eq!(s["perturbed_count"], 17);
    let low = perturbdp(&[
        "sample",
        "--table",
        path(&table),
        "--cell-key",
        "2552",
        "--count",
        "3",
    ]);
    assert_eq!(low.status.code(), Some(2));
}

#[test]
fn coarse_table_refuses_to_sample() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = design_pmf(dir.path());
    let table = dir.path().join("t8.json");
    let q = perturbdp(&[
        "quantize",
        "--pmf",
        path(&pmf),
        "--keysize-log2",
        "8",
        "--out",
        path(&table),
    ]);
    assert!(q.status.success());
    let s = perturbdp(&["sample", "--table", path(&table), "--cell-key", "10"]);
    assert_eq!(s.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&s.stderr).contains("full support"));
}

#[test]
fn sample_from_record_keys_matches_cellkey() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = design_pmf(dir.path());
    let table = dir.path().join("t16.json");
    perturbdp(&[
        "quantize",
        "--pmf",
        path(&pmf),
        "--keysize-log2",
        "16",
        "--out",
        path(&table),
    ]);
    let keys = dir.path().join("keys.txt");
    std::fs::write(&keys, "3683287558\n3826421583\n1546079969\n").unwrap();
    let ck = perturbdp(&[
        "cellkey",
        "--record-keys",
        path(&keys),
        "--keysize-log2",
        "16",
    ]);
    let ck: u64 = String::from_utf8(ck.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let s = json(&perturbdp(&[
        "sample",
        "--table",
        path(&table),
        "--record-keys",
        path(&keys),
    ]));
    assert_eq!(s["cell_key"], ck);
}

#[test]
fn delta_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = design_pmf(dir.path());
    let a = json(&perturbdp(&[
        "delta",
        "--pmf",
        path(&pmf),
        "--epsilon",
        "0.5",
    ]));
    let o = json(&perturbdp(&[
        "delta",
        "--pmf",
        path(&pmf),
        "--epsilon",
        "0.5",
        "--method",
        "oracle",
    ]));
    assert_eq!(a["provenance"], "analytical");
    assert_eq!(o["provenance"], "oracle");
    assert!((a["delta"].as_f64().unwrap() - o["delta"].as_f64().unwrap()).abs() < 1e-15);
}

#[test]
fn delta_sweep_csv() {
    let out = perturbdp(&[
        "delta-sweep",
        "--d",
        "11",
        "--calibrated",
        "--eps-start",
        "0.5",
        "--eps-stop",
        "1.0",
        "--eps-step",
        "0.5",
        "--numeric",
        "--gamma-step",
        "0.001",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "epsilon,delta_analytical,delta_numeric_min,D,gamma,V"
    );
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[2] <= f[1]);
    }
}

#[test]
fn audit_csv_default_grid() {
    let out = perturbdp(&["audit"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon_design,delta_design,keysize_log2,full_support,bias_q,variance_q,var_rel_err,epsilon_q,epsilon_q_twosided,delta_q"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 75);
    let first_fail_8 = rows
        .iter()
        .find(|r| r[2] == "8" && r[3] == "false")
        .unwrap();
    assert_eq!(first_fail_8[0].parse::<f64>().unwrap(), 0.7);
    assert_eq!(first_fail_8[7], "inf");
    assert!(rows.iter().filter(|r| r[2] == "32").all(|r| r[3] == "true"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        assert!(
            perturbdp(&["audit", "--keysizes", "8,16", "--out", path(p)])
                .status
                .success()
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let k1 = perturbdp(&[
        "cellkey",
        "--count",
        "1000",
        "--seed",
        "7",
        "--keysize-log2",
        "8",
    ]);
    let k2 = perturbdp(&[
        "cellkey",
        "--count",
        "1000",
        "--seed",
        "7",
        "--keysize-log2",
        "8",
    ]);
    assert_eq!(k1.stdout, k2.stdout);
}
