use std::fs;
use std::path::Path;
use std::process::Command;

fn rotsmag(sub: &str, config: &str, out: &Path, extra: &[&str]) -> (i32, String) {
    let cfg = out.with_extension("json");
    fs::write(&cfg, config).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rotsmag"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

const SWEEP: &str = r#"{
  "seed": 3,
  "sweep": {"estimators": ["B_bound", "A_p", "hardy", "embed_L1", "curl_grad_equiv", {"hardy_sobolev": 2.5}],
            "p": [2.5, 3], "alpha": {"from": 0.5, "to": 2.0, "step": 0.5}, "levels": 4, "count": 4}
}"#;

#[test]
fn sweep_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(rotsmag("sweep", SWEEP, &a, &["--threads", "1"]).0, 0);
    assert_eq!(rotsmag("sweep", SWEEP, &b, &["--threads", "4"]).0, 0);
    let ca = fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("sweep.csv")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("estimator,p,alpha,q,level,value,verdict,seed,cells\n"));
    assert!(text.contains("B_bound,3,2,,0,"));
    assert!(text.contains("precondition-violated"));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["partial"], false);
    assert_eq!(m["cells"].as_array().unwrap().len(), 6 * 2 * 4);
    let mb: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], mb["config_hash"]);
}

#[test]
fn seed_flag_changes_the_hash_and_the_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"sweep": {"estimators": ["B_bound"], "p": [3], "alpha": [1], "levels": 3, "count": 3}}"#;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(rotsmag("sweep", cfg, &a, &["--seed", "1"]).0, 0);
    assert_eq!(rotsmag("sweep", cfg, &b, &["--seed", "2"]).0, 0);
    let ma: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_ne!(ma["config_hash"], mb["config_hash"]);
    assert_ne!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn simulate_zero_data_writes_a_zero_ledger_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": {"kind": "box2d", "extents": ["pi", "pi"], "cells": [8, 8]},
                  "model": {"alpha": 0, "p": 3},
                  "solver": {"dt": 0.01, "t_end": 0.03, "snapshot_every": 3},
                  "initial": {"kind": "zero"}}"#;
    let out = dir.path().join("sim");
    let (code, err) = rotsmag("simulate", cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    let lines: Vec<&str> = ledger.lines().collect();
    assert_eq!(lines[0], "step,t,kinetic,dissipation_cum,work_cum,scheme_dissipation_cum,residual,picard_iters");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..] {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[2..7].iter().all(|&v| v == 0.0), "{l}");
    }
    assert!(out.join("snapshots/snap_000003_u1.bin").exists());
}

#[test]
fn snapshot_reload_continues_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = r#"{"domain": {"kind": "box2d", "extents": ["pi", "pi"], "cells": [16, 16]},
                    "model": {"alpha": 1, "p": 3},
                    "solver": {"dt": 0.01, "t_end": 0.02, "snapshot_every": 2}}"#;
    let a = dir.path().join("a");
    assert_eq!(rotsmag("simulate", first, &a, &[]).0, 0);
    let prefix = a.join("snapshots/snap_000002");
    let second = format!(
        r#"{{"domain": {{"kind": "box2d", "extents": ["pi", "pi"], "cells": [16, 16]}},
             "model": {{"alpha": 1, "p": 3}},
             "solver": {{"dt": 0.01, "t_end": 0.01}},
             "initial": {{"kind": "file", "path": {:?}}}}}"#,
        prefix.display().to_string()
    );
    let b = dir.path().join("b");
    let (code, err) = rotsmag("simulate", &second, &b, &[]);
    assert_eq!(code, 0, "{err}");
    let la = fs::read_to_string(a.join("ledger.csv")).unwrap();
    let lb = fs::read_to_string(b.join("ledger.csv")).unwrap();
    let k_end_a: f64 = la.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let k0_b: f64 = lb.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((k_end_a - k0_b).abs() <= 1e-12 * k0_b, "{k_end_a} {k0_b}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{"domain": {"kind": "channel", "extents": [1, 1, 1], "cells": [8, 8, 8]}, "model": {"alpha": 2, "p": 3}}"#;
    let (code, err) = rotsmag("simulate", bad, &dir.path().join("x"), &[]);
    assert_eq!(code, 2);
    assert!(err.contains("[0, 2)"), "{err}");
    assert_eq!(rotsmag("simulate", "{ not json", &dir.path().join("y"), &[]).0, 2);
    let stiff = r#"{"domain": {"kind": "box2d", "extents": ["pi", "pi"], "cells": [16, 16]},
                    "model": {"alpha": 0, "p": 3},
                    "solver": {"dt": 0.01, "t_end": 0.01, "picard_max": 1, "picard_tol": 1e-14},
                    "initial": {"kind": "taylor_green_2d", "amplitude": 5}}"#;
    let out = dir.path().join("z");
    assert_eq!(rotsmag("simulate", stiff, &out, &[]).0, 3);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["partial"], true);
}

#[test]
fn check_reports_the_coercivity_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": {"kind": "channel", "extents": [1, 1, 1], "cells": [6, 6, 8]},
                  "model": {"alpha": 1, "p": 3, "c_alpha": 0.5},
                  "check": {"samples": [10, 20]}}"#;
    let out = dir.path().join("c");
    let (code, err) = rotsmag("check", cfg, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("conditions.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let c1: f64 = r[5].parse().unwrap();
        assert!((c1 - 0.5).abs() <= 1e-10 * 0.5);
    }
}
