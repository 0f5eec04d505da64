//! End-to-end driver tests through the compiled binary: artifact schemas,
//! byte determinism, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaplab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_G1: &str = r#"{
  "schema_version": 1,
  "geometry": { "name": "G1" },
  "t0": 1.0,
  "eps_list": [0.2, 0.1],
  "grid": { "n_x_cells": 240, "n_y_cells": 24, "gap_n_x_cells": 240, "gap_n_y_cells": 24 },
  "seed": 11
}"#;

#[test]
fn airy_alone_writes_oracle_table() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["airy", "--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("airy.csv")).unwrap();
    assert!(table.contains("a1,2.33810741046e0"), "{table}");
    assert!(table.contains("a2,4.08794944413e0"), "{table}");
    assert!(table.contains("model_integral,1.16656135578e0"), "{table}");
}

#[test]
fn sweep_is_byte_deterministic_and_green() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "tiny.json", TINY_G1);
    let outs = [dir.path().join("first"), dir.path().join("second")];
    for out in &outs {
        let status = bin()
            .args([
                "sweep",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("GAPLAB_THREADS", "2")
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for artifact in ["pde.csv", "gap.csv", "summary.json"] {
        let first = std::fs::read(outs[0].join(artifact)).unwrap();
        let second = std::fs::read(outs[1].join(artifact)).unwrap();
        assert_eq!(first, second, "{artifact} differs between identical runs");
    }
    let pde = std::fs::read_to_string(outs[0].join("pde.csv")).unwrap();
    let lines: Vec<&str> = pde.lines().collect();
    assert_eq!(
        lines[0],
        "epsilon,delta,k,lambda_tilde,lambda_tilde0,lambda_ode,guess_distance,decay_slope"
    );
    // Two widths, two modes each.
    assert_eq!(lines.len(), 5);
    let gap = std::fs::read_to_string(outs[0].join("gap.csv")).unwrap();
    assert!(
        gap.starts_with("epsilon,delta,gamma0,gamma_r1,I_eps,rescaled_I,hf_deriv,target,pass\n")
    );
    assert_eq!(gap.lines().count(), 3);
    assert!(gap.lines().skip(1).all(|l| l.ends_with(",true")), "{gap}");
}

#[test]
fn seed_changes_outputs_but_not_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "tiny.json", TINY_G1);
    let out = dir.path().join("reseeded");
    let status = bin()
        .args([
            "pde",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "99",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(
        summary.contains("\"seed\": 99"),
        "seed override not recorded"
    );
    assert!(summary.contains("\"pass\": true"));
}

#[test]
fn inadmissible_width_is_a_certification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "wide.json",
        r#"{
  "schema_version": 1,
  "geometry": { "name": "G1" },
  "t0": 1.0,
  "eps_list": [0.6, 0.2],
  "grid": { "n_x_cells": 240, "n_y_cells": 24 }
}"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "pde",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // The marked row emits no data lines; the admissible one does.
    let pde = std::fs::read_to_string(out.join("pde.csv")).unwrap();
    assert_eq!(pde.lines().count(), 3);
    assert!(pde.lines().skip(1).all(|l| l.starts_with("2.0")), "{pde}");
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("convexity_fail"), "{summary}");
}

#[test]
fn config_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write_config(dir.path(), "bad.json", "{ not json");
    for config in [malformed, dir.path().join("absent.json")] {
        let output = bin()
            .args(["sweep", "--config", config.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(2));
        assert!(!output.stderr.is_empty());
    }
    // Unknown flags are argument errors, same class.
    let status = bin().args(["sweep", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "file, not a directory").unwrap();
    let status = bin()
        .args(["airy", "--out", blocker.join("sub").to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}
