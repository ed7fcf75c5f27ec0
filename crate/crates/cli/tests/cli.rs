use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccr-folner")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn folner_ratio_table() {
    let out = run(&["folner-ratio", "--gens", "[[1,0],[0,1]]", "--N", "5", "--ops", "W[1,0], W[0,1] + W[1,0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["op"], "W[1,0]");
    for key in ["lower", "numeric", "upper"] {
        assert!(rows[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(rows[0]["lower"], "6/5");
    assert_eq!(rows[0]["upper"], "6/5");
}

#[test]
fn compress_reports_closed_forms() {
    let out = run(&["compress", "--gens", "[[1,0]]", "--N", "4", "--ops", "W[-1,0],W[1,0]+W[-1,0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = json(&out);
    let defect = rows[0]["defect"].as_f64().unwrap();
    assert!((defect - 1.0 / 3.0).abs() < 1e-12);
    let norm = rows[1]["compressed_norm"].as_f64().unwrap();
    assert!((norm - 2.0 * (std::f64::consts::PI / 10.0).cos()).abs() < 1e-9);
}

#[test]
fn hypertrace_with_explicit_ambient() {
    let out = run(&["hypertrace", "--gens", "[[1,0]]", "--N", "4", "--R", "7", "--ops", "W[1,0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = json(&out);
    assert_eq!(rows[0]["ambient_radius"], 7);
    assert!((rows[0]["trace_norm"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);

    let small = run(&["hypertrace", "--gens", "[[1,0]]", "--N", "4", "--R", "4", "--ops", "W[1,0]"]);
    assert_eq!(small.status.code(), Some(2));
    assert!(stderr(&small).contains("ambient box too small"));
}

#[test]
fn parse_errors_exit_two_with_position() {
    let out = run(&["folner-ratio", "--gens", "[[1,0]]", "--N", "3", "--ops", "W[1,0] * "]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parse error at"), "{}", stderr(&out));

    let out = run(&["folner-ratio", "--gens", "[[1,0]]", "--N", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["--space", "{\"d\": 0}", "folner-ratio", "--gens", "[]", "--N", "3", "--ops", "W[]"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn space_flag_selects_dimension() {
    let out =
        run(&["--space", "{\"d\": 2}", "folner-ratio", "--gens", "[[1,0,0,0]]", "--N", "4", "--ops", "W[1,0,0,0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)[0]["numeric"].as_f64().unwrap(), 1.25);
}

fn synth(dir: &Path, seed: &str) -> String {
    let path = dir.join(format!("sample-{seed}.json"));
    let out = run(&[
        "cp",
        "synth",
        "--gens",
        "[[1,0],[0,1]]",
        "--N",
        "2",
        "--ops",
        "W[1,0],W[0,1]",
        "--spread",
        "0.001",
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    path.to_str().unwrap().to_string()
}

#[test]
fn cp_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sample = synth(dir.path(), "11");

    let split = run(&["cp", "split", "--in", &sample, "--eps", "0.1"]);
    assert_eq!(split.status.code(), Some(0), "{}", stderr(&split));
    let split = json(&split);
    assert!(split["distance"].as_f64().unwrap() <= split["certified_bound"].as_f64().unwrap());

    let psi = dir.path().join("psi.json");
    let out = run(&["cp", "unitalize", "--in", &sample, "--eps", "0.1", "--out", psi.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let psi: Value = serde_json::from_str(&fs::read_to_string(&psi).unwrap()).unwrap();
    let k = psi["k"].as_u64().unwrap() as usize;
    // row-major (re, im) entries; the unit is the identity on ran P
    let unit = psi["unit"].as_array().unwrap();
    assert_eq!(unit.len(), k * k);
    for (idx, z) in unit.iter().enumerate() {
        let expected = if idx % (k + 1) == 0 { 1.0 } else { 0.0 };
        assert!((z[0].as_f64().unwrap() - expected).abs() < 1e-10);
        assert!(z[1].as_f64().unwrap().abs() < 1e-10);
    }

    let cert = run(&["cp", "certify", "--in", &sample, "--eps", "0.5", "--norm-refs", "{\"W[1,0]\": 1}"]);
    let cert_json = json(&cert);
    assert_eq!(cert_json["pairs"].as_array().unwrap().len(), 1);
    let checked = cert_json["elements"].as_array().unwrap().iter().find(|e| e["label"] == "W[1,0]").unwrap();
    assert_eq!(checked["reference_norm"], 1.0);
    let verdict = cert_json["verdict"].as_bool().unwrap();
    assert_eq!(cert.status.code(), Some(if verdict { 0 } else { 1 }));
}

#[test]
fn certify_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let sample = synth(dir.path(), "5");
    let out = run(&["cp", "certify", "--in", &sample, "--eps", "1e-9"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert_eq!(json(&out)["verdict"], false);
}

#[test]
fn cp_synth_requires_seed() {
    let out = run(&["cp", "synth", "--gens", "[[1,0]]", "--N", "2", "--ops", "W[1,0]"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--seed"));
}

#[test]
fn cp_split_rejects_bad_eps_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let sample = synth(dir.path(), "1");
    assert_eq!(run(&["cp", "split", "--in", &sample, "--eps", "0.7"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"k\": 2, \"unit\": [[[\"1\"]]]}").unwrap();
    assert_eq!(run(&["cp", "split", "--in", bad.to_str().unwrap(), "--eps", "0.1"]).status.code(), Some(2));
}

#[test]
fn resolvent_residuals_by_relation() {
    let params = r#"{"lambda": 1, "nu": 1, "f": [1, 0], "g": [0, 1]}"#;
    let out = run(&[
        "resolvent",
        "residuals",
        "--levels",
        "16",
        "--cutoff",
        "4",
        "--relation",
        "adjoint",
        "--params",
        params,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["relation"], "adjoint");
    assert!(v["raw"].as_f64().unwrap() < 1e-10);

    let out = run(&[
        "resolvent",
        "residuals",
        "--levels",
        "16",
        "--cutoff",
        "4",
        "--relation",
        "commutator",
        "--params",
        params,
    ]);
    let compressed = json(&out)["compressed"].as_f64().unwrap();
    assert!((compressed - 3.941e-3).abs() < 1e-6, "{compressed}");

    let out = run(&[
        "resolvent",
        "residuals",
        "--levels",
        "8",
        "--cutoff",
        "4",
        "--relation",
        "product",
        "--params",
        "{\"lambda\": 1}",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[product]"), "{}", stderr(&out));

    let out =
        run(&["resolvent", "residuals", "--levels", "8", "--cutoff", "9", "--relation", "adjoint", "--params", params]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resolvent_character_values() {
    let out = run(&["resolvent", "character", "--mu", "[1,2]", "--words", "R(1; 1,0), R(2; 0,1) * adj(R(1; 1,0))"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["values"][0]["value"], serde_json::json!(["-1/2", "-1/2"]));
    assert_eq!(v["values"][1]["value"], serde_json::json!(["1/4", "0"]));
    assert_eq!(v["values"][1]["mult_domain_distance"], "0");
    assert_eq!(v["report"]["relations"].as_array().unwrap().len(), 5);
}

#[test]
fn csv_format() {
    let out = run(&["--format", "csv", "folner-ratio", "--gens", "[[1,0]]", "--N", "2", "--ops", "W[1,0]"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("lower") && header.contains("op"));
    assert_eq!(lines.count(), 1);
}

const SWEEP: &str = r#"{
  "cells": [
    {"command": "hypertrace", "gens": [[1, 0]], "ops": ["W[1,0]"], "grid": [2, 4, 8]},
    {"command": "compress", "gens": [[1, 0]], "ops": ["W[-1,0]", "W[1,0]"], "grid": [4, 12], "metric": "defect"},
    {"command": "cp-ensemble", "gens": [[1, 0], [0, 1]], "ops": ["W[1,0]", "W[0,1]"], "grid": [2], "samples": 5}
  ]
}"#;

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, SWEEP).unwrap();
    let spec = spec.to_str().unwrap();
    let a = run(&["sweep", "--spec", spec, "--seed", "9"]);
    let b = run(&["sweep", "--spec", spec, "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let report = json(&a);
    assert_eq!(report["pass"], true);
    let values: Vec<f64> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["command"] == "hypertrace" && r["metric"] == "trace_norm")
        .map(|r| r["value"].as_f64().unwrap())
        .collect();
    for (v, n) in values.iter().zip([2.0, 4.0, 8.0]) {
        assert!((v - 2.0 / (2.0 * n + 1.0)).abs() < 1e-12);
    }

    let out_path = dir.path().join("report.json");
    let c = run(&["sweep", "--spec", spec, "--seed", "9", "--out", out_path.to_str().unwrap()]);
    assert!(c.stdout.is_empty());
    assert_eq!(fs::read(&out_path).unwrap(), a.stdout);
}

#[test]
fn sweep_without_seed_rejects_stochastic_cells() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, SWEEP).unwrap();
    let out = run(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
    let report = json(&out);
    assert!(report["error"].as_str().unwrap().contains("cp-ensemble"));
    assert!(!report["rows"].as_array().unwrap().is_empty(), "partial report expected");
}

#[test]
fn empty_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, "{\"cells\": []}").unwrap();
    let out = run(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"], serde_json::json!([]));
}
