mod common;

use std::fs;

use capsnet::graph;
use capsnet::models::{linear_unit, xor_network};
use capsnet::trainer::{linear_dataset, xor_dataset};
use common::cli;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

const CYCLIC: &str = r#"{
  "inputs": [{"id": "x", "shape": []}],
  "nodes": [
    {"id": "a", "cap": "sigmoid", "bias_shape": []},
    {"id": "b", "cap": "sigmoid", "bias_shape": []}
  ],
  "edges": [
    {"from": "x", "to": "a", "op": "scalar_mult", "weight_shape": []},
    {"from": "a", "to": "b", "op": "scalar_mult", "weight_shape": []},
    {"from": "b", "to": "a", "op": "scalar_mult", "weight_shape": []}
  ]
}"#;

#[test]
fn validate_reports_cycles_with_exit_code_one() {
    let dir = TempDir::new().unwrap();
    let (code, out, _) = cli(&["validate", &write(&dir, "cyc.json", CYCLIC)]);
    assert_eq!(code, 1);
    assert!(out.contains("cycle through [a, b]"), "{out}");

    let ok = write(&dir, "xor.json", &graph::to_json(xor_network().graph()));
    assert_eq!(cli(&["validate", &ok]), (0, "ok\n".into(), String::new()));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["enumerate", "--base", "1in1n", "--steps", "x", "--semantics", "iso"]).0, 2);
    assert_eq!(cli(&["validate", &path(&dir, "absent.json")]).0, 2);
    assert_eq!(cli(&["validate", &write(&dir, "junk.json", "{not json")]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn eval_fills_missing_parameters_from_the_seed() {
    let dir = TempDir::new().unwrap();
    let g = write(
        &dir,
        "g.json",
        r#"{"inputs": [{"id": "x", "shape": [2]}],
            "nodes": [{"id": "h", "cap": "softmax", "bias_shape": [3]}],
            "edges": [{"from": "x", "to": "h", "op": "matmul", "weight_shape": [3, 2]}]}"#,
    );
    let x = write(&dir, "x.json", r#"{"x": [0.5, -1.0]}"#);
    let a = cli(&["eval", &g, "--inputs", &x, "--seed", "4"]);
    let b = cli(&["eval", &g, "--inputs", &x, "--seed", "4"]);
    let c = cli(&["eval", &g, "--inputs", &x, "--seed", "5"]);
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
    let doc: serde_json::Value = serde_json::from_str(&a.1).unwrap();
    let probs: Vec<f64> = doc["h"]["output"]["data"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let wrong = write(&dir, "bad.json", r#"{"x": [0.5]}"#);
    assert_eq!(cli(&["eval", &g, "--inputs", &wrong]).0, 1);
}

#[test]
fn gradcheck_prints_the_worst_error() {
    let dir = TempDir::new().unwrap();
    let g = path(&dir, "mlp.json");
    assert_eq!(cli(&["zoo", "mlp", "--seed", "2", "--out", &g]).0, 0);
    let x = write(&dir, "x.json", r#"{"X": [0.1, -0.2, 0.3, -0.4, 0.5]}"#);
    let t = write(&dir, "t.json", r#"{"O": [0.0, 1.0, 0.0, 0.0]}"#);
    let (code, out, err) = cli(&["gradcheck", &g, "--inputs", &x, "--targets", &t, "--loss", "mse"]);
    assert_eq!(code, 0, "{err}");
    let worst: f64 = out.lines().next().unwrap().strip_prefix("max_relative_error ").unwrap().parse().unwrap();
    assert!(worst < 1e-4);
    assert!(out.contains("checked 186"));
    assert_eq!(cli(&["gradcheck", &g, "--inputs", &x, "--targets", &t, "--loss", "xent"]).0, 1);
    assert_eq!(cli(&["gradcheck", &g, "--inputs", &x, "--targets", &t, "--loss", "mse", "--eps", "0.1"]).0, 2);
}

#[test]
fn train_writes_graph_and_history() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "lin.json", &graph::to_json(&linear_unit()));
    let mut csv = Vec::new();
    linear_dataset().to_csv(&mut csv, &linear_unit()).unwrap();
    let data = write(&dir, "lin.csv", std::str::from_utf8(&csv).unwrap());
    let (code, _, err) = cli(&["train", &g, "--data", &data, "--lr", "0.05", "--epochs", "500", "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    let trained = graph::from_json(&fs::read_to_string(path(&dir, "lin.trained.json")).unwrap()).unwrap().graph;
    let w = trained.param(&capsnet::graph::ParamKey::Weight("x".into(), "y".into())).unwrap().data()[0];
    assert!((w - 2.0).abs() < 1e-3);
    let history = fs::read_to_string(path(&dir, "lin.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 501);

    let (code, _, err) = cli(&["train", &g, "--data", &data, "--lr", "1e200", "--epochs", "3"]);
    assert_eq!(code, 3, "{err}");

    let mut xor_csv = Vec::new();
    xor_dataset("o").to_csv(&mut xor_csv, xor_network().graph()).unwrap();
    let wrong = write(&dir, "xor.csv", std::str::from_utf8(&xor_csv).unwrap());
    assert_eq!(cli(&["train", &g, "--data", &wrong, "--lr", "0.1", "--epochs", "1"]).0, 2);
}

#[test]
fn enumerate_derive_replay_and_dot() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(&["enumerate", "--base", "1in1n", "--steps", "2", "--semantics", "labeled"]).1, "21\n");
    assert_eq!(cli(&["enumerate", "--base", "2in1n", "--steps", "1", "--semantics", "labeled"]).1, "7\n");
    let (_, listed, _) = cli(&["enumerate", "--base", "1in1n", "--steps", "1", "--semantics", "iso", "--list"]);
    assert_eq!(listed.lines().count(), 4);

    let g = write(&dir, "xor.json", &graph::to_json(xor_network().graph()));
    let d = path(&dir, "xor.derivation.json");
    assert_eq!(cli(&["derive", &g, "--out", &d]).0, 0);
    let (code, replayed, _) = cli(&["replay", &d]);
    assert_eq!(code, 0);
    assert_eq!(graph::from_json(&replayed).unwrap().graph, xor_network().into_graph());

    let (code, dot, _) = cli(&["export-dot", &g]);
    assert_eq!(code, 0);
    assert!(dot.contains("\"h1\" -> \"o\""));

    let cyc = write(&dir, "cyc.json", CYCLIC);
    assert_eq!(cli(&["derive", &cyc]).0, 1);
    assert_eq!(cli(&["replay", &write(&dir, "bad.json", r#"{"steps": []}"#)]).0, 2);
}
