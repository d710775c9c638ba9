use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graph_saliency::render::{hex, HIGH_COLOR};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graph-saliency"));
    c.env_remove("GRAPH_SALIENCY_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["synth", "--out", "d.jsonl", "--count", "3", "--rows", "3", "--cols", "4", "--seed", "7", "--model-out", "m.json", "--hidden", "6", "--depth", "2", "--classes", "4"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn forward_prints_logits_and_class() {
    let dir = fixture();
    let out = run(dir.path(), &["forward", "--model", "m.json", "--dataset", "d.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["logits"].as_array().unwrap().len(), 4);
    assert!(v["class"].as_u64().unwrap() < 4);
}

#[test]
fn usage_and_lookup_errors() {
    let dir = fixture();
    let out = run(dir.path(), &["forward", "--dataset", "d.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());

    let out = run(dir.path(), &["forward", "--model", "m.json", "--dataset", "d.jsonl", "--id", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));

    let out = run(dir.path(), &["forward", "--model", "missing.json", "--dataset", "d.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = fixture();
    let model = fs::read_to_string(dir.path().join("m.json")).unwrap();
    fs::write(dir.path().join("trunc.json"), &model[..model.len() / 2]).unwrap();
    let out = run(dir.path(), &["forward", "--model", "trunc.json", "--dataset", "d.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("bad.jsonl"), "{\"graph_id\":\"1\",\"label\":0,\"num_nodes\":2,\"x\":[[0],[1]],\"edges\":[[0,7]]}\n").unwrap();
    let out = run(dir.path(), &["forward", "--model", "m.json", "--dataset", "bad.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    // label beyond the model's classes
    fs::write(dir.path().join("label.jsonl"), "{\"graph_id\":\"1\",\"label\":9,\"num_nodes\":1,\"x\":[[0.5]],\"edges\":[]}\n").unwrap();
    let out = run(dir.path(), &["forward", "--model", "m.json", "--dataset", "label.jsonl", "--id", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_is_reproducible_and_target_class_defaults_to_argmax() {
    let dir = fixture();
    let d = dir.path();
    let fwd = run(d, &["forward", "--model", "m.json", "--dataset", "d.jsonl", "--id", "2"]);
    let class = serde_json::from_slice::<serde_json::Value>(&fwd.stdout).unwrap()["class"].to_string();

    let base = ["explain", "--model", "m.json", "--dataset", "d.jsonl", "--id", "2"];
    assert!(run(d, &[&base[..], &["--out", "a.json", "--render", "a.svg"]].concat()).status.success());
    assert!(run(d, &[&base[..], &["--out", "b.json", "--render", "b.svg", "--workers", "3"]].concat()).status.success());
    assert!(run(d, &[&base[..], &["--out", "c.json", "--target-class", &class]].concat()).status.success());
    let read = |f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.svg"), read("b.svg"));
    assert_eq!(read("a.json"), read("c.json"));

    let out = run(d, &[&base[..], &["--out", "x.json", "--target-class", "4"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let out = run(d, &[&base[..], &["--out", "x.json", "--workers", "0"]].concat());
    assert_eq!(out.status.code(), Some(1));

    let env = bin()
        .current_dir(d)
        .env("GRAPH_SALIENCY_WORKERS", "2")
        .args([&base[..], &["--out", "e.json"]].concat())
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(read("a.json"), read("e.json"));
}

#[test]
fn render_one_hot_has_single_hot_node() {
    let dir = fixture();
    let d = dir.path();
    let mut saliency = vec![0.0; 12];
    saliency[5] = 0.8;
    let file = serde_json::json!({
        "graph_id": "0", "class_index": 0, "saliency": saliency,
        "channel_weights": [1.0], "raw_scores": [0.0], "format_version": 1
    });
    fs::write(d.join("s.json"), file.to_string()).unwrap();
    let out = run(d, &["render", "--dataset", "d.jsonl", "--id", "0", "--saliency", "s.json", "--out", "s.svg"]);
    assert!(out.status.success());
    let svg = fs::read_to_string(d.join("s.svg")).unwrap();
    let hot = hex(HIGH_COLOR);
    let circles: Vec<&str> = svg.lines().filter(|l| l.starts_with("<circle")).collect();
    assert_eq!(circles.len(), 12);
    let hot_nodes: Vec<usize> = circles
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains(&format!("fill=\"{hot}\"")))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(hot_nodes, vec![5]);
    // 3x4 grid: 3*3 + 2*4 edges
    assert_eq!(svg.matches("<line").count(), 17);

    let out = run(d, &["render", "--dataset", "d.jsonl", "--id", "0", "--saliency", "s.json", "--format", "dot", "--out", "s.dot"]);
    assert!(out.status.success());
    assert!(fs::read_to_string(d.join("s.dot")).unwrap().starts_with("graph saliency {"));
}

#[test]
fn eval_outputs_and_validation() {
    let dir = fixture();
    let d = dir.path();
    let args = ["eval", "--model", "m.json", "--dataset", "d.jsonl", "--seed", "5", "--samples", "20"];
    assert!(run(d, &[&args[..], &["--out", "r1"]].concat()).status.success());
    assert!(run(d, &[&args[..], &["--out", "r2"]].concat()).status.success());
    for f in ["report.json", "report.txt", "rows.csv"] {
        assert_eq!(fs::read(d.join("r1").join(f)).unwrap(), fs::read(d.join("r2").join(f)).unwrap());
    }
    let csv = fs::read_to_string(d.join("r1/rows.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(fs::read_to_string(d.join("r1/report.txt")).unwrap().contains("SCGNN"));

    let one = ["eval", "--model", "m.json", "--dataset", "d.jsonl", "--seed", "5", "--samples", "1", "--out", "r3"];
    assert!(run(d, &one).status.success());

    let zero = ["eval", "--model", "m.json", "--dataset", "d.jsonl", "--seed", "5", "--samples", "0", "--out", "r4"];
    assert_eq!(run(d, &zero).status.code(), Some(1));
    let sigma = ["eval", "--model", "m.json", "--dataset", "d.jsonl", "--seed", "5", "--sigma", "0", "--out", "r5"];
    assert_eq!(run(d, &sigma).status.code(), Some(1));

    let limited = ["eval", "--model", "m.json", "--dataset", "d.jsonl", "--seed", "5", "--samples", "5", "--limit", "2", "--out", "r6"];
    assert!(run(d, &limited).status.success());
    assert_eq!(fs::read_to_string(d.join("r6/rows.csv")).unwrap().lines().count(), 3);
}
