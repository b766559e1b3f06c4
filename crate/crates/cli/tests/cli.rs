use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cdt_core::document::save_tree;
use cdt_core::model::{Cdt, CdtNode, HyperParams, IdAllocator, NodeId};

fn cdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cdt(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_kind(out: &Output) -> String {
    let last = String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or_default().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap_or_else(|_| panic!("not json: {last}"));
    v["error"]["kind"].as_str().unwrap().to_string()
}

/// Synthetic two-group corpus plus a tool config for the planted oracle.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["synth", "--out", "c.jsonl", "--group", "Acme", "--group", "Beta", "--per", "20", "--config-out", "tool.toml"],
    );
    dir
}

#[test]
fn export_single_node_tree() {
    let dir = tempfile::tempdir().unwrap();
    let t = Cdt {
        group: "Acme".into(),
        root: CdtNode::leaf(NodeId::new("n0"), 0, BTreeSet::new()),
        hyperparams: HyperParams::default(),
        provenance_log: vec![],
        ids: IdAllocator::default(),
    };
    save_tree(dir.path().join("t.json"), &t).unwrap();
    let dot = ok(dir.path(), &["export", "--tree", "t.json", "--dot"]);
    assert!(dot.starts_with("digraph \"Acme\""));
    assert_eq!(dot.matches("[label=").count(), 1);
    assert!(!dot.contains("->"));
}

#[test]
fn invalid_hyperparameters_fail_before_any_oracle_call() {
    let dir = workspace();
    let tool = fs::read_to_string(dir.path().join("tool.toml")).unwrap();
    let bad = tool.replace("candidates_c = 1", "candidates_c = 1\ntau_accept_keep = 0.2\nd_max = 0");
    fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = cdt(
        dir.path(),
        &["--config", "bad.toml", "--record", "tr", "build", "--data", "c.jsonl", "--group", "Acme", "--out", "t.json"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "config");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("tau_accept_keep") && msg.contains("d_max"), "{msg}");
    assert!(!dir.path().join("tr").exists());
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn unknown_group_is_a_data_error() {
    let dir = workspace();
    let out = cdt(dir.path(), &["--config", "tool.toml", "build", "--data", "c.jsonl", "--group", "Nope", "--out", "t.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_kind(&out), "data");
}

#[test]
fn replay_reproduces_recorded_outputs() {
    let dir = workspace();
    let d = dir.path();
    let rec = ["--config", "tool.toml", "--record", "tr"];
    let rep = ["--config", "tool.toml", "--replay", "tr"];
    let build = ["build", "--data", "c.jsonl", "--group", "Acme", "--out"];
    let predict = ["predict", "--tree", "a.json", "--data", "c.jsonl", "--out"];

    ok(d, &[&rec[..], &build, &["a.json"]].concat());
    ok(d, &[&rec[..], &predict, &["p.jsonl"]].concat());
    ok(d, &[&rep[..], &build, &["a2.json"]].concat());
    ok(d, &[&rep[..], &predict, &["p2.jsonl"]].concat());
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("a2.json")).unwrap());
    assert_eq!(fs::read(d.join("p.jsonl")).unwrap(), fs::read(d.join("p2.jsonl")).unwrap());

    // A request outside the transcript is an oracle failure, not a silent default.
    let out = cdt(d, &[&rep[..], &["predict", "--tree", "a.json", "--context", "Something new happens."]].concat());
    assert_eq!(error_kind(&out), "oracle");
}

#[test]
fn built_tree_round_trips_into_prediction() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["--config", "tool.toml", "build", "--data", "c.jsonl", "--group", "Acme", "--out", "a.json"]);
    let text = ok(d, &["export", "--tree", "a.json"]);
    assert!(text.contains("lobby"), "{text}");

    let pred = ok(
        d,
        &[
            "--config",
            "tool.toml",
            "predict",
            "--tree",
            "a.json",
            "--context",
            "Acme is hit by tariff hikes on its key inputs.",
            "--trace",
            "trace.json",
        ],
    );
    assert!(pred.contains("lobby"), "{pred}");
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("trace.json")).unwrap()).unwrap();
    assert!(!trace["statements"].as_array().unwrap().is_empty());
}

#[test]
fn evaluate_writes_tables() {
    let dir = workspace();
    let d = dir.path();
    let cfg = ["--config", "tool.toml"];
    ok(d, &[&cfg[..], &["predict", "--method", "vanilla", "--group", "Acme", "--data", "c.jsonl", "--out", "p.jsonl"]].concat());
    ok(d, &[&cfg[..], &["evaluate", "--data", "c.jsonl", "--predictions", "p.jsonl", "--out", "e.jsonl", "--tables", "tables"]].concat());
    assert_eq!(fs::read_to_string(d.join("e.jsonl")).unwrap().lines().count(), 80);
    let by_group = fs::read_to_string(d.join("tables/evaluation_by_group.csv")).unwrap();
    assert!(by_group.starts_with("group,n,consistency"));
    assert!(by_group.contains("\nAcme,40,") && by_group.contains("\nBeta,40,"), "{by_group}");
}
