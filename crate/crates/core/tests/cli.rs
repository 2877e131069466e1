use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn emea(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emea"))
        .args(args)
        .current_dir(dir)
        .env("EMEA_THREADS", "2")
        .output()
        .unwrap()
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = emea(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn check_metrics(v: &Value, n: usize) {
    let hit1 = v["hit1"].as_f64().unwrap();
    let mrr = v["mrr"].as_f64().unwrap();
    let mr = v["mr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&hit1));
    assert!(mrr >= hit1 && mrr <= 1.0);
    assert!(mr >= 1.0);
    assert_eq!(v["n"].as_u64().unwrap() as usize, n);
    assert_eq!(v["ranks"].as_array().unwrap().len(), n);
}

fn synth(dir: &Path) {
    ok_json(
        dir,
        &[
            "synth",
            "--entities",
            "200",
            "--relations",
            "5",
            "--seed",
            "2",
            "--out",
            "data",
        ],
    );
}

#[test]
fn run_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"kg1": "data/kg1.tsv", "kg2": "data/kg2.tsv", "links": "data/links.tsv",
            "seed_fraction": 0.1, "output": "out", "rules": "avoidconf",
            "encoder": {"epochs": 30, "retrain_epochs": 10}, "em": {"iterations": 1}}"#,
    )
    .unwrap();
    let run = ok_json(dir, &["run", "--config", "cfg.json"]);
    assert_eq!(run["iterations"], 1);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["rule_names"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    let n_test = manifest["splits"]["test"].as_u64().unwrap() as usize;

    let eval = ok_json(
        dir,
        &[
            "eval",
            "--pred",
            "out/manifest.json",
            "--test",
            "out/test.tsv",
            "--diagnostics",
        ],
    );
    check_metrics(&eval, n_test);
    let diag = &eval["diagnostics"];
    assert!((0.0..=1.0).contains(&diag["conflict_rate"].as_f64().unwrap()));
    assert_eq!(diag["histogram"].as_array().unwrap().len(), 10);

    // the recorded final test accuracy is what eval recomputes
    let last = manifest["history"].as_array().unwrap().last().unwrap();
    let recorded = last["neural_test"]["hit1"].as_f64().unwrap();
    assert!((recorded - eval["hit1"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn baseline_candidates_and_imported_similarities() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    std::fs::write(dir.join("enc.json"), r#"{"epochs": 20}"#).unwrap();
    let kg = ["--kg1", "data/kg1.tsv", "--kg2", "data/kg2.tsv"];
    let mut args = vec!["train-baseline"];
    args.extend(kg);
    args.extend([
        "--train",
        "data/links.tsv",
        "--config",
        "enc.json",
        "--out",
        "emb.json",
    ]);
    let trained = ok_json(dir, &args);
    assert_eq!(trained["epochs"], 20);

    let mut args = vec!["candidates"];
    args.extend(kg);
    args.extend(["--embeddings", "emb.json", "--k", "5", "--out", "cands.tsv"]);
    let out = emea(dir, &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.join("cands.tsv")).unwrap();
    assert!(text.lines().all(|l| l.split('\t').count() == 3));

    let mut args = vec!["eval", "--similarities", "cands.tsv"];
    args.extend(kg);
    args.extend(["--test", "data/links.tsv"]);
    let eval = ok_json(dir, &args);
    let n = std::fs::read_to_string(dir.join("data/links.tsv"))
        .unwrap()
        .lines()
        .count();
    check_metrics(&eval, n);

    let mut args = vec!["stats"];
    args.extend(kg);
    args.extend(["--links", "data/links.tsv"]);
    ok_json(dir, &args);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(emea(dir, &["frobnicate"]).status.code(), Some(2));
    let missing = emea(dir, &["run", "--config", "nope.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));

    std::fs::write(
        dir.join("bad.json"),
        r#"{"kg1": "a", "kg2": "b", "output": "o", "colour": 1}"#,
    )
    .unwrap();
    assert_eq!(
        emea(dir, &["run", "--config", "bad.json"]).status.code(),
        Some(2)
    );

    std::fs::write(dir.join("kg.tsv"), "a\tr\n").unwrap();
    let args = [
        "stats", "--kg1", "kg.tsv", "--kg2", "kg.tsv", "--links", "kg.tsv",
    ];
    assert_eq!(emea(dir, &args).status.code(), Some(1));

    let bad_synth = emea(dir, &["synth", "--entities", "1", "--out", "x"]);
    assert_eq!(bad_synth.status.code(), Some(2));
}
