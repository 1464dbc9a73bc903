use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn npd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn npd")
}

fn ok(args: &[&str]) -> Output {
    let out = npd(args);
    assert!(
        out.status.success(),
        "npd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_MODEL: [&str; 10] = [
    "--hidden-dim",
    "8",
    "--head-dim",
    "8",
    "--max-epochs",
    "2",
    "--lr",
    "0.05",
    "--batch-size",
    "16",
];

struct Run {
    corpus: PathBuf,
    emb: PathBuf,
    ckpt: PathBuf,
}

fn pipeline(dir: &Path, tag: &str) -> (Run, String) {
    let corpus = dir.join(format!("{tag}.jsonl"));
    let emb = dir.join(format!("{tag}.emb"));
    let ckpt = dir.join(format!("{tag}.ckpt"));
    ok(&["synth", "--out", s(&corpus), "--n-posts", "200", "--seed", "3"]);
    ok(&[
        "embed", "--corpus", s(&corpus), "--out", s(&emb), "--embed-dim", "8", "--vocab-size", "300",
        "--epochs", "1", "--tokenizer", "whitespace", "--seed", "3",
    ]);
    let mut args = vec!["train", "--corpus", s(&corpus), "--embeddings", s(&emb), "--out", s(&ckpt), "--seed", "3"];
    args.extend(SMALL_MODEL);
    ok(&args);
    let report = ok(&["eval", "--checkpoint", s(&ckpt), "--corpus", s(&corpus)]);
    (Run { corpus, emb, ckpt }, String::from_utf8(report.stdout).unwrap())
}

#[test]
fn end_to_end_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ra) = pipeline(dir.path(), "a");
    let (b, rb) = pipeline(dir.path(), "b");
    assert_eq!(std::fs::read(&a.corpus).unwrap(), std::fs::read(&b.corpus).unwrap());
    assert_eq!(std::fs::read(&a.emb).unwrap(), std::fs::read(&b.emb).unwrap());
    assert_eq!(std::fs::read(&a.ckpt).unwrap(), std::fs::read(&b.ckpt).unwrap());
    assert_eq!(ra, rb);
    let lines: Vec<&str> = ra.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("variant\tseed\tHappiness"));
    assert!(lines[1].starts_with("NPD\t3\t"));
    assert_eq!(lines[1].split('\t').count(), 8);

    let log = std::fs::read_to_string(format!("{}.log.tsv", a.ckpt.display())).unwrap();
    assert!(log.starts_with("epoch\tj_y\tj_gend\tj_loc\tdev_avg_f1"));
    assert_eq!(log.lines().count(), 3);
    assert!(std::fs::read_to_string(format!("{}.meta.json", a.emb.display()))
        .unwrap()
        .contains("whitespace"));
}

#[test]
fn predict_emits_one_json_object_per_post() {
    let dir = tempfile::tempdir().unwrap();
    let (run, _) = pipeline(dir.path(), "p");
    let mut child = Command::new(env!("CARGO_BIN_EXE_npd"))
        .args(["predict", "--checkpoint", s(&run.ckpt)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"some unseen words here\n\n{\"text\": \"another post\"}\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1]["text"], "another post");
    let r = &records[0];
    assert_eq!(r["emotions"].as_object().unwrap().len(), 5);
    let pm = r["gender"]["male_probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pm));
    let dist = r["location"]["probabilities"].as_array().unwrap();
    let total: f64 = dist.iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let att = r["attention"]["gender"].as_array().unwrap();
    assert_eq!(att.len(), 4);
    let w: f64 = att.iter().map(|p| p[1].as_f64().unwrap()).sum();
    assert!((w - 1.0).abs() < 1e-9);
}

#[test]
fn ablate_prints_rows_and_means() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let table = dir.path().join("t.tsv");
    ok(&["synth", "--out", s(&corpus), "--n-posts", "150"]);
    let mut args = vec![
        "ablate", "--corpus", s(&corpus), "--variants", "LSTM,NPD", "--seeds", "1,2", "--embed-dim", "8",
        "--vocab-size", "200", "--tokenizer", "whitespace", "--jobs", "2", "--out", s(&table),
    ];
    args.extend(SMALL_MODEL);
    let out = ok(&args);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(&table).unwrap());
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("LSTM\t")).count(), 3);
    assert_eq!(rows.iter().filter(|r| r.starts_with("NPD\t")).count(), 3);
    assert!(rows.iter().any(|r| r.starts_with("NPD\tmean\t")));
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert_eq!(npd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(npd(&["synth"]).status.code(), Some(1));
    assert_eq!(npd(&["--help"]).status.code(), Some(0));
    ok(&["synth", "--out", s(&corpus), "--n-posts", "100"]);
    let emb = dir.path().join("e.emb");
    ok(&["embed", "--corpus", s(&corpus), "--out", s(&emb), "--embed-dim", "4", "--epochs", "1"]);
    let ckpt = dir.path().join("m.ckpt");
    let bad = npd(&[
        "train", "--corpus", s(&corpus), "--embeddings", s(&emb), "--out", s(&ckpt), "--lr", "-1",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let bad = npd(&[
        "train", "--corpus", s(&corpus), "--embeddings", s(&emb), "--out", s(&ckpt), "--variant", "BOGUS",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "not json\n").unwrap();
    assert_eq!(npd(&["embed", "--corpus", s(&garbage), "--out", s(&emb)]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = npd(&["embed", "--corpus", s(&missing), "--out", s(&dir.path().join("e.emb"))]);
    assert_eq!(out.status.code(), Some(2));

    let corpus = dir.path().join("c.jsonl");
    ok(&["synth", "--out", s(&corpus), "--n-posts", "100"]);
    let emb = dir.path().join("e.emb");
    ok(&["embed", "--corpus", s(&corpus), "--out", s(&emb), "--embed-dim", "4", "--epochs", "1"]);
    // A huge step with clipping off overflows the parameters.
    let out = npd(&[
        "train", "--corpus", s(&corpus), "--embeddings", s(&emb), "--out", s(&dir.path().join("m.ckpt")),
        "--lr", "1e300", "--no-clip", "--max-epochs", "3", "--hidden-dim", "4", "--head-dim", "4",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
