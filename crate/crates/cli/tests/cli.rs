use std::path::Path;
use std::process::{Command, Output};

use vehreid_core::reid::Index;

fn vehreid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vehreid")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vehreid(args);
    assert!(
        out.status.success(),
        "vehreid {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = vehreid(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "degrade", "split", "train", "eval", "fuse-eval", "classify", "index", "query", "plot-centroids"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = vehreid(&["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn query_without_constraint_exits_two() {
    let out = vehreid(&["query", "--index", "nowhere.idx"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least one"));
}

#[test]
fn missing_input_is_a_domain_error() {
    let out = vehreid(&["split", "--manifest", "/nonexistent/m.jsonl", "--train-out", "a", "--test-out", "b"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn split_is_a_partition_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["--seed", "4", "synth", "--out", s(&data), "--classes", "3", "--views", "front", "--colors", "red,white"]);
    let manifest = data.join("manifest.jsonl");
    let run = |tag: &str, seed: &str| {
        let (tr, te) = (dir.path().join(format!("train{tag}.jsonl")), dir.path().join(format!("test{tag}.jsonl")));
        ok(&["--seed", seed, "split", "--manifest", s(&manifest), "--test-fraction", "0.5", "--train-out", s(&tr), "--test-out", s(&te)]);
        (std::fs::read_to_string(tr).unwrap(), std::fs::read_to_string(te).unwrap())
    };
    let a = run("a", "9");
    let b = run("b", "9");
    assert_eq!(a, b);
    let lines = |t: &str| t.lines().skip(1).map(str::to_string).collect::<Vec<_>>();
    let mut all = lines(&a.0);
    all.extend(lines(&a.1));
    assert_eq!(all.len(), 6);
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 6);
}

#[test]
fn degrade_marks_records_bad() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--out", s(&data), "--classes", "2", "--views", "side", "--colors", "blue"]);
    let out = dir.path().join("bad");
    ok(&["degrade", "--manifest", s(&data.join("manifest.jsonl")), "--out", s(&out), "--keep-originals"]);
    let m = vehreid_core::dataset::Manifest::load(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(m.records.len(), 4);
    let bad = m.records.iter().filter(|r| r.quality == vehreid_core::dataset::Quality::Bad).count();
    assert_eq!(bad, 2);
    assert!(m.validate().is_empty());
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let data = p("data");
    ok(&["--seed", "3", "synth", "--out", s(&data), "--classes", "3", "--views", "front,side"]);
    let manifest = data.join("manifest.jsonl");
    let (mm, color, idx) = (p("mm.ckpt"), p("color.ckpt"), p("index.bin"));
    ok(&["--seed", "1", "train", "--manifest", s(&manifest), "--task", "make-model", "--epochs", "1", "--out", s(&mm)]);
    ok(&[
        "--seed", "1", "train", "--manifest", s(&manifest), "--task", "color", "--arch", "inception", "--epochs", "1",
        "--out", s(&color),
    ]);
    let eval = ok(&["--format", "csv", "eval", "--checkpoint", s(&mm), "--manifest", s(&manifest)]);
    assert!(eval.starts_with("subset,samples,correct,top1,top5\nall,60,"));

    let models = ["--makemodel", s(&mm), "--color", s(&color)];
    let mut args = vec!["index"];
    args.extend(models);
    args.extend(["--manifest", s(&manifest), "--out", s(&idx)]);
    ok(&args);
    let index = Index::load(&idx, None).unwrap();
    assert_eq!(index.len(), 60);

    let lines = ok(&["--format", "json-lines", "query", "--index", s(&idx), "--color", "white,red"]);
    let hits: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let expected: Vec<&str> = {
        let mut v: Vec<_> = index
            .records()
            .iter()
            .filter(|r| r.color.color == "white" || r.color.color == "red")
            .collect();
        v.sort_by(|a, b| b.color.score.total_cmp(&a.color.score).then(a.id.cmp(&b.id)));
        v.into_iter().map(|r| r.id.as_str()).collect()
    };
    let got: Vec<&str> = hits.iter().map(|h| h["id"].as_str().unwrap()).collect();
    assert_eq!(got, expected);
    for h in &hits {
        for key in ["id", "source", "score", "classid", "make", "model", "color"] {
            assert!(h.get(key).is_some(), "missing column {key}");
        }
    }

    let again = ok(&["--format", "json-lines", "query", "--index", s(&idx), "--color", "white,red"]);
    assert_eq!(lines, again);

    let out = vehreid(&["query", "--index", s(&idx), "--make", "Renalt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Renault"));

    let mut args = vec!["--format", "csv", "classify"];
    args.extend(models);
    let image = data.join("images/c000_white_front_00.png");
    args.extend(["--image", s(&image), "--top-k", "2"]);
    let first = ok(&args);
    assert_eq!(first, ok(&args));
    assert_eq!(first.lines().count(), 3);

    let svg = p("plot.svg");
    ok(&["plot-centroids", "--checkpoint", s(&color), "--manifest", s(&manifest), "--out", s(&svg)]);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}
