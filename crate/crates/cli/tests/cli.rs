use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo").join(name)
}

fn csforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csforge"))
        .args(args)
        .env("CSFORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = csforge(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lex_gen_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let hi = dir.path().join("hi.jsonl");
    ok(&["ingest", "--input", s(&demo("hi_mono.txt")), "--source", "mono", "--out", s(&hi)]);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "--seed", seed, "lex-gen", "--corpus", s(&hi), "--lexicon", s(&demo("lexicon.tsv")), "--p", "0.25",
            "--variants", "2", "--out", s(&out),
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run("7", "a.jsonl");
    assert_eq!(a, run("7", "b.jsonl"));
    assert_ne!(a, run("8", "c.jsonl"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 96);
}

#[test]
fn report_commands_honour_format() {
    let c = demo("real_test_cs.jsonl");
    let json = ok(&["metrics", "--corpus", s(&c)]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["m_index"].as_f64().unwrap() > 0.0);
    let text = ok(&["--format", "text", "diversity", "--corpus", s(&c)]);
    assert!(text.lines().any(|l| l.starts_with("d: ")));
    let csv = ok(&["--format", "csv", "bleu", "--cand", s(&c), "--refs", s(&c)]);
    assert!(csv.contains("\nscore,100.0\n"), "{csv}");
    let sb = ok(&["--format", "text", "--seed", "3", "self-bleu", "--corpus", s(&c), "--sample", "10"]);
    assert!(sb.contains("self_bleu: "));
}

#[test]
fn emt_and_lm_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("emt.jsonl");
    let stdout = ok(&[
        "emt-gen", "--corpus", s(&demo("en.jsonl")), "--parses", s(&demo("en.ptb")), "--strategy", "alignment",
        "--hi", s(&demo("hi_par.jsonl")), "--align", s(&demo("align.pharaoh")), "--max-switches", "1",
        "--variants", "2", "--seed", "7", "--out", s(&out),
    ]);
    assert!(stdout.contains("generated: "));
    assert!(std::fs::read_to_string(&out).unwrap().contains("\"source\":\"EMT\""));

    let lm = dir.path().join("lm.bin");
    ok(&["lm-train", "--corpus", s(&demo("real_test_cs.jsonl")), "--order", "3", "--out", s(&lm)]);
    let ppl = ok(&["--format", "text", "lm-ppl", "--lm", s(&lm), "--corpus", s(&demo("real_test_cs.jsonl"))]);
    assert!(ppl.contains("plumbing comparator"));
}

#[test]
fn train_then_translate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"corpora": {{"pairs": {{"path": "{}", "kind": "parallel"}}}},
                "model": {{"d_model": 8, "n_heads": 2, "d_ff": 16, "max_len": 10}},
                "stages": [{{"name": "O", "mode": "SUPERVISED", "datasets": {{"parallel": ["pairs"]}}, "epochs": 1, "batch_size": 8}}]}}"#,
            s(&demo("real_valid.jsonl"))
        ),
    )
    .unwrap();
    let runs = dir.path().join("runs");
    ok(&["tcs-train", "--config", s(&cfg), "--seed", "7", "--out", s(&runs), "--w-dae", "0.5"]);
    for f in ["O.bin", "model.bin", "log.json"] {
        assert!(runs.join(f).is_file(), "{f}");
    }
    let hyp = dir.path().join("hyp.jsonl");
    ok(&["tcs-translate", "--ckpt", s(&runs.join("model.bin")), "--corpus", s(&demo("real_test_hi.jsonl")), "--out", s(&hyp)]);
    assert_eq!(std::fs::read_to_string(&hyp).unwrap().lines().count(), 60);

    let bad = csforge(&["tcs-train", "--config", s(&cfg), "--out", s(&runs), "--corpus", "nope=x.jsonl"]);
    assert!(!bad.status.success());
}

#[test]
fn failures_exit_nonzero_with_scoped_message() {
    let out = csforge(&["diversity", "--corpus", "/definitely/missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("csforge diversity: "), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        r#"{"steps": [
            {"name": "a", "after": ["b"], "run": {"op": "diversity", "corpus": "x.jsonl"}},
            {"name": "b", "after": ["a"], "run": {"op": "diversity", "corpus": "x.jsonl"}}]}"#,
    )
    .unwrap();
    std::fs::write(dir.path().join("x.jsonl"), "{\"id\":\"1\",\"text\":\"a b\"}\n").unwrap();
    let out = csforge(&["pipeline", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));
    assert!(!dir.path().join("out").exists());

    let out = csforge(&["diversity", "--corpus", s(&demo("en.jsonl"))]);
    assert!(out.status.success());
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_csforge"))
        .args(["diversity", "--corpus", s(&demo("en.jsonl"))])
        .env("CSFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!bad_threads.status.success());
}

#[test]
fn pipeline_failure_is_recorded_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.jsonl"), "{\"id\":\"1\",\"text\":\"a b\"}\n").unwrap();
    std::fs::write(dir.path().join("bad.tsv"), "no tab here\n").unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        r#"{"steps": [
            {"name": "div", "run": {"op": "diversity", "corpus": "x.jsonl", "out": "div.json"}},
            {"name": "lex", "run": {"op": "lex-gen", "corpus": "x.jsonl", "lexicon": "bad.tsv", "p": 0.1, "out": "y.jsonl"}}]}"#,
    )
    .unwrap();
    let out = csforge(&["pipeline", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step \"lex\" failed"), "{err}");
    let manifest = std::fs::read_to_string(dir.path().join("out/run_manifest.json")).unwrap();
    assert!(manifest.contains("\"complete\": false"));
    assert!(manifest.contains("\"status\": \"failed\""));
}
