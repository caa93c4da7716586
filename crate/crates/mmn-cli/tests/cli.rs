//! End-to-end runs of the `mmn` binary: preprocess → audit → train → eval
//! → summarize, determinism of reruns, and the error paths.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mmn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmn"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mmn");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Small synthetic corpus: distinct documents, short clean titles.
fn write_corpus(path: &Path, posts: usize) {
    let subjects = ["cat", "dog", "bird", "fox", "bear", "wolf", "hare", "deer", "owl", "mole"];
    let verbs = ["jumped", "slept", "ran", "dug", "sang", "hid", "swam", "climbed", "rolled", "sat"];
    let places = ["garden", "river", "forest", "meadow", "cellar", "roof", "barn", "yard", "hill", "cave"];
    let mut lines = String::new();
    for i in 0..posts {
        let s = subjects[i % subjects.len()];
        let v = verbs[(i / subjects.len() + i) % verbs.len()];
        let p = places[(i * 3 + 1) % places.len()];
        let body = format!(
            "the {} {} near the {} all day. nobody saw it happen at all.",
            s, v, p
        );
        let title = format!("{} {} in the {}", s, v, p);
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({"id": format!("p{}", i), "document": body, "title": title, "tldr": null})
        ));
    }
    std::fs::write(path, lines).unwrap();
}

fn overrides_json(dir: &Path, epochs: usize) -> PathBuf {
    let path = dir.join("overrides.json");
    std::fs::write(
        &path,
        serde_json::json!({
            "d_emb": 32,
            "encoder_layers": 3,
            "decoder_layers": 2,
            "memory_layers": [1, 3],
            "eps_smooth": 0.1,
            "lr_floor": 0.001,
            "max_epochs": epochs,
            "batch_size": 1
        })
        .to_string(),
    )
    .unwrap();
    path
}

#[test]
fn preprocess_is_deterministic_and_splits_95_5() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 40);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(mmn().args([
            "preprocess",
            "--input",
            corpus.to_str().unwrap(),
            "--profile",
            "tifu-short",
            "--seed",
            "13",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    for name in ["train.jsonl", "test.jsonl", "vocab.txt"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{} differs between identical runs", name);
    }
    let train_lines = std::fs::read_to_string(out_a.join("train.jsonl")).unwrap();
    let test_lines = std::fs::read_to_string(out_a.join("test.jsonl")).unwrap();
    assert_eq!(train_lines.lines().count(), 38);
    assert_eq!(test_lines.lines().count(), 2);
    let vocab = std::fs::read_to_string(out_a.join("vocab.txt")).unwrap();
    assert!(vocab.starts_with("<pad>\n<unk>\n<bos>\n<eos>\n"));
    assert!(out_a.join("manifest.json").exists());
}

#[test]
fn malformed_corpus_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    std::fs::write(
        &corpus,
        "{\"id\":\"p0\",\"document\":\"text here\",\"title\":\"t\",\"tldr\":null}\nnot json at all\n",
    )
    .unwrap();
    let out = mmn()
        .args([
            "preprocess",
            "--input",
            corpus.to_str().unwrap(),
            "--profile",
            "tifu-short",
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr was: {}", stderr);
}

#[test]
fn unknown_profile_is_an_error() {
    let out = mmn()
        .args(["preprocess", "--input", "x.jsonl", "--profile", "mystery", "--out", "o"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn audit_writes_report_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 30);
    let pre = dir.path().join("pre");
    run_ok(mmn().args([
        "preprocess",
        "--input",
        corpus.to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--out",
        pre.to_str().unwrap(),
    ]));
    let audit = dir.path().join("audit");
    run_ok(mmn().args([
        "audit",
        "--input",
        pre.join("train.jsonl").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--bins",
        "10",
        "--scores",
        "17.9",
        "--out",
        audit.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(audit.join("report.json")).unwrap()).unwrap();
    assert!(report["lead"]["rouge_1"].as_f64().unwrap() >= 0.0);
    assert!(report["ratios"]["pg_lead"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["novel_ngram_pct"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(audit.join("histogram.csv")).unwrap();
    assert!(csv.starts_with("bin_start,density\n"));
    assert_eq!(csv.lines().count(), 11);

    // without --scores the ratio fields are absent
    let audit2 = dir.path().join("audit2");
    run_ok(mmn().args([
        "audit",
        "--input",
        pre.join("train.jsonl").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--out",
        audit2.to_str().unwrap(),
    ]));
    let report2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(audit2.join("report.json")).unwrap())
            .unwrap();
    assert!(report2.get("ratios").is_none());
}

#[test]
fn train_eval_summarize_round_trip_memorizes_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 20);
    let pre = dir.path().join("pre");
    run_ok(mmn().args([
        "preprocess",
        "--input",
        corpus.to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--out",
        pre.to_str().unwrap(),
    ]));
    let overrides = overrides_json(dir.path(), 120);
    let run = dir.path().join("run");
    run_ok(mmn().args([
        "train",
        "--input",
        pre.join("train.jsonl").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--seed",
        "13",
        "--config",
        overrides.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]));
    let loss_csv = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(loss_csv.starts_with("epoch,step,lr,loss\n"));

    // eval on the training split: the memorized fixture scores perfectly
    let report_path = dir.path().join("eval.json");
    run_ok(mmn().args([
        "eval",
        "--input",
        pre.join("train.jsonl").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--checkpoint",
        run.join("checkpoint.mmn").to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let rouge_l = report["rouge_l"].as_f64().unwrap();
    assert!(
        (rouge_l - 100.0).abs() < 1e-9,
        "expected perfect reproduction on the memorized fixture, got R-L {}",
        rouge_l
    );
    assert!(report["perplexity"].as_f64().unwrap() >= 1.0);

    // summarize one training document and compare with its gold title
    let train_lines = std::fs::read_to_string(pre.join("train.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(train_lines.lines().next().unwrap()).unwrap();
    let id = first["id"].as_str().unwrap();
    let corpus_text = std::fs::read_to_string(&corpus).unwrap();
    let post: serde_json::Value = corpus_text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|p| p["id"] == id)
        .unwrap();
    let doc_file = dir.path().join("doc.txt");
    std::fs::write(&doc_file, post["document"].as_str().unwrap()).unwrap();
    let out = run_ok(mmn().args([
        "summarize",
        "--checkpoint",
        run.join("checkpoint.mmn").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--input",
        doc_file.to_str().unwrap(),
    ]));
    let summary = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert_eq!(summary, post["title"].as_str().unwrap());
}

#[test]
fn training_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 20);
    let pre = dir.path().join("pre");
    run_ok(mmn().args([
        "preprocess",
        "--input",
        corpus.to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--out",
        pre.to_str().unwrap(),
    ]));
    let overrides = overrides_json(dir.path(), 4);
    let run_a = dir.path().join("runa");
    let run_b = dir.path().join("runb");
    for run in [&run_a, &run_b] {
        run_ok(mmn().args([
            "train",
            "--input",
            pre.join("train.jsonl").to_str().unwrap(),
            "--vocab",
            pre.join("vocab.txt").to_str().unwrap(),
            "--profile",
            "tifu-short",
            "--seed",
            "13",
            "--config",
            overrides.to_str().unwrap(),
            "--out",
            run.to_str().unwrap(),
        ]));
    }
    assert_eq!(
        std::fs::read(run_a.join("checkpoint.mmn")).unwrap(),
        std::fs::read(run_b.join("checkpoint.mmn")).unwrap(),
        "checkpoints differ between identical seeded runs"
    );
    assert_eq!(
        std::fs::read(run_a.join("loss.csv")).unwrap(),
        std::fs::read(run_b.join("loss.csv")).unwrap()
    );
}

#[test]
fn eval_rejects_mismatched_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 20);
    let pre = dir.path().join("pre");
    run_ok(mmn().args([
        "preprocess",
        "--input",
        corpus.to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--out",
        pre.to_str().unwrap(),
    ]));
    let overrides = overrides_json(dir.path(), 2);
    let run = dir.path().join("run");
    run_ok(mmn().args([
        "train",
        "--input",
        pre.join("train.jsonl").to_str().unwrap(),
        "--vocab",
        pre.join("vocab.txt").to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--config",
        overrides.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]));
    // a vocabulary with one extra token no longer matches the checkpoint
    let mut vocab = std::fs::read_to_string(pre.join("vocab.txt")).unwrap();
    vocab.push_str("straggler\n");
    let bad_vocab = dir.path().join("bad_vocab.txt");
    std::fs::write(&bad_vocab, vocab).unwrap();
    let out = mmn()
        .args([
            "eval",
            "--input",
            pre.join("train.jsonl").to_str().unwrap(),
            "--vocab",
            bad_vocab.to_str().unwrap(),
            "--checkpoint",
            run.join("checkpoint.mmn").to_str().unwrap(),
            "--out",
            dir.path().join("r.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("vocabulary"), "stderr: {}", stderr);
}

#[test]
fn corrupt_checkpoint_is_rejected_by_magic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    write_corpus(&corpus, 20);
    let pre = dir.path().join("pre");
    run_ok(mmn().args([
        "preprocess",
        "--input",
        corpus.to_str().unwrap(),
        "--profile",
        "tifu-short",
        "--out",
        pre.to_str().unwrap(),
    ]));
    let fake = dir.path().join("fake.mmn");
    std::fs::write(&fake, b"XXXXjunk").unwrap();
    let out = mmn()
        .args([
            "eval",
            "--input",
            pre.join("train.jsonl").to_str().unwrap(),
            "--vocab",
            pre.join("vocab.txt").to_str().unwrap(),
            "--checkpoint",
            fake.to_str().unwrap(),
            "--out",
            dir.path().join("r.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn gradcheck_command_passes_and_reports_ops() {
    let out = run_ok(mmn().args(["gradcheck", "--seeds", "1"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("encode_memory_decode_loss"));
    assert!(stdout.contains("conv1d_causal"));
    assert!(!stdout.contains("FAIL"));
}
