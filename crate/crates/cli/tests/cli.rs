//! End-to-end tests of the command-line interface: the full quickstart
//! pipeline run twice must produce byte-identical artifacts, and error
//! paths must exit with the documented codes and messages.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn painclass() -> Command {
    Command::new(env!("CARGO_BIN_EXE_painclass"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = painclass().args(args).output().expect("failed to spawn painclass");
    assert!(
        output.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

fn run_err(args: &[&str], expected_code: i32) -> String {
    let output = painclass().args(args).output().expect("failed to spawn painclass");
    assert_eq!(
        output.status.code(),
        Some(expected_code),
        "command {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn s(path: &Path) -> String {
    path.to_str().expect("temp paths are valid UTF-8").to_string()
}

/// Runs the whole pipeline in `dir` and returns the artifact paths.
fn run_pipeline(dir: &Path) -> Vec<PathBuf> {
    let synth = dir.join("synth");
    run_ok(&["synth", "--docs", "80", "--seed", "42", "--out", &s(&synth)]);

    let lexicon = synth.join("lexicon.txt");
    let corpus = synth.join("corpus.jsonl");
    let filtered = dir.join("filtered.jsonl");
    run_ok(&[
        "filter",
        "--lexicon",
        &s(&lexicon),
        "--corpus",
        &s(&corpus),
        "--out",
        &s(&filtered),
    ]);

    let spans = dir.join("spans.jsonl");
    run_ok(&[
        "extract-spans",
        "--lexicon",
        &s(&lexicon),
        "--corpus",
        &s(&filtered),
        "--out",
        &s(&spans),
    ]);
    // Every synthetic document carries a term, so extraction over the
    // filtered corpus reproduces the generator's span file exactly.
    assert_eq!(
        fs::read(&spans).unwrap(),
        fs::read(synth.join("spans.jsonl")).unwrap(),
        "extracted spans differ from the generated ones"
    );

    let annotations = synth.join("annotations.jsonl");
    let agreement = dir.join("agreement.json");
    run_ok(&["agreement", "--annotations", &s(&annotations), "--out", &s(&agreement)]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&agreement).unwrap()).unwrap();
    assert!(report["kappa"].is_f64());
    assert!(report["gate"]["pass"].is_boolean());

    let draft_gold = dir.join("gold.draft.jsonl");
    run_ok(&["adjudicate", "--annotations", &s(&annotations), "--out", &s(&draft_gold)]);

    // Spans without a two-vote majority go to an adjudicator; resolve them
    // all as relevant and re-run to get a fully labeled gold standard.
    let mut resolutions = serde_json::Map::new();
    for line in fs::read_to_string(&draft_gold).unwrap().lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        if record["status"] == "unresolved" {
            resolutions
                .insert(record["span_id"].as_str().unwrap().to_string(), "relevant".into());
        }
    }
    assert!(!resolutions.is_empty(), "expected at least one disputed span");
    let resolutions_file = dir.join("resolutions.json");
    fs::write(&resolutions_file, serde_json::to_string_pretty(&resolutions).unwrap()).unwrap();

    let gold = dir.join("gold.jsonl");
    run_ok(&[
        "adjudicate",
        "--annotations",
        &s(&annotations),
        "--resolutions",
        &s(&resolutions_file),
        "--out",
        &s(&gold),
    ]);
    for line in fs::read_to_string(&gold).unwrap().lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_ne!(record["status"], "unresolved");
    }

    let model_file = dir.join("svm.model");
    run_ok(&[
        "train",
        "--spans",
        &s(&spans),
        "--gold",
        &s(&gold),
        "--model",
        "svm",
        "--seed",
        "7",
        "--model-file",
        &s(&model_file),
    ]);

    let predictions = dir.join("predictions.jsonl");
    run_ok(&[
        "predict",
        "--model-file",
        &s(&model_file),
        "--spans",
        &s(&spans),
        "--out",
        &s(&predictions),
    ]);

    let errors = dir.join("errors.json");
    run_ok(&[
        "error-report",
        "--predictions",
        &s(&predictions),
        "--gold",
        &s(&gold),
        "--spans",
        &s(&spans),
        "--out",
        &s(&errors),
    ]);

    let cv = dir.join("cv.json");
    run_ok(&[
        "cv",
        "--spans",
        &s(&spans),
        "--gold",
        &s(&gold),
        "--model",
        "svm",
        "--k",
        "10",
        "--seed",
        "7",
        "--lexicon",
        &s(&lexicon),
        "--out",
        &s(&cv),
    ]);
    let cv_report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cv).unwrap()).unwrap();
    assert_eq!(cv_report["model"], "svm");
    assert_eq!(cv_report["k"], 10);
    assert_eq!(cv_report["ci95"]["method"], "student-t");
    assert_eq!(cv_report["folds"].as_array().unwrap().len(), 10);

    let eval = dir.join("eval.json");
    run_ok(&[
        "evaluate",
        "--spans",
        &s(&spans),
        "--gold",
        &s(&gold),
        "--model",
        "svm",
        "--seed",
        "7",
        "--lexicon",
        &s(&lexicon),
        "--out",
        &s(&eval),
    ]);
    let eval_report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(eval_report["split"]["train"], 0.8);
    assert!(eval_report["test"]["f1"].is_f64());

    vec![
        synth.join("corpus.jsonl"),
        synth.join("lexicon.txt"),
        synth.join("spans.jsonl"),
        synth.join("annotations.jsonl"),
        synth.join("gold.jsonl"),
        synth.join("manifest.json"),
        filtered,
        spans,
        agreement,
        draft_gold,
        resolutions_file,
        gold,
        model_file,
        predictions,
        errors,
        cv,
        eval,
    ]
}

#[test]
fn quickstart_pipeline_is_byte_for_byte_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let dir_a = root.path().join("a");
    let dir_b = root.path().join("b");
    fs::create_dir_all(&dir_a).unwrap();
    fs::create_dir_all(&dir_b).unwrap();

    let artifacts_a = run_pipeline(&dir_a);
    let artifacts_b = run_pipeline(&dir_b);
    for (a, b) in artifacts_a.iter().zip(&artifacts_b) {
        assert_eq!(
            fs::read(a).unwrap(),
            fs::read(b).unwrap(),
            "artifact {} differs between runs",
            a.file_name().unwrap().to_string_lossy()
        );
    }
}

#[test]
fn knn_baseline_and_dense_models_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let synth = dir.join("synth");
    run_ok(&["synth", "--docs", "60", "--seed", "9", "--out", &s(&synth)]);
    let spans = synth.join("spans.jsonl");
    let gold = dir.join("gold.jsonl");
    run_ok(&[
        "adjudicate",
        "--annotations",
        &s(&synth.join("annotations.jsonl")),
        "--out",
        &s(&gold),
    ]);

    for model in ["knn", "baseline"] {
        let model_file = dir.join(format!("{model}.model"));
        run_ok(&[
            "train",
            "--spans",
            &s(&spans),
            "--gold",
            &s(&gold),
            "--model",
            model,
            "--model-file",
            &s(&model_file),
        ]);
        let out = dir.join(format!("{model}.preds.jsonl"));
        run_ok(&["predict", "--model-file", &s(&model_file), "--spans", &s(&spans), "--out", &s(&out)]);
        assert!(fs::read_to_string(&out).unwrap().lines().count() > 0);
    }

    // Dense models consume precomputed vectors keyed by span id.
    let embeddings = dir.join("embeddings.jsonl");
    let mut lines = String::new();
    for (i, line) in fs::read_to_string(&spans).unwrap().lines().enumerate() {
        let span: serde_json::Value = serde_json::from_str(line).unwrap();
        let x = (i % 17) as f64 / 17.0;
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "span_id": span["span_id"],
                "vector": [x, 1.0 - x, (i % 5) as f64 / 5.0],
            })
        ));
    }
    fs::write(&embeddings, lines).unwrap();

    let dense_model = dir.join("dense.model");
    run_ok(&[
        "train",
        "--gold",
        &s(&gold),
        "--model",
        "dense",
        "--seed",
        "3",
        "--embeddings",
        &s(&embeddings),
        "--model-file",
        &s(&dense_model),
    ]);
    let dense_preds = dir.join("dense.preds.jsonl");
    run_ok(&[
        "predict",
        "--model-file",
        &s(&dense_model),
        "--embeddings",
        &s(&embeddings),
        "--out",
        &s(&dense_preds),
    ]);

    let cv_out = dir.join("dense.cv.json");
    run_ok(&[
        "cv",
        "--gold",
        &s(&gold),
        "--model",
        "dense",
        "--k",
        "10",
        "--seed",
        "3",
        "--embeddings",
        &s(&embeddings),
        "--lexicon",
        &s(&synth.join("lexicon.txt")),
        "--out",
        &s(&cv_out),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cv_out).unwrap()).unwrap();
    assert_eq!(report["model"], "dense");
    assert_eq!(report["pipeline_config"]["embedding_dim"], 3);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let stderr = run_err(&["cv", "--gold", "g.jsonl", "--model", "svm", "--spans", "s.jsonl", "--lexicon", "l.txt"], 2);
    assert!(stderr.contains("--seed"), "stderr: {stderr}");

    let stderr = run_err(&["train", "--gold", "g.jsonl", "--model", "svm", "--spans", "s.jsonl", "--model-file", "m"], 2);
    assert!(stderr.contains("--seed"), "stderr: {stderr}");

    run_err(&["no-such-command"], 2);

    let help = painclass().arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("extract-spans"));
}

#[test]
fn runtime_errors_exit_with_code_one() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();

    // Missing input file: the message names the path.
    let missing = dir.join("missing.jsonl");
    let stderr = run_err(
        &["agreement", "--annotations", &s(&missing)],
        1,
    );
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    assert!(stderr.contains("missing.jsonl"), "stderr: {stderr}");

    // Single-class gold labels cannot train a discriminative model.
    let synth = dir.join("synth");
    run_ok(&["synth", "--docs", "20", "--seed", "1", "--out", &s(&synth)]);
    let spans_text = fs::read_to_string(synth.join("spans.jsonl")).unwrap();
    let mut gold_lines = String::new();
    for line in spans_text.lines().take(4) {
        let span: serde_json::Value = serde_json::from_str(line).unwrap();
        gold_lines.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "span_id": span["span_id"],
                "label3": "relevant",
                "label2": 1,
                "status": "unanimous",
            })
        ));
    }
    let single_class_gold = dir.join("single.jsonl");
    fs::write(&single_class_gold, gold_lines).unwrap();
    let stderr = run_err(
        &[
            "train",
            "--spans",
            &s(&synth.join("spans.jsonl")),
            "--gold",
            &s(&single_class_gold),
            "--model",
            "svm",
            "--seed",
            "1",
            "--model-file",
            &s(&dir.join("m.model")),
        ],
        1,
    );
    assert!(stderr.contains("single-class training set"), "stderr: {stderr}");

    // A text model given only embeddings is a runtime error, not a crash.
    let gold = dir.join("gold.jsonl");
    run_ok(&[
        "adjudicate",
        "--annotations",
        &s(&synth.join("annotations.jsonl")),
        "--out",
        &s(&gold),
    ]);
    let model_file = dir.join("svm.model");
    run_ok(&[
        "train",
        "--spans",
        &s(&synth.join("spans.jsonl")),
        "--gold",
        &s(&gold),
        "--model",
        "svm",
        "--seed",
        "1",
        "--model-file",
        &s(&model_file),
    ]);
    let stderr = run_err(
        &["predict", "--model-file", &s(&model_file), "--out", &s(&dir.join("p.jsonl"))],
        1,
    );
    assert!(stderr.contains("--spans"), "stderr: {stderr}");

    // Round filters that match nothing are reported, not silently empty.
    let stderr = run_err(
        &[
            "agreement",
            "--annotations",
            &s(&synth.join("annotations.jsonl")),
            "--round",
            "99",
        ],
        1,
    );
    assert!(stderr.contains("round 99"), "stderr: {stderr}");
}
