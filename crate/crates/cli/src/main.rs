//! Command-line front end for the pain-mention pipeline. Subcommands mirror
//! the pipeline stages: corpus filtering, span extraction, agreement checks,
//! adjudication, training, evaluation, prediction, error reports, and
//! synthetic corpus generation.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use painclass::annotation::{
    adjudicate, gate_check, load_annotations, load_gold, round_agreement, save_annotations,
    save_gold, AgreementReport, AnnotationLabel, GateOutcome, DEFAULT_AGREEMENT_GATE,
};
use painclass::classifiers::{
    load_embeddings, load_predictions, save_predictions, DEFAULT_EPOCHS, DEFAULT_LAMBDA,
    DEFAULT_NEIGHBORS,
};
use painclass::corpus::{load_corpus, save_corpus, Document};
use painclass::evaluation::{
    error_report, kfold_cv, kfold_cv_dense, train_eval_split, train_eval_split_dense, CvReport,
    Metrics, SplitSpec,
};
use painclass::features::PreprocessConfig;
use painclass::jsonl::write_json_file;
use painclass::lexicon::{filter_documents, Lexicon, MatchMode, DEFAULT_LEXICON_TEXT};
use painclass::pipeline::{
    join_labeled, join_labeled_dense, load_model, predict_dense, predict_spans, save_model,
    train_artifact, train_dense_artifact, ModelArtifact, ModelSpec,
};
use painclass::spans::{extract_spans_corpus, load_spans, save_spans, DEFAULT_WINDOW};
use painclass::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "painclass", version, about = "Pain-mention classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep only documents with at least one lexicon match.
    Filter(FilterArgs),
    /// Extract candidate spans around lexicon matches.
    ExtractSpans(ExtractSpansArgs),
    /// Compute inter-annotator agreement and check the quality gate.
    Agreement(AgreementArgs),
    /// Resolve annotations into gold labels by majority vote.
    Adjudicate(AdjudicateArgs),
    /// Train a classifier and write a model file.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation with confidence intervals.
    Cv(CvArgs),
    /// Train on a stratified split and score the held-out parts.
    Evaluate(EvaluateArgs),
    /// Classify spans with a trained model file.
    Predict(PredictArgs),
    /// List false positives and false negatives, most confident first.
    ErrorReport(ErrorReportArgs),
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MatchModeArg {
    /// Match only at word boundaries.
    Word,
    /// Match anywhere, including inside words.
    Substring,
}

impl From<MatchModeArg> for MatchMode {
    fn from(arg: MatchModeArg) -> Self {
        match arg {
            MatchModeArg::Word => MatchMode::WordBoundary,
            MatchModeArg::Substring => MatchMode::Substring,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    /// Linear SVM over tf-idf features.
    Svm,
    /// k-nearest neighbors over tf-idf features.
    Knn,
    /// Majority-class baseline.
    Baseline,
    /// Linear SVM over precomputed dense embeddings.
    Dense,
}

#[derive(Args)]
struct FilterArgs {
    /// Lexicon file, one term per line.
    #[arg(long)]
    lexicon: PathBuf,
    /// Corpus JSONL file.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "word")]
    match_mode: MatchModeArg,
    /// Output corpus JSONL file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractSpansArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "word")]
    match_mode: MatchModeArg,
    /// Context characters kept on each side of a match.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Output spans JSONL file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AgreementArgs {
    /// Annotations JSONL file.
    #[arg(long)]
    annotations: PathBuf,
    /// Restrict to records from one annotation round.
    #[arg(long)]
    round: Option<u32>,
    /// Kappa the report must exceed to pass the gate.
    #[arg(long, default_value_t = DEFAULT_AGREEMENT_GATE)]
    threshold: f64,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdjudicateArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// JSON object mapping span_id to a label, for spans without a majority.
    #[arg(long)]
    resolutions: Option<PathBuf>,
    /// Output gold JSONL file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Spans JSONL file; required for text models.
    #[arg(long, required_if_eq_any([("model", "svm"), ("model", "knn"), ("model", "baseline")]))]
    spans: Option<PathBuf>,
    /// Gold labels JSONL file.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Trainer RNG seed; required for svm and dense.
    #[arg(long, required_if_eq_any([("model", "svm"), ("model", "dense")]))]
    seed: Option<u64>,
    /// SVM regularization strength.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// SVM training epochs.
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: u32,
    /// Neighbor count for knn.
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    k: usize,
    /// Embeddings JSONL file; required for dense.
    #[arg(long, required_if_eq("model", "dense"))]
    embeddings: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    model_file: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long, required_if_eq_any([("model", "svm"), ("model", "knn"), ("model", "baseline")]))]
    spans: Option<PathBuf>,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Seed for fold assignment and trainer RNG.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: u32,
    /// Neighbor count for knn.
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    neighbors: usize,
    #[arg(long, required_if_eq("model", "dense"))]
    embeddings: Option<PathBuf>,
    /// Lexicon file, recorded in the report for provenance.
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, required_if_eq_any([("model", "svm"), ("model", "knn"), ("model", "baseline")]))]
    spans: Option<PathBuf>,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Seed for the split shuffle and trainer RNG.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: u32,
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    neighbors: usize,
    #[arg(long, required_if_eq("model", "dense"))]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model_file: PathBuf,
    /// Spans JSONL file; required for text models.
    #[arg(long)]
    spans: Option<PathBuf>,
    /// Embeddings JSONL file; required for dense models.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output predictions JSONL file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ErrorReportArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    spans: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of documents to generate.
    #[arg(long)]
    docs: usize,
    #[arg(long)]
    seed: u64,
    /// Patient count; defaults to a fraction of the document count.
    #[arg(long)]
    patients: Option<usize>,
    /// Mean annotated spans per patient.
    #[arg(long)]
    mean_annotations: Option<f64>,
    /// Probability an annotator flips a span to a wrong label.
    #[arg(long)]
    noise: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Filter(args) => cmd_filter(args),
        Command::ExtractSpans(args) => cmd_extract_spans(args),
        Command::Agreement(args) => cmd_agreement(args),
        Command::Adjudicate(args) => cmd_adjudicate(args),
        Command::Train(args) => cmd_train(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::ErrorReport(args) => cmd_error_report(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Writes pretty JSON to the path, or to stdout when no path is given.
fn write_json_out<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json_file(path, value)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn model_config(spec: &ModelSpec) -> serde_json::Value {
    match *spec {
        ModelSpec::Svm { lambda, epochs, seed } => {
            json!({"name": "svm", "lambda": lambda, "epochs": epochs, "seed": seed})
        }
        ModelSpec::Knn { k } => json!({"name": "knn", "neighbors": k}),
        ModelSpec::Baseline => json!({"name": "baseline"}),
        ModelSpec::DenseSvm { lambda, epochs, seed } => {
            json!({"name": "dense", "lambda": lambda, "epochs": epochs, "seed": seed})
        }
    }
}

fn text_spec(model: ModelKind, lambda: f64, epochs: u32, neighbors: usize, seed: u64) -> ModelSpec {
    match model {
        ModelKind::Svm => ModelSpec::Svm { lambda, epochs, seed },
        ModelKind::Knn => ModelSpec::Knn { k: neighbors },
        ModelKind::Baseline => ModelSpec::Baseline,
        ModelKind::Dense => unreachable!("dense models do not take the text path"),
    }
}

fn note_skipped(skipped: usize) {
    if skipped > 0 {
        eprintln!("note: skipped {skipped} unresolved gold spans");
    }
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let lexicon = Lexicon::load(&args.lexicon)?;
    let matcher = lexicon.compile()?;
    let docs = load_corpus(&args.corpus)?;
    let kept: Vec<Document> = filter_documents(&matcher, &docs, args.match_mode.into())
        .into_iter()
        .map(|(doc, _)| doc.clone())
        .collect();
    save_corpus(&args.out, &kept)?;
    eprintln!("kept {} of {} documents", kept.len(), docs.len());
    Ok(())
}

fn cmd_extract_spans(args: ExtractSpansArgs) -> Result<()> {
    let lexicon = Lexicon::load(&args.lexicon)?;
    let matcher = lexicon.compile()?;
    let docs = load_corpus(&args.corpus)?;
    let spans = extract_spans_corpus(&docs, &matcher, args.match_mode.into(), args.window)?;
    save_spans(&args.out, &spans)?;
    eprintln!("extracted {} spans from {} documents", spans.len(), docs.len());
    Ok(())
}

#[derive(Serialize)]
struct AgreementOutput {
    #[serde(flatten)]
    report: AgreementReport,
    gate: GateOutcome,
}

fn cmd_agreement(args: AgreementArgs) -> Result<()> {
    let mut records = load_annotations(&args.annotations)?;
    if let Some(round) = args.round {
        records.retain(|r| r.round == Some(round));
        if records.is_empty() {
            bail!("no annotation records for round {round}");
        }
    }
    let report = round_agreement(&records)?;
    let gate = gate_check(&report, args.threshold);
    eprintln!(
        "kappa {:.4}, percent agreement {:.4} over {} spans: gate {}",
        report.kappa,
        report.percent_agreement,
        report.n_items,
        if gate.pass { "PASS" } else { "FAIL" }
    );
    write_json_out(&args.out, &AgreementOutput { report, gate })
}

fn cmd_adjudicate(args: AdjudicateArgs) -> Result<()> {
    let records = load_annotations(&args.annotations)?;
    let resolutions: BTreeMap<String, AnnotationLabel> = match &args.resolutions {
        Some(path) => {
            let raw = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&raw)
                .with_context(|| format!("parsing resolutions {}", path.display()))?
        }
        None => BTreeMap::new(),
    };
    let (gold, warnings) = adjudicate(&records, &resolutions)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    save_gold(&args.out, &gold)?;
    let unresolved = gold.iter().filter(|g| !g.is_resolved()).count();
    eprintln!("adjudicated {} spans ({} unresolved)", gold.len(), unresolved);
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let gold = load_gold(&args.gold)?;
    let artifact = match args.model {
        ModelKind::Dense => {
            let path = args.embeddings.as_ref().expect("clap enforces --embeddings");
            let embeddings = load_embeddings(path)?;
            let joined = join_labeled_dense(&embeddings, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let seed = args.seed.expect("clap enforces --seed");
            train_dense_artifact(&joined.vectors, &joined.labels, args.lambda, args.epochs, seed)?
        }
        _ => {
            let path = args.spans.as_ref().expect("clap enforces --spans");
            let spans = load_spans(path)?;
            let joined = join_labeled(&spans, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let spec = text_spec(
                args.model,
                args.lambda,
                args.epochs,
                args.k,
                args.seed.unwrap_or(0),
            );
            train_artifact(&joined.texts, &joined.labels, &spec, &PreprocessConfig::default())?
        }
    };
    save_model(&args.model_file, &artifact)?;
    eprintln!("trained {} model: {}", artifact.kind_name(), args.model_file.display());
    Ok(())
}

fn cmd_cv(args: CvArgs) -> Result<()> {
    let lexicon = Lexicon::load(&args.lexicon)?;
    let gold = load_gold(&args.gold)?;
    let config = PreprocessConfig::default();
    let (model_name, result, pipeline_config) = match args.model {
        ModelKind::Dense => {
            let path = args.embeddings.as_ref().expect("clap enforces --embeddings");
            let embeddings = load_embeddings(path)?;
            let joined = join_labeled_dense(&embeddings, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let dim = joined.vectors.first().map_or(0, Vec::len);
            let result = kfold_cv_dense(
                &joined.vectors,
                &joined.labels,
                args.lambda,
                args.epochs,
                args.k,
                args.seed,
            )?;
            let spec = ModelSpec::DenseSvm {
                lambda: args.lambda,
                epochs: args.epochs,
                seed: args.seed,
            };
            let pipeline_config = json!({
                "embedding_dim": dim,
                "model": model_config(&spec),
            });
            ("dense", result, pipeline_config)
        }
        _ => {
            let path = args.spans.as_ref().expect("clap enforces --spans");
            let spans = load_spans(path)?;
            let joined = join_labeled(&spans, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let spec =
                text_spec(args.model, args.lambda, args.epochs, args.neighbors, args.seed);
            let result =
                kfold_cv(&joined.texts, &joined.labels, &spec, &config, args.k, args.seed)?;
            let pipeline_config = json!({
                "preprocess": config.flag_summary(),
                "model": model_config(&spec),
            });
            (spec.name(), result, pipeline_config)
        }
    };
    let report = CvReport {
        model: model_name.to_string(),
        k: args.k,
        seed: args.seed,
        folds: result.folds,
        mean: result.mean,
        ci95: result.ci95,
        pipeline_config,
        lexicon_version: lexicon.version().to_string(),
    };
    eprintln!(
        "{}-fold cv, {}: mean f1 {:.4} ci95 [{:.4}, {:.4}]",
        report.k, report.model, report.mean.f1, report.ci95.f1[0], report.ci95.f1[1]
    );
    write_json_out(&args.out, &report)
}

#[derive(Serialize)]
struct SplitFractions {
    train: f64,
    test: f64,
    validation: f64,
}

#[derive(Serialize)]
struct EvalReport {
    model: String,
    seed: u64,
    split: SplitFractions,
    train_size: usize,
    test: Metrics,
    validation: Metrics,
    pipeline_config: serde_json::Value,
    lexicon_version: String,
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let lexicon = Lexicon::load(&args.lexicon)?;
    let gold = load_gold(&args.gold)?;
    let config = PreprocessConfig::default();
    let split = SplitSpec::standard(args.seed);
    let (model_name, evaluation, pipeline_config) = match args.model {
        ModelKind::Dense => {
            let path = args.embeddings.as_ref().expect("clap enforces --embeddings");
            let embeddings = load_embeddings(path)?;
            let joined = join_labeled_dense(&embeddings, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let dim = joined.vectors.first().map_or(0, Vec::len);
            let evaluation = train_eval_split_dense(
                &joined.vectors,
                &joined.labels,
                args.lambda,
                args.epochs,
                &split,
            )?;
            let spec = ModelSpec::DenseSvm {
                lambda: args.lambda,
                epochs: args.epochs,
                seed: args.seed,
            };
            let pipeline_config = json!({
                "embedding_dim": dim,
                "model": model_config(&spec),
            });
            ("dense", evaluation, pipeline_config)
        }
        _ => {
            let path = args.spans.as_ref().expect("clap enforces --spans");
            let spans = load_spans(path)?;
            let joined = join_labeled(&spans, &gold)?;
            note_skipped(joined.skipped_unresolved);
            let spec =
                text_spec(args.model, args.lambda, args.epochs, args.neighbors, args.seed);
            let evaluation =
                train_eval_split(&joined.texts, &joined.labels, &spec, &config, &split)?;
            let pipeline_config = json!({
                "preprocess": config.flag_summary(),
                "model": model_config(&spec),
            });
            (spec.name(), evaluation, pipeline_config)
        }
    };
    let report = EvalReport {
        model: model_name.to_string(),
        seed: args.seed,
        split: SplitFractions { train: split.train, test: split.test, validation: split.validation },
        train_size: evaluation.train_size,
        test: evaluation.test,
        validation: evaluation.validation,
        pipeline_config,
        lexicon_version: lexicon.version().to_string(),
    };
    eprintln!(
        "{}: test f1 {:.4}, validation f1 {:.4} (trained on {})",
        report.model, report.test.f1, report.validation.f1, report.train_size
    );
    write_json_out(&args.out, &report)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let artifact = load_model(&args.model_file)?;
    let predictions = match &artifact {
        ModelArtifact::DenseSvm { .. } => {
            let Some(path) = &args.embeddings else {
                bail!("model {} takes dense input; pass --embeddings", args.model_file.display());
            };
            let embeddings = load_embeddings(path)?;
            predict_dense(&artifact, &embeddings)?
        }
        _ => {
            let Some(path) = &args.spans else {
                bail!("model {} takes span text; pass --spans", args.model_file.display());
            };
            let spans = load_spans(path)?;
            predict_spans(&artifact, &spans)?
        }
    };
    save_predictions(&args.out, &predictions)?;
    let positive = predictions.iter().filter(|p| p.label == 1).count();
    eprintln!("wrote {} predictions ({} positive)", predictions.len(), positive);
    Ok(())
}

fn cmd_error_report(args: ErrorReportArgs) -> Result<()> {
    let predictions = load_predictions(&args.predictions)?;
    let gold = load_gold(&args.gold)?;
    let spans = load_spans(&args.spans)?;
    let report = error_report(&predictions, &gold, &spans)?;
    eprintln!(
        "{} false positives, {} false negatives",
        report.false_positives.len(),
        report.false_negatives.len()
    );
    write_json_out(&args.out, &report)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut config = SynthConfig::new(args.docs, args.seed);
    if let Some(patients) = args.patients {
        config.n_patients = patients;
    }
    if let Some(mean) = args.mean_annotations {
        config.spans_per_patient_mean = mean;
    }
    if let Some(noise) = args.noise {
        config.annotator_noise = noise;
    }
    let output = generate(&config)?;

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_corpus(&dir.join("corpus.jsonl"), &output.documents)?;
    fs::write(dir.join("lexicon.txt"), DEFAULT_LEXICON_TEXT)
        .with_context(|| format!("writing {}", dir.join("lexicon.txt").display()))?;
    save_spans(&dir.join("spans.jsonl"), &output.spans)?;
    save_annotations(&dir.join("annotations.jsonl"), &output.annotations)?;
    save_gold(&dir.join("gold.jsonl"), &output.gold)?;

    let manifest = json!({
        "config": {
            "n_docs": config.n_docs,
            "n_patients": config.n_patients,
            "spans_per_patient_mean": config.spans_per_patient_mean,
            "label_mix": config.label_mix,
            "annotator_noise": config.annotator_noise,
            "seed": config.seed,
        },
        "window": DEFAULT_WINDOW,
        "lexicon_version": Lexicon::builtin().version(),
        "totals": {
            "documents": output.documents.len(),
            "spans": output.spans.len(),
            "annotations": output.annotations.len(),
        },
    });
    write_json_file(&dir.join("manifest.json"), &manifest)?;

    eprintln!(
        "wrote {} documents, {} spans, {} annotations to {}",
        output.documents.len(),
        output.spans.len(),
        output.annotations.len(),
        dir.display()
    );
    Ok(())
}
