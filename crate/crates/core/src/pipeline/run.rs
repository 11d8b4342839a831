//! Stage sequencing: ingest, preprocess, vocabulary, vectorize, resample and
//! split (in the configured leakage order), train, evaluate.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::artifacts::{
    read_json, Document, DocumentClassifier, LoadedModel, ModelFile, PreprocessingRef, TrainedModel,
};
use super::cache::{hash_file, key, write_atomic, StageCache};
use super::config::{ConfigError, ExperimentConfig, Family, LeakageMode, ModelConfig, ModelSpec};
use super::{PipelineError, Result, Stage, MODEL_FORMAT_VERSION};
use crate::corpus::{cap_each_class, cap_majority, parse_dataset, read_corpus, relabel_binary, write_corpus};
use crate::ensemble::{EnsembleManifest, SoftVote};
use crate::eval::{
    confusion, markdown_table, metrics, seed_sequence, train_test_split, welch_ttest, EvalError, EvaluationReport,
    TTestResult,
};
use crate::features::{build_vocabulary, vectorize_corpus, FeatureMatrix, Vocabulary};
use crate::label::{ClassCounts, Label};
use crate::models::{
    fit_decision_tree, fit_forest, fit_linear, BoostingConfig, ForestConfig, ForestKind, KnnModel, LinearKind,
    ModelError, ProbabilisticClassifier,
};
use crate::neural::{encode_sequence, train_neural, NeuralKind};
use crate::resample::{self, ResamplePlan};
use crate::text::TokenList;

/// Model name of the soft-voting LSTM + CNN combination.
pub const ENSEMBLE_NAME: &str = "lstm-cnn";

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cache(&self) -> StageCache {
        StageCache::new(self.root.join("cache"))
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.root.join("vocab.tsv")
    }

    pub fn model(&self, family: Family) -> PathBuf {
        self.root.join(format!("model-{family}.json"))
    }

    pub fn ensemble_manifest(&self) -> PathBuf {
        self.root.join(format!("ensemble-{ENSEMBLE_NAME}.json"))
    }

    pub fn report(&self, model: &str) -> PathBuf {
        self.root.join(format!("report-{model}.json"))
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.md")
    }
}

/// Corpus after ingest, preprocessing and vocabulary construction.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub labels: Vec<Label>,
    pub tokens: Vec<TokenList>,
    pub vocab: Vocabulary,
    pub preprocessing: PreprocessingRef,
}

impl Prepared {
    pub fn counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.labels)
    }
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::runtime(Stage::Output, format!("{}: {e}", path.display()))
}

fn store(cache: &StageCache, stage: &str, key: &str, ext: &str, bytes: &[u8]) -> Result<()> {
    cache
        .store(stage, key, ext, bytes)
        .map_err(|e| output_err(&cache.path(stage, key, ext), e))
}

fn tokens_to_text(tokens: &[TokenList]) -> String {
    let mut out = String::new();
    for doc in tokens {
        out.push_str(&doc.join(" "));
        out.push('\n');
    }
    out
}

fn tokens_from_text(text: &str) -> Vec<TokenList> {
    text.lines()
        .map(|line| line.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect())
        .collect()
}

/// Runs the text stages, reusing cached results keyed by content hashes.
pub fn prepare(config: &ExperimentConfig, layout: &Layout) -> Result<Prepared> {
    let cache = layout.cache();
    let dataset = &config.dataset;
    let dataset_hash =
        hash_file(dataset).map_err(|e| PipelineError::data(Stage::Ingest, format!("{}: {e}", dataset.display())))?;
    let (preprocessor, preprocessing) =
        PreprocessingRef::load(config.stopwords.as_deref(), config.dictionary.as_deref())?;

    let class_cap = config.class_cap.map(|c| c.to_string()).unwrap_or_default();
    let corpus_key = key(&[
        "corpus-v1",
        &dataset_hash,
        &config.non_toxic_cap.to_string(),
        &class_cap,
        &config.seed.to_string(),
    ]);
    let corpus = match cache.load("corpus", &corpus_key, "tsv") {
        Some(bytes) => read_corpus(bytes.as_slice()).map_err(|e| PipelineError::data(Stage::Ingest, e))?,
        None => {
            let file = fs::File::open(dataset)
                .map_err(|e| PipelineError::data(Stage::Ingest, format!("{}: {e}", dataset.display())))?;
            let records = parse_dataset(std::io::BufReader::new(file))
                .map_err(|e| PipelineError::data(Stage::Ingest, format!("{}: {e}", dataset.display())))?;
            let relabeled = relabel_binary(records);
            log::info!("relabeled {:?}", relabeled.counts());
            let mut corpus = cap_majority(relabeled, config.non_toxic_cap, config.seed);
            if let Some(cap) = config.class_cap {
                corpus = cap_each_class(corpus, cap, config.seed);
            }
            let mut bytes = Vec::new();
            write_corpus(&corpus, &mut bytes).expect("in-memory write");
            store(&cache, "corpus", &corpus_key, "tsv", &bytes)?;
            corpus
        }
    };
    log::info!("corpus {:?}", corpus.counts());
    if corpus.len() < 4 {
        return Err(PipelineError::data(
            Stage::Ingest,
            format!("only {} labeled comments", corpus.len()),
        ));
    }

    let tokens_key = key(&[
        "tokens-v2",
        &corpus_key,
        &preprocessing.stopwords_hash,
        &preprocessing.dictionary_hash,
    ]);
    let tokens = match cache.load("tokens", &tokens_key, "txt") {
        Some(bytes) => {
            let text = String::from_utf8(bytes).map_err(|e| PipelineError::data(Stage::Preprocess, e))?;
            tokens_from_text(&text)
        }
        None => {
            let texts: Vec<&str> = corpus.comments().iter().map(|c| c.text.as_str()).collect();
            let tokens = preprocessor.preprocess_many(&texts);
            store(&cache, "tokens", &tokens_key, "txt", tokens_to_text(&tokens).as_bytes())?;
            tokens
        }
    };
    if tokens.len() != corpus.len() {
        return Err(PipelineError::data(
            Stage::Preprocess,
            format!(
                "token cache holds {} documents for {} comments",
                tokens.len(),
                corpus.len()
            ),
        ));
    }

    let vocab_key = key(&["vocab-v1", &tokens_key, &config.max_features.to_string()]);
    let vocab = match cache.load("vocab", &vocab_key, "tsv") {
        Some(bytes) => {
            Vocabulary::read_from(bytes.as_slice()).map_err(|e| PipelineError::data(Stage::Vocabulary, e))?
        }
        None => {
            let vocab = build_vocabulary(&tokens, config.max_features)
                .map_err(|e| PipelineError::data(Stage::Vocabulary, e))?;
            store(&cache, "vocab", &vocab_key, "tsv", vocab.to_text().as_bytes())?;
            vocab
        }
    };
    log::info!("vocabulary of {} terms", vocab.len());

    Ok(Prepared {
        labels: corpus.labels(),
        tokens,
        vocab,
        preprocessing,
    })
}

/// Rows of one side of the split. `docs[i]` is the corpus document whose
/// tokens stand in for row `i`; synthetic rows point at their parent.
#[derive(Debug, Clone)]
pub struct Fold {
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
    pub docs: Vec<usize>,
}

impl Fold {
    pub fn counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.y)
    }
}

#[derive(Debug, Clone)]
pub struct Folds {
    pub train: Fold,
    pub test: Fold,
}

fn select(x: &FeatureMatrix, y: &[Label], docs: &[usize], indices: &[usize]) -> Fold {
    Fold {
        x: x.select(indices),
        y: indices.iter().map(|&i| y[i]).collect(),
        docs: indices.iter().map(|&i| docs[i]).collect(),
    }
}

/// Vectorizes the corpus, then resamples and splits in the configured order.
pub fn build_folds(config: &ExperimentConfig, prepared: &Prepared) -> Result<Folds> {
    let matrix = vectorize_corpus(&prepared.tokens, &prepared.vocab, config.features);
    let plan = ResamplePlan {
        strategy: config.resample,
        k_neighbors: config.smote_k,
        seed: config.seed,
    };
    let split = |n: usize| {
        train_test_split(n, config.split_ratio, config.seed).map_err(|e| PipelineError::data(Stage::Split, e))
    };
    let folds = match config.leakage_mode {
        LeakageMode::Paper => {
            let r = resample::apply(&plan, &matrix, &prepared.labels)
                .map_err(|e| PipelineError::data(Stage::Resample, e))?;
            log::info!("resampled {:?}", r.counts());
            let docs: Vec<usize> = r.origins.iter().map(|o| o.source()).collect();
            let s = split(r.labels.len())?;
            Folds {
                train: select(&r.matrix, &r.labels, &docs, &s.train),
                test: select(&r.matrix, &r.labels, &docs, &s.test),
            }
        }
        LeakageMode::NoLeakage => {
            let identity: Vec<usize> = (0..prepared.labels.len()).collect();
            let s = split(prepared.labels.len())?;
            let train = select(&matrix, &prepared.labels, &identity, &s.train);
            let r = resample::apply(&plan, &train.x, &train.y).map_err(|e| PipelineError::data(Stage::Resample, e))?;
            log::info!("resampled training rows {:?}", r.counts());
            Folds {
                train: Fold {
                    docs: r.origins.iter().map(|o| train.docs[o.source()]).collect(),
                    x: r.matrix,
                    y: r.labels,
                },
                test: select(&matrix, &prepared.labels, &identity, &s.test),
            }
        }
    };
    log::info!("train {:?}, test {:?}", folds.train.counts(), folds.test.counts());
    Ok(folds)
}

fn model_err(stage: Stage, e: ModelError) -> PipelineError {
    match e {
        ModelError::SingleClassTraining | ModelError::EmptyTraining => PipelineError::data(stage, e),
        other => PipelineError::runtime(stage, other),
    }
}

fn neural_kind(family: Family) -> NeuralKind {
    if family == Family::Lstm {
        NeuralKind::Lstm
    } else {
        NeuralKind::Cnn
    }
}

fn fit_model(config: &ExperimentConfig, spec: &ModelSpec, prepared: &Prepared, train: &Fold) -> Result<ModelFile> {
    let stage = Stage::Train(spec.name);
    let err = |e| model_err(stage.clone(), e);
    let (x, y) = (&train.x, train.y.as_slice());
    log::info!("training {} on {} rows", spec.name, y.len());
    let mut max_len = None;
    let model = match &spec.config {
        ModelConfig::Lr(c) => TrainedModel::Linear(fit_linear(LinearKind::Logistic, x, y, c).map_err(err)?),
        ModelConfig::Svm(c) => TrainedModel::Linear(fit_linear(LinearKind::Svm, x, y, c).map_err(err)?),
        ModelConfig::Knn(c) => TrainedModel::Knn(KnnModel::fit(x, y, c).map_err(err)?),
        ModelConfig::Rf(c) => TrainedModel::Trees(
            fit_forest(
                ForestKind::RandomForest,
                x,
                y,
                c,
                &BoostingConfig::default(),
                config.seed,
            )
            .map_err(err)?,
        ),
        ModelConfig::Gbm(c) => TrainedModel::Trees(
            fit_forest(
                ForestKind::GradientBoosting,
                x,
                y,
                &ForestConfig::default(),
                c,
                config.seed,
            )
            .map_err(err)?,
        ),
        ModelConfig::Dt(c) => TrainedModel::Tree(fit_decision_tree(x, y, c).map_err(err)?),
        ModelConfig::Lstm(s) | ModelConfig::Cnn(s) => {
            let mut data = Vec::with_capacity(y.len());
            for (&doc, &label) in train.docs.iter().zip(y) {
                match encode_sequence(&prepared.tokens[doc], &prepared.vocab, s.max_len) {
                    Ok(seq) => data.push((seq, label)),
                    Err(ModelError::EmptyAfterEncoding) => {}
                    Err(e) => return Err(err(e)),
                }
            }
            if data.len() < y.len() {
                log::info!(
                    "{}: skipped {} rows with no in-vocabulary token",
                    spec.name,
                    y.len() - data.len()
                );
            }
            let n_ids = prepared.vocab.len() + 1;
            let (model, report) = train_neural(neural_kind(spec.name), &data, n_ids, s).map_err(err)?;
            log::info!("{} epoch losses {:?}", spec.name, report.epoch_losses);
            max_len = Some(s.max_len);
            TrainedModel::Neural(model)
        }
    };
    Ok(ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        family: spec.name,
        preset: spec.preset,
        config: spec.config.clone(),
        features: config.features,
        vocab_path: "vocab.tsv".to_string(),
        vocab_hash: prepared.vocab.content_hash(),
        max_len,
        preprocessing: prepared.preprocessing.clone(),
        model,
    })
}

fn test_documents(prepared: &Prepared, test: &Fold) -> Vec<Document> {
    test.x
        .rows
        .iter()
        .zip(&test.docs)
        .map(|(row, &doc)| Document {
            row: row.clone(),
            tokens: prepared.tokens[doc].clone(),
        })
        .collect()
}

fn evaluate_classifier<C>(
    config: &ExperimentConfig,
    name: &str,
    classifier: &C,
    docs: &[Document],
    folds: &Folds,
) -> Result<EvaluationReport>
where
    C: ProbabilisticClassifier<Document> + Sync,
{
    let stage = Stage::Evaluate(name.to_string());
    let predicted: Vec<Label> = docs
        .par_iter()
        .map(|d| match classifier.predict(d) {
            // a lone sequence model has nothing to read: an even split, whose argmax is NonToxic
            Err(ModelError::EmptyAfterEncoding) => Ok(crate::VotePair::uniform().argmax()),
            other => other,
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| model_err(stage.clone(), e))?;
    let cm = confusion(&predicted, &folds.test.y).map_err(|e| PipelineError::runtime(stage.clone(), e))?;
    let metrics = metrics(&cm).map_err(|e| PipelineError::data(stage, e))?;
    log::info!("{name}: accuracy {:.4}", metrics.accuracy);
    Ok(EvaluationReport {
        fingerprint: config.fingerprint(),
        seed: config.seed,
        resample: config.resample.to_string(),
        features: config.features.to_string(),
        model: name.to_string(),
        train_counts: folds.train.counts(),
        test_counts: folds.test.counts(),
        cm,
        metrics,
        config: config.to_json(),
    })
}

fn evaluate_models(
    config: &ExperimentConfig,
    prepared: &Prepared,
    folds: &Folds,
    models: &[ModelFile],
) -> Result<Vec<EvaluationReport>> {
    let docs = test_documents(prepared, &folds.test);
    fn classifier<'a>(file: &'a ModelFile, vocab: &'a Vocabulary) -> DocumentClassifier<'a> {
        DocumentClassifier {
            model: &file.model,
            vocab,
            max_len: file.max_len.unwrap_or(0),
        }
    }
    let mut reports = Vec::with_capacity(models.len() + 1);
    for file in models {
        reports.push(evaluate_classifier(
            config,
            file.family.as_str(),
            &classifier(file, &prepared.vocab),
            &docs,
            folds,
        )?);
    }
    let member = |family| models.iter().find(|m| m.family == family);
    if let (Some(lstm), Some(cnn)) = (member(Family::Lstm), member(Family::Cnn)) {
        let ensemble = SoftVote {
            a: classifier(lstm, &prepared.vocab),
            b: classifier(cnn, &prepared.vocab),
        };
        reports.push(evaluate_classifier(config, ENSEMBLE_NAME, &ensemble, &docs, folds)?);
    }
    Ok(reports)
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| output_err(path, e))
}

fn write_models(layout: &Layout, prepared: &Prepared, models: &[ModelFile]) -> Result<()> {
    write(&layout.vocabulary(), prepared.vocab.to_text().as_bytes())?;
    for file in models {
        write(&layout.model(file.family), &to_json_bytes(file))?;
    }
    if models.iter().any(|m| m.family == Family::Lstm) && models.iter().any(|m| m.family == Family::Cnn) {
        let manifest = EnsembleManifest::new("model-lstm.json", "model-cnn.json");
        write(&layout.ensemble_manifest(), &to_json_bytes(&manifest))?;
    }
    Ok(())
}

fn write_reports(layout: &Layout, reports: &[EvaluationReport]) -> Result<()> {
    for report in reports {
        write(&layout.report(&report.model), &to_json_bytes(report))?;
    }
    write(&layout.summary(), markdown_table(reports).as_bytes())
}

fn fit_all(config: &ExperimentConfig, prepared: &Prepared, folds: &Folds) -> Result<Vec<ModelFile>> {
    config
        .models
        .iter()
        .map(|spec| fit_model(config, spec, prepared, &folds.train))
        .collect()
}

/// Trains every configured model and writes model files, the vocabulary and
/// (when both sequence models are listed) the ensemble manifest.
pub fn train(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(out);
    let prepared = prepare(config, &layout)?;
    let folds = build_folds(config, &prepared)?;
    let models = fit_all(config, &prepared, &folds)?;
    write_models(&layout, &prepared, &models)?;
    Ok(models.iter().map(|m| layout.model(m.family)).collect())
}

/// Evaluates previously trained model files on the configured test split.
pub fn evaluate(config: &ExperimentConfig, out: &Path) -> Result<Vec<EvaluationReport>> {
    let layout = Layout::new(out);
    let prepared = prepare(config, &layout)?;
    let folds = build_folds(config, &prepared)?;
    let expected = prepared.vocab.content_hash();
    let mut models = Vec::with_capacity(config.models.len());
    for spec in &config.models {
        let path = layout.model(spec.name);
        let file: ModelFile = read_json(&path, Stage::Evaluate(spec.name.to_string()))?;
        if file.vocab_hash != expected {
            return Err(PipelineError::ManifestMismatch {
                path,
                what: "vocabulary",
                expected: file.vocab_hash,
                found: expected,
            });
        }
        models.push(file);
    }
    let reports = evaluate_models(config, &prepared, &folds, &models)?;
    write_reports(&layout, &reports)?;
    Ok(reports)
}

fn experiment_reports(
    config: &ExperimentConfig,
    layout: &Layout,
) -> Result<(Prepared, Vec<ModelFile>, Vec<EvaluationReport>)> {
    let prepared = prepare(config, layout)?;
    let folds = build_folds(config, &prepared)?;
    let models = fit_all(config, &prepared, &folds)?;
    let reports = evaluate_models(config, &prepared, &folds, &models)?;
    Ok((prepared, models, reports))
}

/// Train and evaluate in one pass, writing models, reports and the summary.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<Vec<EvaluationReport>> {
    let layout = Layout::new(out);
    let (prepared, models, reports) = experiment_reports(config, &layout)?;
    write_models(&layout, &prepared, &models)?;
    write_reports(&layout, &reports)?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    pub toxic_prob: f64,
    pub nontoxic_prob: f64,
}

/// Classifies raw text with a model file or an ensemble manifest.
pub fn predict_text(path: &Path, text: &str) -> Result<Prediction> {
    let value: serde_json::Value = read_json(path, Stage::Predict)?;
    let (label, pair) = if value.get("members").is_some() {
        let manifest: EnsembleManifest = serde_json::from_value(value)
            .map_err(|e| PipelineError::data(Stage::Predict, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let a = LoadedModel::load(&base.join(&manifest.members[0]))?;
        let b = LoadedModel::load(&base.join(&manifest.members[1]))?;
        if a.file.vocab_hash != b.file.vocab_hash {
            return Err(PipelineError::ManifestMismatch {
                path: base.join(&manifest.members[1]),
                what: "vocabulary",
                expected: a.file.vocab_hash.clone(),
                found: b.file.vocab_hash.clone(),
            });
        }
        let doc = a.document(text);
        let ensemble = SoftVote {
            a: a.classifier(),
            b: b.classifier(),
        };
        let pair = ensemble.predict_proba(&doc).map_err(|e| model_err(Stage::Predict, e))?;
        let label = ensemble.predict(&doc).map_err(|e| model_err(Stage::Predict, e))?;
        (label, pair)
    } else {
        let model = LoadedModel::load(path)?;
        let pair = match model.classifier().predict_proba(&model.document(text)) {
            Err(ModelError::EmptyAfterEncoding) => crate::VotePair::uniform(),
            other => other.map_err(|e| model_err(Stage::Predict, e))?,
        };
        (pair.argmax(), pair)
    };
    Ok(Prediction {
        label,
        toxic_prob: pair.toxic_prob,
        nontoxic_prob: pair.nontoxic_prob,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestOutcome {
    pub system_a: String,
    pub system_b: String,
    pub accuracies_a: Vec<f64>,
    pub accuracies_b: Vec<f64>,
    pub result: TTestResult,
}

/// The model whose accuracy represents a configuration: the LSTM-CNN
/// ensemble when both members are listed, otherwise the first model.
fn system_name(config: &ExperimentConfig) -> String {
    if config.has_model(Family::Lstm) && config.has_model(Family::Cnn) {
        ENSEMBLE_NAME.to_string()
    } else {
        config.models[0].name.to_string()
    }
}

/// Runs both configurations with seeds `seed..seed + runs` and compares the
/// resulting accuracies with Welch's test.
pub fn run_ttest(a: &ExperimentConfig, b: &ExperimentConfig, runs: usize, out: &Path) -> Result<TTestOutcome> {
    if runs < 2 {
        return Err(ConfigError(EvalError::SampleTooSmall(runs).to_string()).into());
    }
    let layout = Layout::new(out);
    let accuracies = |config: &ExperimentConfig| -> Result<Vec<f64>> {
        let name = system_name(config);
        seed_sequence(config.seed, runs)
            .into_iter()
            .map(|seed| {
                let (_, _, reports) = experiment_reports(&config.with_seed(seed), &layout)?;
                let report = reports.iter().find(|r| r.model == name).expect("system is evaluated");
                Ok(report.metrics.accuracy)
            })
            .collect()
    };
    let accuracies_a = accuracies(a)?;
    let accuracies_b = accuracies(b)?;
    let result = welch_ttest(&accuracies_a, &accuracies_b, 0.05)
        .map_err(|e| PipelineError::runtime(Stage::Evaluate("t-test".into()), e))?;
    Ok(TTestOutcome {
        system_a: system_name(a),
        system_b: system_name(b),
        accuracies_a,
        accuracies_b,
        result,
    })
}
