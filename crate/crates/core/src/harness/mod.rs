//! Commands behind the `its` binary. Each reads its inputs, writes outputs
//! atomically and returns what it wrote so callers can inspect it.

pub mod config;
pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{write_atomic, Checkpoint, TrainingState};
use crate::error::{Error, Result};
use crate::network::ItsModel;
use crate::rouge::{render_table, score_corpus, RougeReport, SummaryPair, TruncationPolicy};
use crate::tensor::SeededRng;
use crate::text::{
    greedy_oracle_labels_with, load_embeddings, tokenize_and_pad, Document, EmbeddingMatrix, OracleObjective,
    Vocabulary,
};
use crate::training::{build_model, prepare_examples, Ablation, EpochMetrics, Trainer};

pub use config::RunConfig;
pub use synth::{generate as generate_synthetic, SynthConfig, MARKER};

/// Sentences per extracted summary.
pub const SUMMARY_SENTENCES: usize = 3;

/// Largest iteration count the sweep accepts.
pub const MAX_SWEEP_ITERATIONS: usize = 8;

/// One extracted summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub id: String,
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    pub sentences: Vec<String>,
}

impl Summary {
    fn new(doc: &Document, indices: Vec<usize>, scores: Option<Vec<f64>>) -> Self {
        let sentences = indices.iter().map(|&i| doc.sentences[i].join(" ")).collect();
        Summary {
            id: doc.id.clone(),
            indices,
            scores,
            sentences,
        }
    }

    fn tokens(&self, doc: &Document) -> Vec<Vec<String>> {
        self.indices.iter().map(|&i| doc.sentences[i].clone()).collect()
    }
}

pub fn lead3(docs: &[Document]) -> Vec<Summary> {
    docs.iter()
        .map(|d| Summary::new(d, (0..d.num_sentences().min(SUMMARY_SENTENCES)).collect(), None))
        .collect()
}

/// Top three sentences by model score, best first (or in document order).
pub fn summarize(
    model: &ItsModel,
    vocab: &Vocabulary,
    docs: &[Document],
    document_order: bool,
) -> Result<Vec<Summary>> {
    docs.par_iter()
        .map(|doc| {
            let grid = tokenize_and_pad(doc, vocab, model.config().max_words)?;
            let scores = model.predict(&grid)?.scores;
            let mut picks = scores.top_k(SUMMARY_SENTENCES);
            if document_order {
                picks.sort_unstable();
            }
            Ok(Summary::new(doc, picks, Some(scores.0)))
        })
        .collect()
}

/// Pairs each summary with its document's highlights and scores the corpus.
pub fn score_summaries(docs: &[Document], summaries: &[Summary], policy: TruncationPolicy) -> Result<RougeReport> {
    if docs.len() != summaries.len() {
        return Err(Error::InvalidArgument(format!(
            "{} documents but {} summaries",
            docs.len(),
            summaries.len()
        )));
    }
    let pairs = docs
        .iter()
        .zip(summaries)
        .map(|(doc, s)| match &doc.highlights {
            Some(h) if h.iter().any(|s| !s.is_empty()) => Ok(SummaryPair::single(s.tokens(doc), h.clone())),
            _ => Err(Error::NoGoldSummary(doc.id.clone())),
        })
        .collect::<Result<Vec<_>>>()?;
    score_corpus(&pairs, policy)
}

/// What `evaluate` scores.
pub enum System<'a> {
    Model {
        model: &'a ItsModel,
        vocab: &'a Vocabulary,
        document_order: bool,
    },
    Lead3,
}

impl System<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            System::Model { .. } => "ITS",
            System::Lead3 => "Lead-3",
        }
    }
}

pub fn evaluate(system: &System<'_>, docs: &[Document], policy: TruncationPolicy) -> Result<RougeReport> {
    let summaries = match system {
        System::Model {
            model,
            vocab,
            document_order,
        } => summarize(model, vocab, docs, *document_order)?,
        System::Lead3 => lead3(docs),
    };
    score_summaries(docs, &summaries, policy)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    system: &'a str,
    #[serde(flatten)]
    report: &'a RougeReport,
}

/// Writes `report.json` and `report.txt` under `dir`.
pub fn write_report(dir: &Path, system: &str, report: &RougeReport) -> Result<()> {
    let json = serde_json::to_string_pretty(&ReportFile { system, report })
        .map_err(|e| Error::Data(format!("serializing report: {e}")))?;
    write_atomic(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    write_atomic(&dir.join("report.txt"), render_table(&[(system, report)]).as_bytes())
}

/// Attaches greedy oracle labels. Documents without highlights are skipped
/// and their ids returned.
pub fn label_oracle(
    docs: &[Document],
    max_select: usize,
    objective: OracleObjective,
) -> Result<(Vec<Document>, Vec<String>)> {
    let mut labeled = Vec::with_capacity(docs.len());
    let mut skipped = Vec::new();
    for doc in docs {
        match greedy_oracle_labels_with(doc, max_select, objective) {
            Ok(labels) => {
                let mut out = doc.clone();
                out.labels = Some(labels.into_inner());
                labeled.push(out);
            }
            Err(Error::NoGoldSummary(id)) => skipped.push(id),
            Err(e) => return Err(e),
        }
    }
    Ok((labeled, skipped))
}

/// Per-iteration scores, one row per iteration and one column per sentence.
pub fn heatmap(model: &ItsModel, vocab: &Vocabulary, doc: &Document) -> Result<Vec<Vec<f64>>> {
    if model.config().iterations < 2 {
        return Err(Error::InvalidArgument(format!(
            "heatmap needs at least 2 iterations, the model has {}",
            model.config().iterations
        )));
    }
    let grid = tokenize_and_pad(doc, vocab, model.config().max_words)?;
    Ok(model.predict(&grid)?.diagnostics.aux_scores)
}

pub fn heatmap_csv(matrix: &[Vec<f64>]) -> String {
    let width = matrix.first().map_or(0, Vec::len);
    let mut out = String::from("iteration");
    for i in 0..width {
        let _ = write!(out, ",s{i}");
    }
    out.push('\n');
    for (k, row) in matrix.iter().enumerate() {
        let _ = write!(out, "{}", k + 1);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = String::new();
    for item in items {
        let line =
            serde_json::to_string(item).map_err(|e| Error::Data(format!("serializing {}: {e}", path.display())))?;
        buf.push_str(&line);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))
        })
        .collect()
}

/// Where training reads its starting point from.
pub enum Start<'a> {
    Fresh { embeddings: Option<&'a Path> },
    Resume(Box<Checkpoint>),
}

/// Builds or restores the trainer, then trains to `run.train.epochs`.
/// `on_epoch` sees each finished epoch together with a snapshot of the
/// model and optimizer.
pub fn fit(
    run: &RunConfig,
    ablation: Ablation,
    docs: &[Document],
    start: Start<'_>,
    mut on_epoch: impl FnMut(&EpochMetrics, &Checkpoint) -> Result<()>,
) -> Result<(Checkpoint, Vec<EpochMetrics>)> {
    run.validate()?;
    if docs.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    let (mut trainer, vocab) = match start {
        Start::Fresh { embeddings } => {
            let vocab = Vocabulary::build(docs, run.vocab_capacity)?;
            let mut its = run.its.clone();
            its.vocab_size = vocab.len();
            let mut rng = SeededRng::new(run.train.seed).derive(0xe3b);
            let embedding = match embeddings {
                Some(path) => load_embeddings(path, &vocab, its.embedding, &mut rng)?,
                None => EmbeddingMatrix::random(&vocab, its.embedding, &mut rng)?,
            };
            let model = build_model(&its, &run.train, ablation, embedding.into_tensor())?;
            (Trainer::new(model, run.train.clone())?, vocab)
        }
        Start::Resume(ck) => {
            let ck = *ck;
            let Some(state) = ck.training else {
                return Err(Error::Data(
                    "checkpoint carries no optimizer state to resume from".into(),
                ));
            };
            let mut train = state.train_config;
            train.epochs = run.train.epochs;
            let trainer = Trainer::resume(ck.model, state.optimizer, state.epochs_completed, train)?;
            (trainer, ck.vocab)
        }
    };
    let examples = prepare_examples(docs, &vocab, trainer.model.config().max_words, &trainer.config)?;
    let snapshot = |t: &Trainer| Checkpoint {
        model: t.model.clone(),
        vocab: vocab.clone(),
        training: Some(TrainingState {
            epochs_completed: t.epoch,
            train_config: t.config.clone(),
            optimizer: t.optimizer.clone(),
        }),
    };
    let metrics = trainer.train(&examples, |t, m| on_epoch(m, &snapshot(t)))?;
    let ck = snapshot(&trainer);
    Ok((ck, metrics))
}

/// Output locations of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutputs {
    pub dir: PathBuf,
}

impl TrainOutputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TrainOutputs { dir: dir.into() }
    }

    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join("config.txt")
    }

    pub fn epoch_checkpoint(&self, epoch: usize) -> PathBuf {
        self.dir.join("checkpoints").join(format!("epoch-{epoch:03}.json"))
    }
}

fn csv_text(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// Rows of an existing log for epochs before `upto`.
fn earlier_rows(path: &Path, upto: usize) -> Vec<String> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| {
            l.split(',')
                .next()
                .and_then(|e| e.parse::<usize>().ok())
                .is_some_and(|e| e < upto)
        })
        .map(str::to_string)
        .collect()
}

/// `train` command: checkpoints every epoch, keeps `metrics.csv` current and
/// writes the final model to `model.json`.
pub fn train(
    run: &RunConfig,
    ablation: Ablation,
    docs: &[Document],
    start: Start<'_>,
    out: &TrainOutputs,
    log: &mut dyn FnMut(&EpochMetrics),
) -> Result<(Checkpoint, Vec<EpochMetrics>)> {
    let first_epoch = match &start {
        Start::Resume(ck) => ck.training.as_ref().map_or(0, |s| s.epochs_completed),
        Start::Fresh { .. } => 0,
    };
    let mut rows = earlier_rows(&out.metrics(), first_epoch);
    write_atomic(&out.config(), run.to_text().as_bytes())?;
    let (ck, metrics) = fit(run, ablation, docs, start, |m, ck| {
        ck.save(out.epoch_checkpoint(m.epoch))?;
        rows.push(m.csv_row());
        write_atomic(
            &out.metrics(),
            csv_text(EpochMetrics::CSV_HEADER, rows.iter().cloned()).as_bytes(),
        )?;
        log(m);
        Ok(())
    })?;
    ck.save(out.model())?;
    Ok((ck, metrics))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub epochs: usize,
    /// `recall` under a length limit, `f1` otherwise.
    pub measure: String,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "k,epochs,measure,rouge_1,rouge_2,rouge_l";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.k, self.epochs, self.measure, self.rouge_1, self.rouge_2, self.rouge_l
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv_text(SweepRow::CSV_HEADER, rows.iter().map(SweepRow::csv_row))
}

/// Trains one model per iteration count with the same seed and epoch
/// budget, scoring each on `eval_docs`.
pub fn sweep_iterations(
    run: &RunConfig,
    train_docs: &[Document],
    eval_docs: &[Document],
    ks: &[usize],
) -> Result<Vec<SweepRow>> {
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > MAX_SWEEP_ITERATIONS) {
        return Err(Error::Config(format!(
            "iteration count {k} outside 1..={MAX_SWEEP_ITERATIONS}"
        )));
    }
    let policy = run.policy;
    ks.iter()
        .map(|&k| {
            let mut cfg = run.clone();
            cfg.its.iterations = k;
            let (ck, _) = fit(
                &cfg,
                Ablation::Full,
                train_docs,
                Start::Fresh { embeddings: None },
                |_, _| Ok(()),
            )?;
            let system = System::Model {
                model: &ck.model,
                vocab: &ck.vocab,
                document_order: false,
            };
            let report = evaluate(&system, eval_docs, policy)?;
            Ok(SweepRow {
                k,
                epochs: cfg.train.epochs,
                measure: if policy.is_limited() { "recall" } else { "f1" }.to_string(),
                rouge_1: report.rouge_1.headline(policy),
                rouge_2: report.rouge_2.headline(policy),
                rouge_l: report.rouge_l.headline(policy),
            })
        })
        .collect()
}
