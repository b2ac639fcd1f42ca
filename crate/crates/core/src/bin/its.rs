use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use its_core::checkpoint::{write_atomic, Checkpoint};
use its_core::harness::{self, RunConfig, Start, SynthConfig, System, TrainOutputs};
use its_core::rouge::TruncationPolicy;
use its_core::text::{load_corpus, Document, DEFAULT_MAX_SELECT};
use its_core::training::Ablation;
use its_core::{Error, Result};

#[derive(Parser)]
#[command(name = "its", version, about = "Iterative extractive summarizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// Starting point: default, tiny or synthetic
    #[arg(long, default_value = "default")]
    preset: String,
    /// key = value file applied over the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value override, applied last (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of iterations K
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// none, bytes:N or words:N
    #[arg(long)]
    policy: Option<TruncationPolicy>,
}

impl Settings {
    fn resolve(&self) -> Result<RunConfig> {
        let mut run = RunConfig::preset(&self.preset)?;
        if let Some(path) = &self.config {
            run.merge_file(path)?;
        }
        run.apply(self.overrides.iter().map(String::as_str))?;
        if let Some(seed) = self.seed {
            run.train.seed = seed;
        }
        if let Some(k) = self.iterations {
            run.its.iterations = k;
        }
        if let Some(e) = self.epochs {
            run.train.epochs = e;
        }
        if let Some(p) = self.policy {
            run.policy = p;
        }
        run.validate()?;
        Ok(run)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model, checkpointing after every epoch
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Pretrained vectors, one `token v1 .. vE` per line
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "full")]
        ablation: Ablation,
        /// Continue from a per-epoch checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Score a model or a baseline against the highlights
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_parser = ["lead3"])]
        baseline: Option<String>,
        #[arg(long, default_value = "none")]
        policy: TruncationPolicy,
        /// Keep extracted sentences in document order
        #[arg(long)]
        document_order: bool,
        /// Output directory for report.json and report.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract three sentences per document
    Summarize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        document_order: bool,
        /// JSONL output
        #[arg(long)]
        out: PathBuf,
    },
    /// First three sentences of every document
    Lead3 {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach greedy oracle labels to a corpus
    LabelOracle {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_SELECT)]
        max_select: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per iteration count and score each
    SweepIterations {
        #[arg(long)]
        corpus: PathBuf,
        /// Scored corpus; defaults to the training corpus
        #[arg(long)]
        eval_corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 7)]
        k_max: usize,
        /// CSV output
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Per-iteration sentence scores of one document as CSV
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Document id; defaults to the first document
        #[arg(long)]
        document: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a marker-token corpus
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        documents: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        marker_min_index: usize,
    },
}

fn corpus(path: &Path) -> Result<Vec<Document>> {
    let docs = load_corpus(path)?;
    if docs.is_empty() {
        return Err(Error::Data(format!("{}: corpus is empty", path.display())));
    }
    Ok(docs)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            corpus: path,
            embeddings,
            out,
            ablation,
            resume,
            settings,
        } => {
            let run = settings.resolve()?;
            let docs = corpus(&path)?;
            let start = match &resume {
                Some(ck) => Start::Resume(Box::new(Checkpoint::load(ck)?)),
                None => Start::Fresh {
                    embeddings: embeddings.as_deref(),
                },
            };
            let outputs = TrainOutputs::new(&out);
            harness::train(&run, ablation, &docs, start, &outputs, &mut |m| {
                eprintln!(
                    "epoch {:>3}  lr {:.6}  loss {:.6}  accuracy {:.4}  ({:.1}s)",
                    m.epoch, m.lr, m.mean_loss, m.label_accuracy, m.wall_seconds
                );
            })?;
            eprintln!("wrote {}", outputs.model().display());
        }
        Command::Evaluate {
            corpus: path,
            checkpoint,
            baseline: _,
            policy,
            document_order,
            out,
        } => {
            let docs = corpus(&path)?;
            let loaded = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let system = match &loaded {
                Some(ck) => System::Model {
                    model: &ck.model,
                    vocab: &ck.vocab,
                    document_order,
                },
                None => System::Lead3,
            };
            let report = harness::evaluate(&system, &docs, policy)?;
            harness::write_report(&out, system.name(), &report)?;
            print!("{}", its_core::rouge::render_table(&[(system.name(), &report)]));
        }
        Command::Summarize {
            checkpoint,
            corpus: path,
            document_order,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let docs = corpus(&path)?;
            let summaries = harness::summarize(&ck.model, &ck.vocab, &docs, document_order)?;
            harness::write_jsonl(&out, &summaries)?;
        }
        Command::Lead3 { corpus: path, out } => {
            harness::write_jsonl(&out, &harness::lead3(&corpus(&path)?))?;
        }
        Command::LabelOracle {
            corpus: path,
            max_select,
            out,
        } => {
            if max_select == 0 {
                return Err(Error::Config("max-select must be at least 1".into()));
            }
            let docs = corpus(&path)?;
            let (labeled, skipped) = harness::label_oracle(&docs, max_select, Default::default())?;
            for id in &skipped {
                eprintln!("warning: document {id:?} has no highlights, skipped");
            }
            if !skipped.is_empty() {
                eprintln!("warning: skipped {} of {} documents", skipped.len(), docs.len());
            }
            harness::write_jsonl(&out, &labeled)?;
        }
        Command::SweepIterations {
            corpus: path,
            eval_corpus,
            k_min,
            k_max,
            out,
            settings,
        } => {
            let run = settings.resolve()?;
            let train_docs = corpus(&path)?;
            let eval_docs = match &eval_corpus {
                Some(p) => corpus(p)?,
                None => train_docs.clone(),
            };
            if k_min > k_max {
                return Err(Error::Config(format!("k-min {k_min} exceeds k-max {k_max}")));
            }
            let ks: Vec<usize> = (k_min..=k_max).collect();
            let rows = harness::sweep_iterations(&run, &train_docs, &eval_docs, &ks)?;
            write_atomic(&out, harness::sweep_csv(&rows).as_bytes())?;
        }
        Command::Heatmap {
            checkpoint,
            corpus: path,
            document,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let docs = corpus(&path)?;
            let doc = match &document {
                Some(id) => docs
                    .iter()
                    .find(|d| &d.id == id)
                    .ok_or_else(|| Error::Data(format!("no document {id:?} in {}", path.display())))?,
                None => &docs[0],
            };
            let matrix = harness::heatmap(&ck.model, &ck.vocab, doc)?;
            write_atomic(&out, harness::heatmap_csv(&matrix).as_bytes())?;
        }
        Command::GenSynth {
            out,
            documents,
            seed,
            marker_min_index,
        } => {
            let cfg = SynthConfig {
                documents,
                seed,
                marker_min_index,
                ..SynthConfig::default()
            };
            harness::write_jsonl(&out, &harness::generate_synthetic(&cfg)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
