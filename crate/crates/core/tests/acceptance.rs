//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use its_core::harness::{self, fit, generate_synthetic, RunConfig, Start, SynthConfig, System};
use its_core::network::layers::positional_weights;
use its_core::network::{ItsConfig, ItsModel};
use its_core::rouge::{rouge_l, rouge_n, TruncationPolicy};
use its_core::tensor::{GradCheck, SeededRng};
use its_core::text::{
    greedy_oracle_trace, subset_score, tokenize_and_pad, LabelVector, OracleObjective, TokenGrid, DEFAULT_MAX_SELECT,
};
use its_core::training::{check_model_gradients, Ablation, Example};

type Outcome = Result<String, String>;
type Criterion = Box<dyn Fn() -> Outcome>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn its(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_its"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`its {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let config = ItsConfig {
        embedding: 8,
        hidden: 8,
        gate_hidden: 8,
        label_hidden: 8,
        iterations: 2,
        max_words: 5,
        keep_prob: 1.0,
        ..ItsConfig::tiny(12)
    };
    let mut rng = SeededRng::new(31);
    let emb = rng.uniform_tensor(&[config.vocab_size, config.embedding], -0.2, 0.2);
    let model = ItsModel::new(config, emb, &mut rng).map_err(|e| e.to_string())?;
    let grid = TokenGrid::from_rows(vec![
        vec![2, 3, 4, 0, 0],
        vec![5, 6, 7, 8, 9],
        vec![10, 11, 0, 0, 0],
        vec![2, 5, 11, 3, 0],
    ])
    .map_err(|e| e.to_string())?;
    let example = Example {
        id: "gradcheck".into(),
        grid,
        labels: LabelVector::new(vec![1, 0, 0, 1]),
    };
    let settings = GradCheck {
        step: 1e-5,
        tol: 1e-4,
        ..GradCheck::default()
    };
    let reports = check_model_gradients(&model, &example, 1e-4, settings).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let coords: usize = reports.iter().map(|(_, r)| r.rows.len()).sum();
    let (worst_name, worst) = reports
        .iter()
        .max_by(|a, b| a.1.max_rel_err.total_cmp(&b.1.max_rel_err))
        .map(|(n, r)| (n.clone(), r.max_rel_err))
        .unwrap_or_default();
    check(reports.len() == model.params().len(), || {
        "not every parameter group was checked".into()
    })?;
    check(worst < 1e-4, || {
        format!("max relative error {worst:.3e} in {worst_name}")
    })?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "{} groups, {coords} coordinates, max rel err {worst:.2e} ({worst_name}), {elapsed:.1?}",
        reports.len()
    ))
}

fn gate_normalization() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut worst: f64 = 0.0;
    let mut gates_seen = 0;
    for trial in 0..100u64 {
        let config = ItsConfig {
            max_words: 6,
            ..ItsConfig::tiny(20)
        };
        let mut init = SeededRng::new(1000 + trial);
        let emb = init.uniform_tensor(&[20, config.embedding], -0.2, 0.2);
        let model = ItsModel::new(config, emb, &mut init).map_err(|e| e.to_string())?;
        let rows = (0..1 + rng.below(8))
            .map(|_| {
                let mut ids: Vec<usize> = (0..1 + rng.below(6)).map(|_| 2 + rng.below(18)).collect();
                ids.resize(6, 0);
                ids
            })
            .collect();
        let grid = TokenGrid::from_rows(rows).map_err(|e| e.to_string())?;
        let pred = model.predict(&grid).map_err(|e| e.to_string())?;
        for g in &pred.diagnostics.gates {
            let sums = g.sum_axis(0).map_err(|e| e.to_string())?;
            for &s in sums.data() {
                worst = worst.max((s - 1.0).abs());
            }
            gates_seen += 1;
        }
    }
    check(gates_seen == 200, || {
        format!("expected 200 gate matrices, saw {gates_seen}")
    })?;
    check(worst <= 1e-9, || format!("max |sum - 1| = {worst:e}"))?;
    Ok(format!(
        "100 passes, {gates_seen} gate matrices, max |sum - 1| = {worst:.1e}"
    ))
}

fn positional_encoding() -> Outcome {
    #[rustfmt::skip]
    let cases: [(usize, usize, Vec<f64>); 3] = [
        (1, 2, vec![0.5, 1.0]),
        (2, 2, vec![0.5, 0.5, 0.5, 1.0]),
        (3, 4, vec![
            7.0 / 12.0, 0.5, 5.0 / 12.0, 1.0 / 3.0,
            5.0 / 12.0, 0.5, 7.0 / 12.0, 2.0 / 3.0,
            0.25, 0.5, 0.75, 1.0,
        ]),
    ];
    let mut worst: f64 = 0.0;
    for (n_w, e, want) in &cases {
        let got = positional_weights(*n_w, *e);
        check(got.shape() == [*n_w, *e], || {
            format!("shape {:?} for ({n_w},{e})", got.shape())
        })?;
        for (g, w) in got.data().iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("(1,2), (2,2), (3,4) match, max deviation {worst:.1e}"))
}

fn rouge_equivalence() -> Outcome {
    let mut rng = SeededRng::new(4);
    for i in 0..1000 {
        let cand = random_sequence(&mut rng, 12, 5);
        let reference = random_sequence(&mut rng, 12, 5);
        for n in [1, 2] {
            let got = rouge_n(&cand, &reference, n).map_err(|e| e.to_string())?;
            let (o, c, r) = brute_overlap(&cand, &reference, n);
            let want = (ratio(o, c), ratio(o, r), f_measure(ratio(o, c), ratio(o, r)));
            check((got.precision, got.recall, got.f1) == want, || {
                format!("pair {i} ROUGE-{n}: got {got:?}, brute force {want:?}")
            })?;
        }
        let l = memo_lcs(&cand, &reference);
        let got = rouge_l(&cand, &reference);
        let want = (ratio(l, cand.len()), ratio(l, reference.len()));
        check((got.precision, got.recall) == want && got.overlap == l, || {
            format!("pair {i} ROUGE-L: got {got:?}, memoized LCS {l}")
        })?;

        let mut same = cand.clone();
        same.extend(["t0".to_string(), "t1".to_string()]);
        let other: Vec<String> = same.iter().map(|t| format!("z{t}")).collect();
        for s in [
            rouge_n(&same, &same, 1),
            rouge_n(&same, &same, 2),
            Ok(rouge_l(&same, &same)),
        ] {
            let s = s.map_err(|e| e.to_string())?;
            check((s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0), || {
                format!("identity pair {i} scored {s:?}")
            })?;
        }
        for s in [
            rouge_n(&same, &other, 1),
            rouge_n(&same, &other, 2),
            Ok(rouge_l(&same, &other)),
        ] {
            let s = s.map_err(|e| e.to_string())?;
            check((s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0), || {
                format!("disjoint pair {i} scored {s:?}")
            })?;
        }
    }
    Ok("1000 random pairs exact for ROUGE-1/2/L; identity 1.0, disjoint 0.0".into())
}

fn greedy_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(5);
    let mut verbatim = 0;
    let mut gap: f64 = 0.0;
    for id in 0..200 {
        let (doc, copied) = random_document(&mut rng, id);
        let reference = doc.reference_tokens().map_err(|e| e.to_string())?;
        let trace =
            greedy_oracle_trace(&doc, DEFAULT_MAX_SELECT, OracleObjective::MeanRouge12F1).map_err(|e| e.to_string())?;
        let mut picks = trace.picks.clone();
        picks.sort_unstable();
        let greedy = subset_score(&doc, &reference, &picks, OracleObjective::MeanRouge12F1);
        let best = best_subset_score(&doc, DEFAULT_MAX_SELECT);
        check(greedy <= best + 1e-12, || {
            format!("{}: greedy {greedy} above optimum {best}", doc.id)
        })?;
        gap = gap.max(best - greedy);
        if let Some(i) = copied {
            verbatim += 1;
            let first = *trace.picks.first().ok_or("no pick")?;
            check(doc.sentences[first] == doc.sentences[i], || {
                format!("{}: verbatim sentence {i} not selected first (picked {first})", doc.id)
            })?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "200 documents, greedy <= optimum (largest gap {gap:.3}), {verbatim} verbatim highlights picked first, {elapsed:.1?}"
    ))
}

fn learnability() -> Outcome {
    let start = Instant::now();
    let train_docs = generate_synthetic(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let test_docs = generate_synthetic(&SynthConfig {
        seed: 1007,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    check(train_docs.len() == 32, || {
        "training corpus must hold 32 documents".into()
    })?;
    let mut run = RunConfig::synthetic();
    run.train.epochs = 200;
    let mut first_hit = None;
    let (ck, _) = fit(
        &run,
        Ablation::Full,
        &train_docs,
        Start::Fresh { embeddings: None },
        |m, _| {
            if first_hit.is_none() && m.label_accuracy >= 0.95 {
                first_hit = Some(m.epoch);
            }
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;

    // accuracy of the final model on the training documents, no dropout
    let (mut correct, mut total) = (0, 0);
    for doc in &train_docs {
        let labels = its_core::text::greedy_oracle_labels(doc, run.train.max_select).map_err(|e| e.to_string())?;
        let grid = tokenize_and_pad(doc, &ck.vocab, ck.model.config().max_words).map_err(|e| e.to_string())?;
        let scores = ck.model.predict(&grid).map_err(|e| e.to_string())?.scores;
        for (&y, &l) in scores.as_slice().iter().zip(labels.as_slice()) {
            correct += usize::from((y >= 0.5) == (l == 1));
            total += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;

    let system = System::Model {
        model: &ck.model,
        vocab: &ck.vocab,
        document_order: false,
    };
    let its_r1 = harness::evaluate(&system, &test_docs, TruncationPolicy::None)
        .map_err(|e| e.to_string())?
        .rouge_1
        .recall;
    let lead_r1 = harness::evaluate(&System::Lead3, &test_docs, TruncationPolicy::None)
        .map_err(|e| e.to_string())?
        .rouge_1
        .recall;
    let elapsed = start.elapsed();
    let hit = first_hit.map_or("never".to_string(), |e| format!("epoch {e}"));
    check(first_hit.is_some() && accuracy >= 0.95, || {
        format!("label accuracy {accuracy:.3}, training log reached 95% at {hit}")
    })?;
    check(its_r1 - lead_r1 >= 0.2, || {
        format!("ITS R-1 recall {its_r1:.3} vs Lead-3 {lead_r1:.3}")
    })?;
    check(elapsed < Duration::from_secs(600), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "accuracy {accuracy:.3} (log >= 95% from {hit}); held-out R-1 recall ITS {its_r1:.3} vs Lead-3 {lead_r1:.3}; {elapsed:.1?}"
    ))
}

fn ablation_parity(dir: &Path) -> Outcome {
    let corpus = dir.join("corpus.jsonl");
    its(&["gen-synth", "--out", p(&corpus), "--documents", "12", "--seed", "11"])?;
    let common = [
        "--preset",
        "synthetic",
        "--epochs",
        "4",
        "--seed",
        "3",
        "--set",
        "keep_prob=0.8",
    ];
    let train = |name: &str, extra: &[&str]| -> Result<std::path::PathBuf, String> {
        let out = dir.join(name);
        let mut args = vec!["train", "--corpus", p(&corpus), "--out", p(&out)];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        its(&args)?;
        Ok(out)
    };
    let ablated = train("no_iteration", &["--ablation", "no_iteration"])?;
    let k1 = train("k1", &["--iterations", "1"])?;
    for file in ["model.json", "metrics.csv"] {
        check(read(&ablated.join(file))? == read(&k1.join(file))?, || {
            format!("{file} differs between --ablation no_iteration and --iterations 1")
        })?;
    }
    for ablation in ["no_selective", "no_concat"] {
        train(ablation, &["--ablation", ablation])?;
    }
    for ablation in ["no_selective", "no_iteration", "no_concat"] {
        let model = dir.join(ablation).join("model.json");
        its(&[
            "evaluate",
            "--corpus",
            p(&corpus),
            "--checkpoint",
            p(&model),
            "--out",
            p(&dir.join(format!("eval-{ablation}"))),
        ])?;
    }
    Ok("no_iteration equals K=1 byte for byte; no_selective, no_iteration, no_concat train and evaluate".into())
}

fn schedule_conformance(dir: &Path) -> Outcome {
    let corpus = dir.join("corpus.jsonl");
    its(&["gen-synth", "--out", p(&corpus), "--documents", "3"])?;
    let out = dir.join("train");
    its(&[
        "train",
        "--corpus",
        p(&corpus),
        "--out",
        p(&out),
        "--preset",
        "tiny",
        "--epochs",
        "30",
    ])?;
    let text = String::from_utf8(read(&out.join("metrics.csv"))?).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let lr_col = header.split(',').position(|c| c == "lr").ok_or("no lr column")?;
    let mut expected = 0.001_f64;
    let mut rows = 0;
    for (epoch, line) in lines.enumerate() {
        if epoch > 0 && epoch % 6 == 0 {
            expected *= 0.5;
        }
        let lr: f64 = line
            .split(',')
            .nth(lr_col)
            .ok_or("short row")?
            .parse()
            .map_err(|e| format!("{e}"))?;
        check(lr == expected, || format!("epoch {epoch}: lr {lr} != {expected}"))?;
        rows += 1;
    }
    check(rows == 30, || format!("{rows} epochs logged"))?;
    Ok("30 logged learning rates equal 0.001 * 0.5^floor(epoch/6) exactly".into())
}

fn every_command(root: &Path) -> Result<(), String> {
    let corpus = root.join("corpus.jsonl");
    its(&["gen-synth", "--out", p(&corpus), "--documents", "10", "--seed", "21"])?;
    let train = root.join("train");
    its(&[
        "train",
        "--corpus",
        p(&corpus),
        "--out",
        p(&train),
        "--preset",
        "synthetic",
        "--epochs",
        "3",
        "--seed",
        "9",
        "--set",
        "keep_prob=0.7",
    ])?;
    let model = train.join("model.json");
    its(&[
        "train",
        "--corpus",
        p(&corpus),
        "--out",
        p(&train),
        "--preset",
        "synthetic",
        "--epochs",
        "4",
        "--resume",
        p(&train.join("checkpoints/epoch-001.json")),
    ])?;
    its(&[
        "evaluate",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&model),
        "--policy",
        "bytes:75",
        "--out",
        p(&root.join("eval")),
    ])?;
    its(&[
        "evaluate",
        "--corpus",
        p(&corpus),
        "--baseline",
        "lead3",
        "--out",
        p(&root.join("eval-lead3")),
    ])?;
    its(&[
        "summarize",
        "--checkpoint",
        p(&model),
        "--corpus",
        p(&corpus),
        "--out",
        p(&root.join("summaries.jsonl")),
    ])?;
    its(&[
        "summarize",
        "--checkpoint",
        p(&model),
        "--corpus",
        p(&corpus),
        "--document-order",
        "--out",
        p(&root.join("summaries-doc.jsonl")),
    ])?;
    its(&["lead3", "--corpus", p(&corpus), "--out", p(&root.join("lead3.jsonl"))])?;
    its(&[
        "label-oracle",
        "--corpus",
        p(&corpus),
        "--out",
        p(&root.join("labeled.jsonl")),
    ])?;
    its(&[
        "heatmap",
        "--checkpoint",
        p(&model),
        "--corpus",
        p(&corpus),
        "--out",
        p(&root.join("heatmap.csv")),
    ])?;
    its(&[
        "sweep-iterations",
        "--corpus",
        p(&corpus),
        "--preset",
        "synthetic",
        "--epochs",
        "2",
        "--k-max",
        "3",
        "--out",
        p(&root.join("sweep.csv")),
    ])?;
    Ok(())
}

fn files(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .map_err(|e| e.to_string())?
                    .display()
                    .to_string();
                out.push((rel, read(&path)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn determinism(dir: &Path) -> Outcome {
    let (a, b) = (dir.join("a"), dir.join("b"));
    every_command(&a)?;
    every_command(&b)?;
    let (fa, fb) = (files(&a)?, files(&b)?);
    let names = |f: &[(String, Vec<u8>)]| f.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    check(names(&fa) == names(&fb), || "runs produced different file sets".into())?;
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        check(x == y, || format!("{name} differs between identical runs"))?;
    }
    Ok(format!(
        "{} output files byte-identical across two runs of every command",
        fa.len()
    ))
}

fn iteration_sweep(dir: &Path) -> Outcome {
    let corpus = dir.join("corpus.jsonl");
    its(&["gen-synth", "--out", p(&corpus), "--documents", "16", "--seed", "13"])?;
    let out = dir.join("sweep.csv");
    its(&[
        "sweep-iterations",
        "--corpus",
        p(&corpus),
        "--preset",
        "synthetic",
        "--epochs",
        "10",
        "--k-min",
        "1",
        "--k-max",
        "7",
        "--out",
        p(&out),
    ])?;
    let text = String::from_utf8(read(&out)?).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    check(lines.next() == Some("k,epochs,measure,rouge_1,rouge_2,rouge_l"), || {
        "bad header".into()
    })?;
    let mut ks = Vec::new();
    let mut summary = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        check(cells.len() == 6, || format!("malformed row {line:?}"))?;
        ks.push(cells[0].parse::<usize>().map_err(|e| e.to_string())?);
        check(cells[1] == "10", || {
            format!("row {line:?} does not carry the fixed epoch count")
        })?;
        for v in &cells[3..] {
            let x: f64 = v.parse().map_err(|e| format!("{v}: {e}"))?;
            check((0.0..=1.0).contains(&x), || format!("score {x} out of range"))?;
        }
        summary.push(format!(
            "K={}:{:.3}",
            cells[0],
            cells[3].parse::<f64>().unwrap_or(f64::NAN)
        ));
    }
    check(ks == (1..=7).collect::<Vec<_>>(), || format!("rows for K = {ks:?}"))?;
    Ok(format!("7 rows, R-1 F1 {}", summary.join(" ")))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let dir = |name: &str| {
        let d = scratch.path().join(name);
        fs::create_dir_all(&d).expect("scratch subdirectory");
        d
    };
    let criteria: Vec<(&str, Criterion)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("gate normalization", Box::new(gate_normalization)),
        ("closed-form positional encoding", Box::new(positional_encoding)),
        ("ROUGE oracle equivalence", Box::new(rouge_equivalence)),
        ("greedy oracle soundness", Box::new(greedy_soundness)),
        ("learnability", Box::new(learnability)),
        (
            "ablation harness parity",
            Box::new({
                let d = dir("ablation");
                move || ablation_parity(&d)
            }),
        ),
        (
            "schedule conformance",
            Box::new({
                let d = dir("schedule");
                move || schedule_conformance(&d)
            }),
        ),
        (
            "determinism",
            Box::new({
                let d = dir("determinism");
                move || determinism(&d)
            }),
        ),
        (
            "iteration sweep",
            Box::new({
                let d = dir("sweep");
                move || iteration_sweep(&d)
            }),
        ),
    ];

    println!("\nrunning {} acceptance criteria", criteria.len());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed\n", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
