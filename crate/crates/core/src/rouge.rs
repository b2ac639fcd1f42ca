//! ROUGE-1, ROUGE-2 and ROUGE-L with candidate truncation.
//!
//! Tokens are compared case-folded. N-gram overlap is clipped (multiset
//! intersection) and LCS uses the quadratic dynamic program.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "limit")]
pub enum TruncationPolicy {
    None,
    Bytes(usize),
    Words(usize),
}

impl TruncationPolicy {
    pub fn is_limited(self) -> bool {
        !matches!(self, TruncationPolicy::None)
    }
}

impl FromStr for TruncationPolicy {
    type Err = Error;

    /// `none`, `bytes:N` or `words:N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "bad truncation policy {s:?}; expected none, bytes:N or words:N"
            ))
        };
        if s == "none" {
            return Ok(TruncationPolicy::None);
        }
        let (mode, limit) = s.split_once(':').ok_or_else(bad)?;
        let limit: usize = limit.parse().map_err(|_| bad())?;
        if limit == 0 {
            return Err(bad());
        }
        match mode {
            "bytes" => Ok(TruncationPolicy::Bytes(limit)),
            "words" => Ok(TruncationPolicy::Words(limit)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationPolicy::None => write!(f, "none"),
            TruncationPolicy::Bytes(n) => write!(f, "bytes:{n}"),
            TruncationPolicy::Words(n) => write!(f, "words:{n}"),
        }
    }
}

/// Longest token prefix satisfying the policy. Byte limits count the single
/// spaces that join tokens and never split a token.
pub fn truncate<S: AsRef<str>>(tokens: &[S], policy: TruncationPolicy) -> Vec<String> {
    let take = match policy {
        TruncationPolicy::None => tokens.len(),
        TruncationPolicy::Words(limit) => limit.min(tokens.len()),
        TruncationPolicy::Bytes(limit) => {
            let mut used = 0;
            let mut n = 0;
            for t in tokens {
                let extra = t.as_ref().len() + usize::from(n > 0);
                if used + extra > limit {
                    break;
                }
                used += extra;
                n += 1;
            }
            n
        }
    };
    tokens[..take].iter().map(|t| t.as_ref().to_string()).collect()
}

/// Precision, recall and F1 of one metric on one pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub overlap: usize,
    pub candidate_units: usize,
    pub reference_units: usize,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate_units: usize, reference_units: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(overlap, candidate_units);
        let recall = ratio(overlap, reference_units);
        RougeScore {
            precision,
            recall,
            f1: f1(precision, recall),
            overlap,
            candidate_units,
            reference_units,
        }
    }

    /// True when the reference had no units of this kind, so recall is undefined and reported as 0.
    pub fn empty_reference(&self) -> bool {
        self.reference_units == 0
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn fold<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn rouge_n<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T], n: usize) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::InvalidArgument("ROUGE-N needs n >= 1".into()));
    }
    let cand = fold(candidate);
    let refr = fold(reference);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refr, n);
    let overlap = ref_counts
        .iter()
        .map(|(gram, &rc)| cand_counts.get(gram).map_or(0, |&cc| cc.min(rc)))
        .sum();
    let units = |len: usize| if len >= n { len - n + 1 } else { 0 };
    Ok(RougeScore::from_counts(overlap, units(cand.len()), units(refr.len())))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T]) -> RougeScore {
    let cand = fold(candidate);
    let refr = fold(reference);
    RougeScore::from_counts(lcs_len(&cand, &refr), cand.len(), refr.len())
}

/// ROUGE-1, ROUGE-2 and ROUGE-L for one pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeTriple {
    pub rouge_1: RougeScore,
    pub rouge_2: RougeScore,
    pub rouge_l: RougeScore,
}

pub fn score_pair<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T]) -> RougeTriple {
    RougeTriple {
        rouge_1: rouge_n(candidate, reference, 1).expect("n = 1"),
        rouge_2: rouge_n(candidate, reference, 2).expect("n = 2"),
        rouge_l: rouge_l(candidate, reference),
    }
}

/// A system summary and its reference summaries, each a list of sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryPair {
    pub candidate: Vec<Vec<String>>,
    pub references: Vec<Vec<Vec<String>>>,
}

impl SummaryPair {
    pub fn single(candidate: Vec<Vec<String>>, reference: Vec<Vec<String>>) -> Self {
        SummaryPair {
            candidate,
            references: vec![reference],
        }
    }
}

/// Macro-averaged P/R/F of one metric, plus summed counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AveragedScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub overlap: usize,
    pub candidate_units: usize,
    pub reference_units: usize,
}

impl AveragedScore {
    fn average(scores: &[RougeScore]) -> Self {
        let n = scores.len() as f64;
        AveragedScore {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
            overlap: scores.iter().map(|s| s.overlap).sum(),
            candidate_units: scores.iter().map(|s| s.candidate_units).sum(),
            reference_units: scores.iter().map(|s| s.reference_units).sum(),
        }
    }

    /// Recall under a length limit, F1 otherwise.
    pub fn headline(&self, policy: TruncationPolicy) -> f64 {
        if policy.is_limited() {
            self.recall
        } else {
            self.f1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub policy: TruncationPolicy,
    pub documents: usize,
    pub rouge_1: AveragedScore,
    pub rouge_2: AveragedScore,
    pub rouge_l: AveragedScore,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Score each reference separately and keep the best F1 per metric,
    /// instead of joining all references into one.
    pub max_over_references: bool,
}

pub fn score_corpus(pairs: &[SummaryPair], policy: TruncationPolicy) -> Result<RougeReport> {
    score_corpus_with(pairs, policy, ScoreOptions::default())
}

pub fn score_corpus_with(
    pairs: &[SummaryPair],
    policy: TruncationPolicy,
    options: ScoreOptions,
) -> Result<RougeReport> {
    if pairs.is_empty() {
        return Err(Error::Data("cannot score an empty corpus".into()));
    }
    let mut r1 = Vec::with_capacity(pairs.len());
    let mut r2 = Vec::with_capacity(pairs.len());
    let mut rl = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let candidate = truncate(&pair.candidate.concat(), policy);
        let triples: Vec<RougeTriple> = if options.max_over_references {
            pair.references
                .iter()
                .map(|r| score_pair(&candidate, &r.concat()))
                .collect()
        } else {
            let joined: Vec<String> = pair.references.iter().flat_map(|r| r.concat()).collect();
            vec![score_pair(&candidate, &joined)]
        };
        if triples.is_empty() {
            return Err(Error::Data("summary pair has no reference".into()));
        }
        let best = |pick: fn(&RougeTriple) -> RougeScore| {
            triples
                .iter()
                .map(pick)
                .fold(None::<RougeScore>, |acc, s| match acc {
                    Some(a) if a.f1 >= s.f1 => Some(a),
                    _ => Some(s),
                })
                .expect("non-empty")
        };
        r1.push(best(|t| t.rouge_1));
        r2.push(best(|t| t.rouge_2));
        rl.push(best(|t| t.rouge_l));
    }
    Ok(RougeReport {
        policy,
        documents: pairs.len(),
        rouge_1: AveragedScore::average(&r1),
        rouge_2: AveragedScore::average(&r2),
        rouge_l: AveragedScore::average(&rl),
    })
}

/// Aligned text table, one row per system, values in percent.
pub fn render_table(rows: &[(&str, &RougeReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let measure = if first.policy.is_limited() { "recall" } else { "F1" };
    let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "ROUGE {measure}, truncation {}\n{:<name_width$}  {:>7}  {:>7}  {:>7}\n",
        first.policy, "Model", "Rouge-1", "Rouge-2", "Rouge-L"
    );
    for (name, report) in rows {
        let p = report.policy;
        out.push_str(&format!(
            "{:<name_width$}  {:>7.2}  {:>7.2}  {:>7.2}\n",
            name,
            100.0 * report.rouge_1.headline(p),
            100.0 * report.rouge_2.headline(p),
            100.0 * report.rouge_l.headline(p),
        ));
    }
    out
}
