use serde::{Deserialize, Serialize};

use super::{Document, LabelVector};
use crate::error::{Error, Result};
use crate::rouge;

pub const DEFAULT_MAX_SELECT: usize = 3;

/// Score a candidate sentence set against the joined highlights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleObjective {
    /// Mean of ROUGE-1 F1 and ROUGE-2 F1.
    #[default]
    MeanRouge12F1,
    Rouge1F1,
    Rouge1Recall,
}

impl OracleObjective {
    pub fn score(self, candidate: &[String], reference: &[String]) -> f64 {
        let r1 = rouge::rouge_n(candidate, reference, 1).expect("n = 1");
        match self {
            OracleObjective::MeanRouge12F1 => {
                let r2 = rouge::rouge_n(candidate, reference, 2).expect("n = 2");
                0.5 * (r1.f1 + r2.f1)
            }
            OracleObjective::Rouge1F1 => r1.f1,
            OracleObjective::Rouge1Recall => r1.recall,
        }
    }
}

/// Selected sentences, in selection order, with the score after each pick.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTrace {
    pub picks: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Objective value of the sentences `selected`, concatenated in document order.
pub fn subset_score(doc: &Document, reference: &[String], selected: &[usize], objective: OracleObjective) -> f64 {
    let mut ordered = selected.to_vec();
    ordered.sort_unstable();
    let candidate: Vec<String> = ordered.iter().flat_map(|&i| doc.sentences[i].iter().cloned()).collect();
    objective.score(&candidate, reference)
}

/// Greedy sentence selection against the highlights.
///
/// Each round adds the sentence with the largest objective (lowest index on
/// ties); selection stops at `max_select` or when no sentence strictly
/// improves the current score.
pub fn greedy_oracle_trace(doc: &Document, max_select: usize, objective: OracleObjective) -> Result<OracleTrace> {
    if max_select == 0 {
        return Err(Error::InvalidArgument("max_select must be at least 1".into()));
    }
    let reference = doc.reference_tokens()?;
    let mut selected: Vec<usize> = Vec::new();
    let mut scores = Vec::new();
    let mut current = 0.0;
    while selected.len() < max_select {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..doc.num_sentences() {
            if selected.contains(&i) {
                continue;
            }
            selected.push(i);
            let s = subset_score(doc, &reference, &selected, objective);
            selected.pop();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        match best {
            Some((i, s)) if s > current => {
                selected.push(i);
                scores.push(s);
                current = s;
            }
            _ => break,
        }
    }
    Ok(OracleTrace {
        picks: selected,
        scores,
    })
}

pub fn greedy_oracle_labels(doc: &Document, max_select: usize) -> Result<LabelVector> {
    greedy_oracle_labels_with(doc, max_select, OracleObjective::default())
}

pub fn greedy_oracle_labels_with(doc: &Document, max_select: usize, objective: OracleObjective) -> Result<LabelVector> {
    let trace = greedy_oracle_trace(doc, max_select, objective)?;
    let mut labels = vec![0u8; doc.num_sentences()];
    for i in trace.picks {
        labels[i] = 1;
    }
    Ok(LabelVector::new(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(sentences: &[&str], highlight: &str) -> Document {
        let split = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        Document::new("d", sentences.iter().map(|s| split(s)).collect()).with_highlights(vec![split(highlight)])
    }

    #[test]
    fn verbatim_sentence_selected_first() {
        let d = doc(
            &[
                "the market fell",
                "rain is due",
                "officials confirmed the deal today",
                "sports news",
            ],
            "officials confirmed the deal today",
        );
        let trace = greedy_oracle_trace(&d, 3, OracleObjective::default()).unwrap();
        assert_eq!(trace.picks, vec![2]);
        assert_eq!(greedy_oracle_labels(&d, 3).unwrap().as_slice(), &[0, 0, 1, 0]);
    }

    #[test]
    fn no_overlap_gives_all_zero() {
        let d = doc(&["a b c", "d e f"], "x y z");
        assert_eq!(greedy_oracle_labels(&d, 3).unwrap().as_slice(), &[0, 0]);
    }

    #[test]
    fn single_sentence_document() {
        let d = doc(&["a b c"], "a b");
        assert_eq!(greedy_oracle_labels(&d, 3).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn missing_highlights_is_an_error() {
        let d = Document::new("nohl", vec![vec!["a".into()]]);
        let err = greedy_oracle_labels(&d, 3).unwrap_err();
        assert!(err.to_string().contains("no gold summary"), "{err}");
    }

    #[test]
    fn picks_more_than_one_when_it_helps() {
        let d = doc(&["a b", "c d", "x y"], "a b c d");
        let trace = greedy_oracle_trace(&d, 3, OracleObjective::default()).unwrap();
        assert_eq!(trace.picks, vec![0, 1]);
        assert!(trace.scores.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let d = doc(&["x a", "a x", "a"], "a");
        let trace = greedy_oracle_trace(&d, 1, OracleObjective::Rouge1Recall).unwrap();
        assert_eq!(trace.picks, vec![0]);
    }
}
