mod common;

use common::*;
use its_core::tensor::SeededRng;
use its_core::text::{greedy_oracle_trace, subset_score, OracleObjective, DEFAULT_MAX_SELECT};

#[test]
fn greedy_never_beats_exhaustive_search() {
    let mut rng = SeededRng::new(77);
    let mut copied_cases = 0;
    for id in 0..200 {
        let (doc, copied) = random_document(&mut rng, id);
        let reference = doc.reference_tokens().unwrap();
        let trace = greedy_oracle_trace(&doc, DEFAULT_MAX_SELECT, OracleObjective::MeanRouge12F1).unwrap();
        let mut picks = trace.picks.clone();
        picks.sort_unstable();
        let greedy = subset_score(&doc, &reference, &picks, OracleObjective::MeanRouge12F1);
        let best = best_subset_score(&doc, DEFAULT_MAX_SELECT);
        assert!(greedy <= best + 1e-12, "{}: greedy {greedy} > best {best}", doc.id);
        if let Some(i) = copied {
            copied_cases += 1;
            let first = trace.picks[0];
            assert_eq!(doc.sentences[first], doc.sentences[i], "{}", doc.id);
            assert!(first <= i);
            assert!((greedy - 1.0).abs() < 1e-12);
        }
    }
    assert!(copied_cases > 50);
}

#[test]
fn greedy_picks_are_strict_improvements() {
    let mut rng = SeededRng::new(78);
    for id in 0..200 {
        let (doc, _) = random_document(&mut rng, id);
        let trace = greedy_oracle_trace(&doc, DEFAULT_MAX_SELECT, OracleObjective::MeanRouge12F1).unwrap();
        assert!(trace.scores.windows(2).all(|w| w[1] > w[0]));
        assert!(trace.picks.len() <= DEFAULT_MAX_SELECT);
    }
}
