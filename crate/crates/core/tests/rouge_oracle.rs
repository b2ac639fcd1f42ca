mod common;

use common::*;
use its_core::rouge::{rouge_l, rouge_n, score_corpus, truncate, SummaryPair, TruncationPolicy};
use its_core::tensor::SeededRng;
use proptest::prelude::*;

#[test]
fn agrees_with_brute_force_on_random_pairs() {
    let mut rng = SeededRng::new(2024);
    for _ in 0..1000 {
        let cand = random_sequence(&mut rng, 12, 5);
        let reference = random_sequence(&mut rng, 12, 5);
        for n in [1, 2] {
            let got = rouge_n(&cand, &reference, n).unwrap();
            let (o, c, r) = brute_overlap(&cand, &reference, n);
            assert_eq!((got.overlap, got.candidate_units, got.reference_units), (o, c, r));
            assert_eq!(got.precision, ratio(o, c));
            assert_eq!(got.recall, ratio(o, r));
            assert_eq!(got.f1, f_measure(ratio(o, c), ratio(o, r)));
        }
        let l = memo_lcs(&cand, &reference);
        let got = rouge_l(&cand, &reference);
        assert_eq!(got.overlap, l);
        assert_eq!(got.recall, ratio(l, reference.len()));
        assert_eq!(got.precision, ratio(l, cand.len()));
    }
}

#[test]
fn identity_and_disjoint_pairs() {
    let mut rng = SeededRng::new(5);
    for _ in 0..100 {
        let mut a = random_sequence(&mut rng, 12, 5);
        a.push("t0".into());
        a.push("t1".into());
        for s in [
            rouge_n(&a, &a, 1).unwrap(),
            rouge_n(&a, &a, 2).unwrap(),
            rouge_l(&a, &a),
        ] {
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
        let b: Vec<String> = a.iter().map(|t| format!("x{t}")).collect();
        for s in [
            rouge_n(&a, &b, 1).unwrap(),
            rouge_n(&a, &b, 2).unwrap(),
            rouge_l(&a, &b),
        ] {
            assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        }
    }
}

#[test]
fn macro_average_of_hand_scored_pairs() {
    let pairs = vec![
        SummaryPair::single(vec![words("a b")], vec![words("a b")]),
        SummaryPair::single(vec![words("a x")], vec![words("a b")]),
    ];
    let report = score_corpus(&pairs, TruncationPolicy::None).unwrap();
    assert_eq!(report.rouge_1.recall, 0.75);
    assert_eq!(report.documents, 2);
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "bb", "ccc", "d", "ee"]), 0..12)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

proptest! {
    #[test]
    fn swapping_sides_swaps_precision_and_recall(a in tokens(), b in tokens()) {
        for n in [1, 2] {
            let ab = rouge_n(&a, &b, n).unwrap();
            let ba = rouge_n(&b, &a, n).unwrap();
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
        }
        let ab = rouge_l(&a, &b);
        let ba = rouge_l(&b, &a);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
    }

    #[test]
    fn f1_lies_between_precision_and_recall(a in tokens(), b in tokens()) {
        for s in [rouge_n(&a, &b, 1).unwrap(), rouge_n(&a, &b, 2).unwrap(), rouge_l(&a, &b)] {
            let lo = s.precision.min(s.recall);
            let hi = s.precision.max(s.recall);
            prop_assert!(lo - 1e-15 <= s.f1 && s.f1 <= hi + 1e-15);
        }
    }

    #[test]
    fn byte_truncation_keeps_whole_tokens(a in tokens(), limit in 0usize..40) {
        let cut = truncate(&a, TruncationPolicy::Bytes(limit));
        prop_assert!(cut.join(" ").len() <= limit);
        prop_assert_eq!(&a[..cut.len()], &cut[..]);
        if cut.len() < a.len() {
            let next = a[..=cut.len()].join(" ");
            prop_assert!(next.len() > limit);
        }
    }

    #[test]
    fn truncation_never_raises_recall(a in tokens(), b in tokens(), limit in 0usize..40) {
        let pair = vec![SummaryPair::single(vec![a.clone()], vec![b.clone()])];
        if b.is_empty() {
            return Ok(());
        }
        let full = score_corpus(&pair, TruncationPolicy::None).unwrap();
        let cut = score_corpus(&pair, TruncationPolicy::Bytes(limit)).unwrap();
        prop_assert!(cut.rouge_1.recall <= full.rouge_1.recall);
        prop_assert!(cut.rouge_2.recall <= full.rouge_2.recall);
        prop_assert!(cut.rouge_l.recall <= full.rouge_l.recall);
    }
}
