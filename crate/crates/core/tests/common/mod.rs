//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use its_core::tensor::SeededRng;
use its_core::text::Document;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Random sequence of length `0..=max_len` over an alphabet of `alphabet` tokens.
pub fn random_sequence(rng: &mut SeededRng, max_len: usize, alphabet: usize) -> Vec<String> {
    let len = rng.below(max_len + 1);
    (0..len).map(|_| format!("t{}", rng.below(alphabet))).collect()
}

/// Clipped n-gram overlap by listing every n-gram and matching one by one.
pub fn brute_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let grams = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            Vec::new()
        } else {
            (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
        }
    };
    let c = grams(cand);
    let mut r = grams(reference);
    let (c_len, r_len) = (c.len(), r.len());
    let mut overlap = 0;
    for g in &c {
        if let Some(pos) = r.iter().position(|x| x == g) {
            r.swap_remove(pos);
            overlap += 1;
        }
    }
    (overlap, c_len, r_len)
}

/// Recursive LCS with memoization.
pub fn memo_lcs(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean of ROUGE-1 and ROUGE-2 F1 computed with the brute-force counters.
pub fn brute_objective(cand: &[String], reference: &[String]) -> f64 {
    let f = |n| {
        let (o, c, r) = brute_overlap(cand, reference, n);
        f_measure(ratio(o, c), ratio(o, r))
    };
    0.5 * (f(1) + f(2))
}

/// Best objective over every non-empty subset of at most `max_select`
/// sentences, concatenated in document order.
pub fn best_subset_score(doc: &Document, max_select: usize) -> f64 {
    let reference = doc.highlights.as_ref().expect("highlights").concat();
    let n = doc.num_sentences();
    let mut best = 0.0_f64;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > max_select {
            continue;
        }
        let cand: Vec<String> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .flat_map(|i| doc.sentences[i].clone())
            .collect();
        best = best.max(brute_objective(&cand, &reference));
    }
    best
}

/// Document with 1..=8 sentences over a small vocabulary. With probability
/// one half one sentence is copied verbatim into the highlight.
pub fn random_document(rng: &mut SeededRng, id: usize) -> (Document, Option<usize>) {
    let n = 1 + rng.below(8);
    let sentences: Vec<Vec<String>> = (0..n)
        .map(|_| (0..2 + rng.below(6)).map(|_| format!("v{}", rng.below(12))).collect())
        .collect();
    let (highlight, copied) = if rng.below(2) == 0 {
        let i = rng.below(n);
        (sentences[i].clone(), Some(i))
    } else {
        (
            (0..3 + rng.below(6)).map(|_| format!("v{}", rng.below(12))).collect(),
            None,
        )
    };
    let doc = Document::new(format!("r{id}"), sentences).with_highlights(vec![highlight]);
    (doc, copied)
}
