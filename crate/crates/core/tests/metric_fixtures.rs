mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use serde::Deserialize;

use rankqa::eval::{bleu, rouge_l, semantic_similarity, token_prf, EmbeddingTable};

#[derive(Deserialize)]
struct Case {
    prediction: String,
    references: Vec<String>,
    bleu1: f64,
    bleu2: f64,
    bleu3: f64,
    bleu4: f64,
    rouge_l: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    semantic_sim: f64,
}

fn cases() -> Vec<Case> {
    serde_json::from_slice(&std::fs::read(common::fixture("metric_pairs.json")).unwrap()).unwrap()
}

fn table() -> EmbeddingTable {
    EmbeddingTable::load(&common::fixture("toy_vectors.txt")).unwrap()
}

#[test]
fn fixture_has_enough_cases() {
    assert!(cases().len() >= 50);
}

#[test]
fn bleu_matches_oracle() {
    for (i, c) in cases().iter().enumerate() {
        for (n, want) in [(1, c.bleu1), (2, c.bleu2), (3, c.bleu3), (4, c.bleu4)] {
            let got = bleu(&c.prediction, &c.references, n);
            assert!((got - want).abs() <= 1e-6, "case {i} bleu{n}: {got} vs {want}");
        }
    }
}

#[test]
fn rouge_and_token_prf_match_oracle() {
    for (i, c) in cases().iter().enumerate() {
        assert_abs_diff_eq!(rouge_l(&c.prediction, &c.references), c.rouge_l, epsilon = 1e-9);
        let prf = token_prf(&c.prediction, &c.references);
        assert!((prf.precision - c.precision).abs() <= 1e-9, "case {i}");
        assert!((prf.recall - c.recall).abs() <= 1e-9, "case {i}");
        assert!((prf.f1 - c.f1).abs() <= 1e-9, "case {i}");
    }
}

#[test]
fn semantic_similarity_matches_oracle() {
    let t = table();
    for (i, c) in cases().iter().enumerate() {
        let got = semantic_similarity(&c.prediction, &c.references[0], &t);
        assert!((got - c.semantic_sim).abs() <= 1e-9, "case {i}: {got} vs {}", c.semantic_sim);
    }
}

#[test]
fn oov_only_text_has_zero_similarity() {
    assert_eq!(semantic_similarity("zebra quokka", "cat", &table()), 0.0);
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["the", "cat", "sat", "mat", "dog", "ran", "a", "blue", "fox"]), 0..12)
        .prop_map(|w| w.join(" "))
}

fn distinct_words() -> impl Strategy<Value = String> {
    Just(vec!["cat", "sat", "mat", "dog", "ran", "blue", "fox", "tree"])
        .prop_shuffle()
        .prop_flat_map(|w| (0..=w.len()).prop_map(move |n| w[..n].join(" ")))
}

#[test]
fn bleu_can_rise_with_order_when_unigrams_are_clipped() {
    // clipped unigram precision 2/3, bigram precision 1
    let refs = vec!["dog blue dog".to_string()];
    let b1 = bleu("blue dog blue", &refs, 1);
    let b2 = bleu("blue dog blue", &refs, 2);
    assert!((b1 - 2.0 / 3.0).abs() < 1e-12);
    assert!((b2 - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!(b2 > b1);
}

proptest! {
    /// Without repeated prediction tokens every run of matched n-grams
    /// leaves one more matched (n-1)-gram, so precisions cannot grow with n.
    #[test]
    fn bleu_nonincreasing_for_distinct_tokens(p in distinct_words(), r in words()) {
        let refs = vec![r];
        let scores: Vec<f64> = (1..=4).map(|n| bleu(&p, &refs, n)).collect();
        for w in scores.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", scores);
        }
    }

    #[test]
    fn metrics_bounded_and_identity(p in words(), r in words()) {
        let refs = vec![r.clone()];
        for v in [bleu(&p, &refs, 4), rouge_l(&p, &refs), token_prf(&p, &refs).f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let same = vec![p.clone()];
        let has_content = !rankqa::eval::normalize_answer(&p).is_empty();
        if has_content {
            prop_assert_eq!(bleu(&p, &same, 4), 1.0);
            prop_assert_eq!(rouge_l(&p, &same), 1.0);
            prop_assert_eq!(token_prf(&p, &same).f1, 1.0);
        }
    }

    #[test]
    fn rouge_and_f1_symmetric(p in words(), r in words()) {
        let pr = vec![r.clone()];
        let rp = vec![p.clone()];
        prop_assert!((rouge_l(&p, &pr) - rouge_l(&r, &rp)).abs() < 1e-12);
        prop_assert!((token_prf(&p, &pr).f1 - token_prf(&r, &rp).f1).abs() < 1e-12);
    }
}
