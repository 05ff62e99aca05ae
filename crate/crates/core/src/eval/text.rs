//! Answer-text overlap metrics over normalized tokens.

use std::collections::HashMap;

/// Zero-count n-gram precision floor for sentence-level BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// QA answer normalization: lowercase, delete ASCII punctuation, drop the
/// articles a/an/the, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with uniform weights over orders `1..=max_n`.
///
/// N-gram counts are clipped by the largest count in any single reference.
/// A zero clipped count takes precision [`BLEU_EPSILON`]. Orders longer than
/// the prediction are left out of the geometric mean, so a prediction equal
/// to its reference always scores 1. The brevity penalty uses the reference
/// length closest to the prediction length (shorter one on ties). An empty
/// prediction scores 0.
pub fn bleu(prediction: &str, references: &[String], max_n: usize) -> f64 {
    assert!((1..=4).contains(&max_n), "max_n must be in 1..=4");
    let pred = normalize_answer(prediction);
    if pred.is_empty() || references.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| normalize_answer(r)).collect();
    let orders = max_n.min(pred.len());

    let mut log_sum = 0.0;
    for n in 1..=orders {
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = ngram_counts(&pred, n)
            .into_iter()
            .map(|(g, c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = pred.len() + 1 - n;
        let p = if clipped > 0 { clipped as f64 / total as f64 } else { BLEU_EPSILON };
        log_sum += p.ln();
    }

    let c = pred.len();
    let r = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| (l.abs_diff(c), l))
        .unwrap_or(0);
    let bp = (1.0 - r as f64 / c as f64).exp().min(1.0);
    bp * (log_sum / orders as f64).exp()
}

/// Length of the longest common subsequence, two-row dynamic programme.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// ROUGE-L F1 (β = 1), best over references.
pub fn rouge_l(prediction: &str, references: &[String]) -> f64 {
    let pred = normalize_answer(prediction);
    if pred.is_empty() {
        return 0.0;
    }
    references
        .iter()
        .map(|r| {
            let r = normalize_answer(r);
            if r.is_empty() {
                return 0.0;
            }
            let l = lcs_len(&pred, &r) as f64;
            f_measure(l / pred.len() as f64, l / r.len() as f64)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TokenPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Bag-of-tokens precision, recall and F1 against the reference with the
/// highest F1 (first one on ties).
pub fn token_prf(prediction: &str, references: &[String]) -> TokenPrf {
    let pred = normalize_answer(prediction);
    let mut best = TokenPrf::default();
    if pred.is_empty() {
        return best;
    }
    let mut pred_counts: HashMap<&str, usize> = HashMap::new();
    for t in &pred {
        *pred_counts.entry(t).or_insert(0) += 1;
    }
    for r in references {
        let r = normalize_answer(r);
        if r.is_empty() {
            continue;
        }
        let mut ref_counts: HashMap<&str, usize> = HashMap::new();
        for t in &r {
            *ref_counts.entry(t).or_insert(0) += 1;
        }
        let matched: usize = pred_counts
            .iter()
            .map(|(t, c)| (*c).min(ref_counts.get(t).copied().unwrap_or(0)))
            .sum();
        if matched == 0 {
            continue;
        }
        let p = matched as f64 / pred.len() as f64;
        let rc = matched as f64 / r.len() as f64;
        let f1 = f_measure(p, rc);
        if f1 > best.f1 {
            best = TokenPrf { precision: p, recall: rc, f1 };
        }
    }
    best
}
