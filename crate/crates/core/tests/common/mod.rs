#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rankqa::corpus::Passage;
use rankqa::datapack::{AnnotationId, AnnotationRef, AttrValue, Attributes, DataPack};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

const VOCAB: &[&str] = &[
    "cat", "dog", "mat", "sat", "river", "bank", "money", "loan", "tree", "leaf", "green", "virus",
    "cell", "protein", "gene", "covid", "mask", "school", "child", "paper", "model", "rank", "query",
    "answer", "search", "index", "token", "the", "a", "of", "and", "in", "to", "is", "on", "for",
];

/// Zipf-ish pick so a handful of terms are frequent and most are rare.
fn word(rng: &mut ChaCha8Rng) -> &'static str {
    let r: f64 = rng.gen();
    VOCAB[((r * r * r) * VOCAB.len() as f64) as usize]
}

pub fn random_text(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    let mut words: Vec<String> = (0..n).map(|_| word(rng).to_string()).collect();
    if n > 0 && rng.gen_bool(0.3) {
        words[0] = capitalize(&words[0]);
        words[n - 1].push('.');
    }
    words.join(" ")
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

pub fn random_corpus(rng: &mut ChaCha8Rng, max_passages: usize) -> Vec<Passage> {
    let n = rng.gen_range(1..=max_passages);
    let mut ids: Vec<usize> = (0..n * 3).collect();
    ids.shuffle(rng);
    ids.truncate(n);
    ids.into_iter()
        .map(|i| Passage::native(format!("p{i}"), random_text(rng, 0, 40)))
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=5);
    (0..n)
        .map(|_| if rng.gen_bool(0.1) { "zebra".to_string() } else { word(rng).to_string() })
        .collect::<Vec<_>>()
        .join(" ")
}

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Scores every passage directly from the Okapi formula and sorts by score
/// descending, then id ascending. Passages sharing no query term are left
/// out.
pub fn brute_force_bm25(passages: &[Passage], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let docs: Vec<Vec<String>> = passages.iter().map(|p| oracle_tokens(&p.text)).collect();
    let n = docs.len() as f64;
    let total: usize = docs.iter().map(Vec::len).sum();
    let avgdl = total as f64 / n;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in &docs {
        let mut seen: Vec<&str> = d.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let q = oracle_tokens(query);
    let mut out = Vec::new();
    for (p, d) in passages.iter().zip(&docs) {
        let mut score = 0.0;
        let mut hit = false;
        for term in &q {
            let tf = d.iter().filter(|t| *t == term).count();
            if tf == 0 {
                continue;
            }
            hit = true;
            let df = df[term.as_str()] as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = tf as f64;
            let rel = if avgdl > 0.0 { d.len() as f64 / avgdl } else { 0.0 };
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel));
        }
        if hit {
            out.push((p.passage_id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

const PACK_ALPHABET: &[char] = &['a', 'b', 'Z', ' ', '.', 'é', '中', '🙂', '\n', '"', '\\'];

/// A pack with random text (multi-byte characters included), spans, links,
/// groups and metadata. Returns the ids it created, in creation order.
pub fn random_pack(rng: &mut ChaCha8Rng) -> (DataPack, Vec<AnnotationId>) {
    let len = rng.gen_range(0..60);
    let text: String = (0..len).map(|_| *PACK_ALPHABET.choose(rng).unwrap()).collect();
    let mut pack = DataPack::with_id(format!("pack-{}", rng.gen::<u32>()), text);
    let mut ids = Vec::new();
    let ops = rng.gen_range(0..25);
    for _ in 0..ops {
        add_random(rng, &mut pack, &mut ids);
    }
    for _ in 0..rng.gen_range(0..4) {
        pack.set_meta(format!("k{}", rng.gen_range(0..5)), random_text(rng, 0, 3));
    }
    (pack, ids)
}

/// Applies one random add operation; invalid inputs are allowed to fail.
pub fn add_random(rng: &mut ChaCha8Rng, pack: &mut DataPack, ids: &mut Vec<AnnotationId>) {
    let len = pack.len();
    match rng.gen_range(0..10) {
        0..=5 => {
            let a = rng.gen_range(0..=len + 1);
            let b = rng.gen_range(0..=len + 1);
            let mut attrs = Attributes::new();
            if rng.gen_bool(0.5) {
                attrs.insert("score".into(), AttrValue::Num(rng.gen_range(-1e6..1e6)));
            }
            if rng.gen_bool(0.3) {
                attrs.insert("label".into(), AttrValue::Str(random_text(rng, 0, 2)));
            }
            let kind = ["Token", "Sentence", "Entity", ""][rng.gen_range(0..4)];
            if let Ok(id) = pack.add_span(kind, a.min(b), a.max(b), attrs) {
                ids.push(id);
            }
        }
        6..=7 if !ids.is_empty() => {
            let p = *ids.choose(rng).unwrap();
            let c = *ids.choose(rng).unwrap();
            if let Ok(id) = pack.add_link("Rel", p, c) {
                ids.push(id);
            }
        }
        8 if !ids.is_empty() => {
            let k = rng.gen_range(1..=ids.len().min(4));
            let members: Vec<AnnotationId> = ids.choose_multiple(rng, k).copied().collect();
            if let Ok(id) = pack.add_group("Cluster", &members) {
                ids.push(id);
            }
        }
        _ => {
            let bogus = AnnotationId(10_000 + rng.gen_range(0..10));
            assert!(pack.add_link("Rel", bogus, bogus).is_err());
            assert!(!pack.contains(bogus));
            let _ = AnnotationRef::local(bogus);
        }
    }
}
