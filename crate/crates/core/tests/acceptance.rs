//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Criterion 10 runs only when
//! `RANKQA_MSMARCO_DIR` points at an MS MARCO passage directory.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use rankqa::answer::{BaselineExtractor, Extractor, ExtractorError, RemoteExtractor};
use rankqa::corpus::{
    chunk_document, read_answers, read_passage_collection, read_qrels, read_queries, ChunkParams, Document,
    OnMalformed, Passage, PassageStore, Query, RelevanceJudgments,
};
use rankqa::datapack::DataPack;
use rankqa::eval::{bleu, evaluate_run, rouge_l, semantic_similarity, token_prf, EmbeddingTable, EvalReport};
use rankqa::fullranker::{build_index, IndexOptions};
use rankqa::pipeline::{BatchInputs, Pipeline, PipelineConfig};
use rankqa::ranking::{read_trec_run, RankedEntry, RankedList, Run, Stage};
use rankqa::remote::RemoteError;
use rankqa::reranker::{
    rerank, Candidate, CountingScorer, LexicalScorer, RemoteScorer, RerankConfig, Scorer, ScorerError, TableScorer,
};
use rankqa::stub::{ExtractorBehavior, ScorerBehavior, StubConfig, StubServer};
use rankqa::Execution;

type Check = fn() -> String;

fn main() -> ExitCode {
    let criteria: [(u8, &str, Option<u64>, Check); 9] = [
        (1, "bm25 matches brute-force oracle", Some(10), bm25_oracle),
        (2, "metrics match frozen oracle fixtures", Some(5), metric_fixtures),
        (3, "ranking metric invariants", Some(5), ranking_invariants),
        (4, "rerank size 1 is a no-op", None, rerank_size_one),
        (5, "rerank call counts", None, rerank_call_counts),
        (6, "chunking", None, chunking),
        (7, "bleu-k nonincreasing in k", None, bleu_monotone),
        (8, "wire protocol conformance", Some(30), wire_protocol),
        (9, "datapack round-trip and accumulation", Some(10), datapack_fuzz),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(detail) => match limit {
                Some(l) if secs >= l as f64 => (false, format!("{detail}; over the {l}s limit")),
                _ => (true, detail),
            },
            Err(e) => (false, panic_message(&e)),
        };
        failed += usize::from(!ok);
        let status = if ok { "PASS" } else { "FAIL" };
        println!("{status} criterion {n:>2}: {name} ({secs:.2}s) {detail}");
    }
    match std::env::var_os("RANKQA_MSMARCO_DIR") {
        Some(dir) => {
            let t = Instant::now();
            let result = catch_unwind(AssertUnwindSafe(|| msmarco(Path::new(&dir))));
            let secs = t.elapsed().as_secs_f64();
            let (ok, detail) = match result {
                Ok(r) => r,
                Err(e) => (false, panic_message(&e)),
            };
            failed += usize::from(!ok);
            let status = if ok { "PASS" } else { "FAIL" };
            println!("{status} criterion 10: ms marco bm25 effectiveness ({secs:.0}s) {detail}");
        }
        None => println!("SKIP criterion 10: ms marco bm25 effectiveness (set RANKQA_MSMARCO_DIR)"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn bm25_oracle() -> String {
    let mut queries = 0;
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let passages = common::random_corpus(&mut rng, 200);
        let exec = if seed % 2 == 0 { Execution::Parallel } else { Execution::Sequential };
        let index = build_index(passages.clone(), IndexOptions::default(), exec).unwrap();
        for _ in 0..rng.gen_range(1..=30) {
            let q = common::random_query(&mut rng);
            let got = index.search("q", &q, passages.len()).unwrap();
            let want = common::brute_force_bm25(&passages, &q, 1.2, 0.75);
            let ids: Vec<&str> = want.iter().map(|(p, _)| p.as_str()).collect();
            assert_eq!(got.passage_ids(), ids, "seed {seed} query {q:?}");
            for (e, (_, s)) in got.entries.iter().zip(&want) {
                assert!((e.score - s).abs() <= 1e-9, "seed {seed} query {q:?}: {} vs {s}", e.score);
            }
            queries += 1;
        }
    }
    format!("25 corpora, {queries} queries")
}

fn metric_fixtures() -> String {
    let cases: Vec<Value> =
        serde_json::from_slice(&std::fs::read(common::fixture("metric_pairs.json")).unwrap()).unwrap();
    assert!(cases.len() >= 50, "only {} metric cases", cases.len());
    let table = EmbeddingTable::load(&common::fixture("toy_vectors.txt")).unwrap();
    let close = |got: f64, want: &Value, tol: f64, what: &str| {
        let want = want.as_f64().unwrap();
        assert!((got - want).abs() <= tol, "{what}: {got} vs {want}");
    };
    for (i, c) in cases.iter().enumerate() {
        let p = c["prediction"].as_str().unwrap();
        let refs: Vec<String> =
            c["references"].as_array().unwrap().iter().map(|r| r.as_str().unwrap().to_string()).collect();
        for n in 1..=4 {
            close(bleu(p, &refs, n), &c[format!("bleu{n}")], 1e-6, &format!("case {i} bleu{n}"));
        }
        close(rouge_l(p, &refs), &c["rouge_l"], 1e-9, &format!("case {i} rouge_l"));
        let prf = token_prf(p, &refs);
        close(prf.precision, &c["precision"], 1e-9, &format!("case {i} precision"));
        close(prf.recall, &c["recall"], 1e-9, &format!("case {i} recall"));
        close(prf.f1, &c["f1"], 1e-9, &format!("case {i} f1"));
        close(semantic_similarity(p, &refs[0], &table), &c["semantic_sim"], 1e-9, &format!("case {i} sim"));
    }

    let run = read_trec_run(BufReader::new(File::open(common::fixture("eval/run.txt")).unwrap())).unwrap();
    let qrels = read_qrels(&common::fixture("eval/qrels.tsv")).unwrap();
    let frozen: Value =
        serde_json::from_slice(&std::fs::read(common::fixture("eval/expected.json")).unwrap()).unwrap();
    let ns: Vec<usize> = frozen["n_values"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    let report = evaluate_run(&run, &qrels, &ns, Execution::Sequential);
    assert_eq!(report.evaluated as u64, frozen["evaluated"].as_u64().unwrap());
    for (q, m) in frozen["per_query"].as_object().unwrap() {
        for (k, v) in m.as_object().unwrap() {
            close(report.per_query[q][k], v, 1e-9, &format!("{q} {k}"));
        }
    }
    for (k, v) in frozen["aggregate"].as_object().unwrap() {
        close(report.aggregate[k], v, 1e-9, k);
    }
    format!("{} text pairs x 8 metrics, {} ranked queries", cases.len(), report.evaluated)
}

fn random_run(rng: &mut ChaCha8Rng) -> (Run, RelevanceJudgments) {
    let mut run = Run::new();
    let mut qrels = RelevanceJudgments::new();
    for q in 0..rng.gen_range(1..=12) {
        let mut docs: Vec<usize> = (0..30).collect();
        docs.shuffle(rng);
        docs.truncate(rng.gen_range(0..=25));
        run.insert(format!("q{q}"), docs.iter().map(|d| format!("d{d}")).collect());
        let rel: BTreeSet<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..30)).collect();
        for r in rel {
            qrels.insert(format!("q{q}"), format!("d{r}"));
        }
    }
    (run, qrels)
}

fn ranking_invariants() -> String {
    let ns = [1, 3, 5, 10, 20, 50];
    let at = |r: &EvalReport, m: &str, n: usize| r.aggregate[&format!("{m}@{n}")];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut multi_violations = 0;
    for i in 0..100 {
        let (run, qrels) = random_run(&mut rng);
        let single: RelevanceJudgments =
            qrels.iter().map(|(q, r)| (q.clone(), r.iter().next().unwrap().clone())).collect();
        for judged in [&qrels, &single] {
            let r = evaluate_run(&run, judged, &ns, Execution::Sequential);
            for w in ns.windows(2) {
                assert!(at(&r, "recall", w[0]) <= at(&r, "recall", w[1]), "run {i}: recall not monotone");
                assert!(at(&r, "mrr", w[0]) <= at(&r, "mrr", w[1]), "run {i}: mrr not monotone");
            }
        }
        let r = evaluate_run(&run, &single, &ns, Execution::Sequential);
        for n in ns {
            assert!(at(&r, "mrr", n) <= at(&r, "recall", n), "run {i}: mrr@{n} > recall@{n}");
        }
        let r = evaluate_run(&run, &qrels, &ns, Execution::Sequential);
        multi_violations += usize::from(ns.iter().any(|&n| at(&r, "mrr", n) > at(&r, "recall", n)));
    }
    format!(
        "100 runs; mrr<=recall holds on single-judgment qrels \
         ({multi_violations}/100 multi-judgment runs exceed it, as recall divides by the judged count)"
    )
}

fn toy_pipeline(cfg: PipelineConfig) -> Pipeline {
    Pipeline::build(PipelineConfig { collection: Some(common::fixture("toy/collection.tsv")), ..cfg }).unwrap()
}

fn toy_queries() -> Vec<Query> {
    read_queries(&common::fixture("toy/queries.tsv")).unwrap()
}

fn rerank_size_one() -> String {
    let queries = toy_queries();
    let qrels = read_qrels(&common::fixture("toy/qrels.tsv")).unwrap();
    let inputs = BatchInputs { queries: &queries, qrels: Some(&qrels), answers: None, embeddings: None };
    let cfg = PipelineConfig { full_rank_top_n: 5, rerank_size: 1, n_values: vec![1, 3, 5, 10], ..Default::default() };
    let base = toy_pipeline(cfg.clone());
    let stub = StubServer::scorer(ScorerBehavior::PassageLength).unwrap();
    let table: HashMap<String, f64> = (1..=5).map(|i| (format!("p{i}"), 10.0 - i as f64 * 3.0)).collect();
    let scorers: Vec<(&str, Arc<dyn Scorer>)> = vec![
        ("lexical", Arc::new(LexicalScorer::new(base.index().clone()))),
        ("table", Arc::new(TableScorer(table))),
        ("remote", Arc::new(RemoteScorer::new(stub.url(), Duration::from_secs(5), 2).unwrap())),
    ];
    for (name, scorer) in &scorers {
        let extractor = Arc::new(BaselineExtractor::new(base.index().clone()));
        let p = Pipeline::with_components(cfg.clone(), base.index().clone(), base.store().clone(), scorer.clone(), extractor)
            .unwrap();
        let r = p.run_batch(inputs, None).unwrap().report;
        let (fr, rr) = (r.full_rank.unwrap(), r.rerank.unwrap());
        assert_eq!(fr.per_query, rr.per_query, "{name}");
        assert_eq!(fr.aggregate, rr.aggregate, "{name}");
    }
    format!("{} scorers, {} queries", scorers.len(), queries.len())
}

fn rerank_call_counts() -> String {
    let mut cells = 0;
    for n in [0, 1, 5, 33, 120] {
        let mut list = RankedList::new("q", Stage::FullRank);
        list.entries =
            (0..n).map(|i| RankedEntry { passage_id: format!("p{i:03}"), score: (n - i) as f64 }).collect();
        let store: PassageStore = (0..n).map(|i| Passage::native(format!("p{i:03}"), format!("text {i}"))).collect();
        for r in [1, 2, 3, 5, 10, 32, 100, 150] {
            for batch in [1, 2, 3, 7, 16, 32, 64] {
                let scorer = CountingScorer::new(TableScorer::default());
                let cfg = RerankConfig { rerank_size: r, batch_size: batch, ..Default::default() };
                rerank(&scorer, "q", &list, &store, &cfg).unwrap();
                let want = r.min(n).div_ceil(batch);
                assert_eq!(scorer.calls(), want, "n={n} R={r} batch={batch}");
                assert_eq!(scorer.passages(), r.min(n), "n={n} R={r} batch={batch}");
                cells += 1;
            }
        }
    }
    format!("{cells} (candidates, R, batch) cells")
}

fn doc(tokens: usize) -> Document {
    Document { doc_id: "d".into(), title: None, body: (0..tokens).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ") }
}

fn chunking() -> String {
    let chunks = chunk_document(&doc(130), ChunkParams::default()).unwrap();
    let spans: Vec<(usize, usize)> = chunks.iter().map(|c| (c.token_begin, c.token_end)).collect();
    assert_eq!(spans, [(0, 60), (45, 105), (90, 130)]);
    assert_eq!(chunk_document(&doc(10), ChunkParams::default()).unwrap().len(), 1);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut docs = 0;
    for _ in 0..500 {
        let tokens = rng.gen_range(0..400);
        let params = if rng.gen_bool(0.5) {
            ChunkParams::default()
        } else {
            let window = rng.gen_range(2..80);
            ChunkParams::new(window, rng.gen_range(0..window)).unwrap()
        };
        let chunks = chunk_document(&doc(tokens), params).unwrap();
        let mut covered = vec![false; tokens];
        for (k, c) in chunks.iter().enumerate() {
            assert_eq!(c.token_begin, k * params.step());
            assert!(c.token_end - c.token_begin <= params.window);
            covered[c.token_begin..c.token_end].iter_mut().for_each(|t| *t = true);
        }
        assert!(covered.iter().all(|c| *c), "{tokens} tokens under {params:?} not covered");
        for w in chunks.windows(2) {
            assert_eq!(w[0].token_end - w[0].token_begin, params.window);
            assert_eq!(w[0].token_end - w[1].token_begin, params.overlap);
        }
        if tokens > 0 && tokens <= params.window {
            assert_eq!(chunks.len(), 1);
        }
        docs += 1;
    }
    format!("130 tokens -> 3 chunks; {docs} random documents")
}

fn bleu_monotone() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    for i in 0..200 {
        let p = common::random_text(&mut rng, 1, 30);
        let r = vec![common::random_text(&mut rng, 1, 30)];
        let scores: Vec<f64> = (1..=4).map(|n| bleu(&p, &r, n)).collect();
        if scores.windows(2).any(|w| w[1] > w[0]) {
            violations.push(format!("pair {i} {p:?} / {:?}: {scores:?}", r[0]));
        }
    }
    assert!(violations.is_empty(), "{} violations: {}", violations.len(), violations.join("; "));
    "200 seeded pairs".into()
}

fn wire_protocol() -> String {
    let fast = Duration::from_secs(5);
    let slow = Duration::from_millis(1500);
    let short = Duration::from_millis(200);
    let texts = ["short", "a medium passage", "the longest passage of them all"];
    let batch: Vec<Candidate<'_>> = texts.iter().map(|t| Candidate { id: t, text: t }).collect();
    let score = |b: ScorerBehavior, timeout: Duration| {
        let stub = StubServer::scorer(b).unwrap();
        RemoteScorer::new(stub.url(), timeout, 2).unwrap().score_batch("passage", &batch)
    };
    assert_eq!(score(ScorerBehavior::Zeros, fast).unwrap(), [0.0; 3]);
    assert_eq!(score(ScorerBehavior::PassageLength, fast).unwrap(), [5.0, 16.0, 31.0]);
    for b in [ScorerBehavior::ShortByOne, ScorerBehavior::NonNumeric] {
        let e = score(b.clone(), fast).unwrap_err();
        assert!(matches!(e, ScorerError::Remote(RemoteError::Protocol(_))), "{b:?}: {e}");
    }
    assert_eq!(score(ScorerBehavior::Delay(slow), short).unwrap_err(), ScorerError::Remote(RemoteError::Timeout));
    assert!(matches!(score(ScorerBehavior::Status(500), fast), Err(ScorerError::Remote(RemoteError::Transport(_)))));

    let extract = |b: ExtractorBehavior, timeout: Duration| {
        let stub = StubServer::extractor(b).unwrap();
        RemoteExtractor::new(stub.url(), timeout, 2).unwrap().extract("q", "some context")
    };
    let whole = extract(ExtractorBehavior::WholeContext, fast).unwrap();
    assert_eq!((whole.begin, whole.end), (0, 12));
    for b in [ExtractorBehavior::BeginAfterEnd, ExtractorBehavior::PastEnd] {
        let e = extract(b.clone(), fast).unwrap_err();
        assert!(matches!(e, ExtractorError::Remote(RemoteError::Protocol(_))), "{b:?}: {e}");
    }
    assert_eq!(
        extract(ExtractorBehavior::Delay(slow), short).unwrap_err(),
        ExtractorError::Remote(RemoteError::Timeout)
    );
    assert!(matches!(extract(ExtractorBehavior::Status(503), fast), Err(ExtractorError::Remote(RemoteError::Transport(_)))));

    let queries = toy_queries();
    let qrels = read_qrels(&common::fixture("toy/qrels.tsv")).unwrap();
    let answers = read_answers(&common::fixture("toy/answers.tsv")).unwrap();
    let inputs = BatchInputs { queries: &queries, qrels: Some(&qrels), answers: Some(&answers), embeddings: None };
    let stub = StubServer::start(StubConfig::default()).unwrap();
    let mut outputs = Vec::new();
    for workers in [0, 1] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            scorer: stub.url().to_string(),
            extractor: stub.url().to_string(),
            full_rank_top_n: 5,
            rerank_size: 4,
            rerank_batch_size: 3,
            workers,
            ..Default::default()
        };
        let r = toy_pipeline(cfg).run_batch(inputs, Some(dir.path())).unwrap();
        assert_eq!(r.report.failed, 0, "{:?}", r.report.failures);
        let files: Vec<Vec<u8>> = ["full_rank.run", "rerank.run", "predictions.tsv"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1], "stub run output differs between invocations");
    format!("8 error cases, end-to-end run against stubs ({} requests)", stub.requests())
}

fn datapack_fuzz() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut annotations = 0;
    for i in 0..1000 {
        let (mut pack, mut ids) = common::random_pack(&mut rng);
        let bytes = pack.serialize();
        let back = DataPack::deserialize(&bytes).unwrap();
        assert_eq!(back, pack, "pack {i}");
        assert_eq!(back.serialize(), bytes, "pack {i}");
        for _ in 0..10 {
            let before = pack.clone();
            common::add_random(&mut rng, &mut pack, &mut ids);
            assert!(pack.annotations().starts_with(before.annotations()), "pack {i}");
            assert!(pack.links().starts_with(before.links()), "pack {i}");
            assert!(pack.groups().starts_with(before.groups()), "pack {i}");
            assert_eq!(pack.text(), before.text());
        }
        assert_eq!(DataPack::deserialize(&pack.serialize()).unwrap(), pack, "pack {i}");
        annotations += pack.annotations().len();
    }
    format!("1000 packs, {annotations} spans")
}

/// Expects `collection.tsv`, `queries.dev.small.tsv` and `qrels.dev.small.tsv`.
fn msmarco(dir: &Path) -> (bool, String) {
    let passages = read_passage_collection(&dir.join("collection.tsv"), OnMalformed::Skip)
        .unwrap()
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    let index = build_index(passages, IndexOptions::default(), Execution::Parallel).unwrap();
    let mut queries = read_queries(&dir.join("queries.dev.small.tsv")).unwrap();
    queries.truncate(1000);
    let qrels = read_qrels(&dir.join("qrels.dev.small.tsv")).unwrap();
    let lists: Vec<RankedList> = Execution::Parallel.map(&queries, |q| index.search(&q.query_id, &q.text, 10).unwrap());
    let run = rankqa::eval::run_from_lists(&lists);
    let r = evaluate_run(&run, &qrels, &[10], Execution::Parallel);
    let (mrr, recall) = (r.aggregate["mrr@10"], r.aggregate["recall@10"]);
    let ok = (0.13..=0.20).contains(&mrr) && (0.28..=0.42).contains(&recall);
    (ok, format!("{} queries, mrr@10 {mrr:.4}, recall@10 {recall:.4}", r.evaluated))
}
