mod common;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use proptest::prelude::*;
use serde::Deserialize;

use rankqa::corpus::{read_qrels, RelevanceJudgments};
use rankqa::eval::{evaluate_run, recall_at_n, reciprocal_rank_at_n, EvalReport};
use rankqa::ranking::{read_trec_run, Run};
use rankqa::Execution;

#[derive(Deserialize)]
struct Frozen {
    n_values: Vec<usize>,
    per_query: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>>,
    aggregate: std::collections::BTreeMap<String, f64>,
    evaluated: usize,
    skipped: usize,
}

#[test]
fn fixture_run_reproduces_frozen_report() {
    let run = read_trec_run(BufReader::new(File::open(common::fixture("eval/run.txt")).unwrap())).unwrap();
    let qrels = read_qrels(&common::fixture("eval/qrels.tsv")).unwrap();
    let frozen: Frozen =
        serde_json::from_slice(&std::fs::read(common::fixture("eval/expected.json")).unwrap()).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let report: EvalReport = evaluate_run(&run, &qrels, &frozen.n_values, exec);
        assert_eq!(report.evaluated, frozen.evaluated);
        assert_eq!(report.skipped, frozen.skipped);
        assert_eq!(report.per_query.len(), frozen.per_query.len());
        for (q, m) in &frozen.per_query {
            for (k, v) in m {
                assert!((report.per_query[q][k] - v).abs() <= 1e-12, "{q} {k}");
            }
        }
        for (k, v) in &frozen.aggregate {
            assert!((report.aggregate[k] - v).abs() <= 1e-12, "{k}");
        }
    }
}

#[test]
fn aggregate_is_mean_of_per_query() {
    let run = read_trec_run(BufReader::new(File::open(common::fixture("eval/run.txt")).unwrap())).unwrap();
    let qrels = read_qrels(&common::fixture("eval/qrels.tsv")).unwrap();
    let report = evaluate_run(&run, &qrels, &[5], Execution::Sequential);
    for (k, v) in &report.aggregate {
        let mean = report.per_query.values().map(|m| m[k]).sum::<f64>() / report.evaluated as f64;
        assert!((mean - v).abs() < 1e-12);
    }
}

fn run_and_qrels() -> impl Strategy<Value = (Run, RelevanceJudgments)> {
    let ranking = prop::collection::vec(0u8..30, 0..25).prop_map(|v| {
        let mut seen = BTreeSet::new();
        v.into_iter().filter(|x| seen.insert(*x)).map(|x| format!("d{x}")).collect::<Vec<_>>()
    });
    let rel = prop::collection::btree_set(0u8..30, 1..5);
    prop::collection::vec((ranking, rel), 1..12).prop_map(|rows| {
        let mut run = Run::new();
        let mut qrels = RelevanceJudgments::new();
        for (i, (ranking, rel)) in rows.into_iter().enumerate() {
            run.insert(format!("q{i}"), ranking);
            for r in rel {
                qrels.insert(format!("q{i}"), format!("d{r}"));
            }
        }
        (run, qrels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_invariants((run, qrels) in run_and_qrels()) {
        let ns = [1, 3, 5, 10, 20, 50];
        let report = evaluate_run(&run, &qrels, &ns, Execution::Sequential);
        for w in ns.windows(2) {
            let at = |m: &str, n: usize| report.aggregate[&format!("{m}@{n}")];
            prop_assert!(at("recall", w[0]) <= at("recall", w[1]));
            prop_assert!(at("mrr", w[0]) <= at("mrr", w[1]));
        }
        // with one judged passage per query recall is the hit indicator
        let single: RelevanceJudgments = qrels
            .iter()
            .map(|(q, r)| (q.clone(), r.iter().next().unwrap().clone()))
            .collect();
        let single_report = evaluate_run(&run, &single, &ns, Execution::Sequential);
        for n in ns {
            let mrr = single_report.aggregate[&format!("mrr@{n}")];
            let recall = single_report.aggregate[&format!("recall@{n}")];
            prop_assert!(mrr <= recall);
        }
        for (q, ranking) in &run {
            let rel = qrels.get(q).unwrap();
            for n in ns {
                let rr = reciprocal_rank_at_n(ranking, rel, n);
                let hit = if ranking.iter().take(n).any(|p| rel.contains(p)) { 1.0 } else { 0.0 };
                prop_assert!(rr <= hit);
                prop_assert!((0.0..=1.0).contains(&recall_at_n(ranking, rel, n).unwrap()));
            }
        }
    }
}
