use std::collections::HashMap;

use proptest::prelude::*;

use rankqa::corpus::{Passage, PassageStore};
use rankqa::ranking::{RankedEntry, RankedList, Stage};
use rankqa::reranker::{
    rerank, Candidate, CountingScorer, RerankConfig, RerankError, Scorer, ScorerError, TableScorer,
};

fn fixture(n: usize, fr_scores: &[f64]) -> (RankedList, PassageStore) {
    let mut list = RankedList::new("q", Stage::FullRank);
    let mut sorted = fr_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    list.entries = (0..n)
        .map(|i| RankedEntry { passage_id: format!("p{i:03}"), score: sorted[i] })
        .collect();
    let store = (0..n).map(|i| Passage::native(format!("p{i:03}"), format!("text {i}"))).collect();
    (list, store)
}

fn config(rerank_size: usize, batch_size: usize) -> RerankConfig {
    RerankConfig { rerank_size, batch_size, ..Default::default() }
}

/// Fails on the `n`-th call.
struct FailOn(usize, std::sync::atomic::AtomicUsize);

impl Scorer for FailOn {
    fn score_batch(&self, _q: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        let call = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if call == self.0 {
            return Err(ScorerError::Other("boom".into()));
        }
        Ok(vec![0.0; passages.len()])
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rerank_properties(
        fr_scores in prop::collection::vec(-5.0f64..5.0, 0..60),
        table_scores in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0, 2.0, 7.5]), 60),
        r in 1usize..80,
        batch in 1usize..20,
    ) {
        let n = fr_scores.len();
        let (list, store) = fixture(n, &fr_scores);
        let table: HashMap<String, f64> = (0..60).map(|i| (format!("p{i:03}"), table_scores[i])).collect();
        let scorer = CountingScorer::new(TableScorer(table));
        let cfg = config(r, batch);
        let out = rerank(&scorer, "q", &list, &store, &cfg).unwrap();

        prop_assert_eq!(scorer.calls(), r.min(n).div_ceil(batch));
        prop_assert_eq!(scorer.calls(), cfg.expected_calls(n));
        prop_assert_eq!(scorer.passages(), r.min(n));
        prop_assert_eq!(out.stage, Stage::ReRank);
        prop_assert!(out.is_well_formed());

        let mut a = out.passage_ids();
        let mut b = list.passage_ids();
        prop_assert_eq!(&a[r.min(n)..], &b[r.min(n)..]);
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);

        // a second pass over an already reranked head changes nothing
        let mut again_in = out.clone();
        again_in.stage = Stage::FullRank;
        let again = rerank(&scorer, "q", &again_in, &store, &cfg).unwrap();
        prop_assert_eq!(again.passage_ids(), out.passage_ids());
    }

    #[test]
    fn size_one_keeps_order(fr_scores in prop::collection::vec(-5.0f64..5.0, 1..40), s in -10.0f64..10.0) {
        let (list, store) = fixture(fr_scores.len(), &fr_scores);
        let table: HashMap<String, f64> = [("p000".to_string(), s)].into_iter().collect();
        let out = rerank(&TableScorer(table), "q", &list, &store, &config(1, 4)).unwrap();
        prop_assert_eq!(out.passage_ids(), list.passage_ids());
    }
}

#[test]
fn any_failing_batch_fails_the_call() {
    let (list, store) = fixture(10, &[1.0; 10]);
    for fail_at in 0..4 {
        let scorer = FailOn(fail_at, Default::default());
        let err = rerank(&scorer, "q", &list, &store, &config(10, 3)).unwrap_err();
        assert!(matches!(err, RerankError::ScorerFailure { batch_index, .. } if batch_index == fail_at));
    }
}

#[test]
fn rejects_bad_input() {
    let (list, store) = fixture(3, &[1.0, 2.0, 3.0]);
    let scorer = TableScorer::default();
    assert!(matches!(rerank(&scorer, "q", &list, &store, &config(0, 1)), Err(RerankError::InvalidConfig(_))));
    assert!(matches!(rerank(&scorer, "q", &list, &store, &config(1, 0)), Err(RerankError::InvalidConfig(_))));
    let mut wrong = list.clone();
    wrong.stage = Stage::ReRank;
    assert!(matches!(rerank(&scorer, "q", &wrong, &store, &config(2, 1)), Err(RerankError::WrongStage)));
    let empty = PassageStore::new();
    assert!(matches!(rerank(&scorer, "q", &list, &empty, &config(2, 1)), Err(RerankError::MissingPassage(_))));
}
