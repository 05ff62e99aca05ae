use std::collections::BTreeSet;

use super::EvalError;

/// `1 / r` for the first relevant id at 1-based position `r <= n`, else 0.
pub fn reciprocal_rank_at_n(ranking: &[String], relevant: &BTreeSet<String>, n: usize) -> f64 {
    ranking
        .iter()
        .take(n)
        .position(|id| relevant.contains(id))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Fraction of the relevant ids found in the top `n`.
pub fn recall_at_n(ranking: &[String], relevant: &BTreeSet<String>, n: usize) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::NoJudgments);
    }
    let mut seen = BTreeSet::new();
    let hits = ranking
        .iter()
        .take(n)
        .filter(|id| relevant.contains(*id) && seen.insert(id.as_str()))
        .count();
    Ok(hits as f64 / relevant.len() as f64)
}
