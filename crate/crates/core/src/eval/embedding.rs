use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::EvalError;
use crate::fullranker::tokenize;

/// Word vectors read from the plain text format `word v1 v2 ... vd`, one
/// entry per line. An optional `count dim` header line is skipped. Keys are
/// lowercased; the first vector wins for words that collide after that.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_reader(r: impl BufRead) -> Result<Self, EvalError> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| EvalError::MalformedEmbedding { line: i + 1 })?;
            if values.is_empty() {
                return Err(EvalError::MalformedEmbedding { line: i + 1 });
            }
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(EvalError::DimensionMismatch { line: i + 1, expected, found: values.len() });
            }
            vectors.entry(fields[0].to_lowercase()).or_insert(values);
        }
        Ok(Self { dim: dim.unwrap_or(0), vectors })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let input = crate::corpus::open_text(path).map_err(|e| EvalError::Input(e.to_string()))?;
        Self::from_reader(input)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Mean of the in-vocabulary token vectors, `None` if there are none.
    pub fn mean_vector(&self, text: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0usize;
        for tok in tokenize(text) {
            if let Some(v) = self.vectors.get(&tok) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                count += 1;
            }
        }
        (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
    }
}

/// Cosine between the mean word vectors of the two texts; 0 when either side
/// has no in-vocabulary token or a zero mean vector.
pub fn semantic_similarity(prediction: &str, reference: &str, table: &EmbeddingTable) -> f64 {
    let (Some(a), Some(b)) = (table.mean_vector(prediction), table.mean_vector(reference)) else {
        return 0.0;
    };
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
