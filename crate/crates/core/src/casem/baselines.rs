use crate::data::{EmbeddingTable, SentencePairSet};
use crate::tensor::{self, dot, first_principal_direction, pearson_r, Tensor};

use super::{CasemError, Result};

/// Mean of the known word vectors; `None` if no token is known.
pub fn average_embedding<S: AsRef<str>>(tokens: &[S], embeddings: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; embeddings.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(w) = embeddings.get(t.as_ref()) {
            acc.iter_mut().zip(w).for_each(|(a, x)| *a += x);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Some(acc)
}

/// Averaged word vectors with their common direction removed; the direction
/// is the first principal component of the training sentence averages.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaRemoval {
    pub direction: Vec<f64>,
}

impl PcaRemoval {
    pub fn fit<S: AsRef<str>>(
        sentences: &[Vec<S>],
        embeddings: &EmbeddingTable,
        power_iters: usize,
        seed: u64,
    ) -> Result<Self> {
        let rows: Vec<Vec<f64>> = sentences
            .iter()
            .filter_map(|s| average_embedding(s, embeddings))
            .collect();
        if rows.is_empty() {
            return Err(CasemError::EmptyCorpus);
        }
        let points = Tensor::from_rows(&rows)?;
        let direction = first_principal_direction(&points, power_iters, seed)?.into_data();
        Ok(Self { direction })
    }

    pub fn embed<S: AsRef<str>>(&self, tokens: &[S], embeddings: &EmbeddingTable) -> Option<Vec<f64>> {
        let mut v = average_embedding(tokens, embeddings)?;
        let k = dot(&v, &self.direction);
        v.iter_mut().zip(&self.direction).for_each(|(x, u)| *x -= k * u);
        Some(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    /// Pearson correlation × 100 between predicted and gold scores.
    pub pearson100: f64,
    pub predictions: Vec<f64>,
    /// Pairs where a side had no usable embedding; predicted as 0.
    pub undefined: usize,
}

/// Scores each pair by the cosine of its two sentence vectors and correlates
/// with the gold scores.
pub fn evaluate_pairs<F>(pairs: &SentencePairSet, embed: F) -> Result<PairScores>
where
    F: Fn(&[String]) -> Option<Vec<f64>>,
{
    let mut undefined = 0;
    let predictions: Vec<f64> = pairs
        .records
        .iter()
        .map(|r| {
            let cos = embed(&r.a).zip(embed(&r.b)).and_then(|(a, b)| tensor::cosine(&a, &b));
            cos.unwrap_or_else(|| {
                undefined += 1;
                0.0
            })
        })
        .collect();
    let r = pearson_r(&predictions, &pairs.scores())?;
    Ok(PairScores {
        pearson100: 100.0 * r,
        predictions,
        undefined,
    })
}
