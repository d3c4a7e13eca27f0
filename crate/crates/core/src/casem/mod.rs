//! Sentence re-embedding by block-coordinate decomposition of pretrained
//! word vectors.
//!
//! Every word vector is split as `w ≈ χ·v0 + (1 − χ)·w′` with a single
//! corpus-wide context vector `v0`, a per-word weight `χ ∈ [0, 1]` and a
//! per-word residual `w′ ⟂ v0`. The solver alternates closed-form updates
//! of `v0` and of the per-word pairs `(w′, χ)` while the weighted energy
//! `Σ_w n_w·|w − χ·v0 − (1 − χ)·w′|²` keeps dropping.

mod baselines;
mod persist;
mod segment;

use std::collections::BTreeMap;

use log::{debug, warn};
use thiserror::Error;

use crate::data::EmbeddingTable;
use crate::tensor::{self, dot, first_principal_direction, Tensor, TensorError, DEGENERATE_NORM};

pub use baselines::{average_embedding, evaluate_pairs, PairScores, PcaRemoval};
pub use segment::{segment_sentence, PhraseDictionary, Segment};

#[derive(Debug, Error)]
pub enum CasemError {
    #[error("no corpus word has an embedding")]
    EmptyCorpus,
    #[error("every χ is zero; the context vector is unconstrained")]
    NoContextSignal,
    #[error("embedding dimension {found} does not match model dimension {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("sentence embedding has zero norm")]
    ZeroEmbedding,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CasemError>;

/// Sentences of segmented tokens with their occurrence counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
    pub word_counts: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(sentences: Vec<Vec<String>>) -> Self {
        let mut word_counts = BTreeMap::new();
        for s in &sentences {
            for w in s {
                *word_counts.entry(w.clone()).or_insert(0) += 1;
            }
        }
        Self {
            sentences,
            word_counts,
        }
    }

    /// Segments raw token lists against `dict` before counting.
    pub fn segmented<D: PhraseDictionary + ?Sized>(dict: &D, raw: &[Vec<String>]) -> Self {
        Self::new(
            raw.iter()
                .map(|s| segment_sentence(dict, s).into_iter().map(Segment::into_text).collect())
                .collect(),
        )
    }

    pub fn total_tokens(&self) -> usize {
        self.word_counts.values().sum()
    }
}

/// Per-word solution.
#[derive(Debug, Clone, PartialEq)]
pub struct WordState {
    pub chi: f64,
    pub w_prime: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReembeddingModel {
    pub dim: usize,
    pub v0: Vec<f64>,
    pub words: BTreeMap<String, WordState>,
    /// Energy after initialization and after every accepted iteration.
    pub energy_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasemConfig {
    pub max_iters: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for CasemConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            power_iters: 100,
            seed: 0,
        }
    }
}

/// `(I − v0·v0ᵀ/|v0|²)·w`.
pub fn solve_w_prime(w: &[f64], v0: &[f64]) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    tensor::project_out_slice(&mut out, v0)?;
    Ok(out)
}

/// The `χ ∈ [0, 1]` minimizing `|w − χ·v0 − (1 − χ)·w′|²`, i.e. the
/// projection of `w` onto the segment from `w′` to `v0`.
pub fn solve_chi(w: &[f64], w_prime: &[f64], v0: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((&x, &p), &v) in w.iter().zip(w_prime).zip(v0) {
        let seg = v - p;
        num += (x - p) * seg;
        den += seg * seg;
    }
    if den.sqrt() < DEGENERATE_NORM {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Least-squares `v0` with every `(χ, w′)` held fixed:
/// `Σ n·χ·(w − (1 − χ)·w′) / Σ n·χ²`.
pub fn solve_v0(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    words: &BTreeMap<String, WordState>,
) -> Result<Vec<f64>> {
    let d = embeddings.dim();
    let mut num = vec![0.0; d];
    let mut den = 0.0;
    for (word, &n) in &corpus.word_counts {
        let (Some(w), Some(st)) = (embeddings.get(word), words.get(word)) else {
            continue;
        };
        let n = n as f64;
        for ((acc, &x), &p) in num.iter_mut().zip(w).zip(&st.w_prime) {
            *acc += n * st.chi * (x - (1.0 - st.chi) * p);
        }
        den += n * st.chi * st.chi;
    }
    if den <= 0.0 {
        return Err(CasemError::NoContextSignal);
    }
    num.iter_mut().for_each(|x| *x /= den);
    Ok(num)
}

fn residual_sq(w: &[f64], chi: f64, v0: &[f64], w_prime: &[f64]) -> f64 {
    w.iter()
        .zip(v0)
        .zip(w_prime)
        .map(|((&x, &v), &p)| {
            let r = x - chi * v - (1.0 - chi) * p;
            r * r
        })
        .sum()
}

/// `Σ_w n_w·|w − χ(w)·v0 − (1 − χ(w))·w′(w)|²` over embedded corpus words.
pub fn energy(corpus: &Corpus, embeddings: &EmbeddingTable, model: &ReembeddingModel) -> f64 {
    energy_of(corpus, embeddings, &model.v0, &model.words)
}

fn energy_of(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    v0: &[f64],
    words: &BTreeMap<String, WordState>,
) -> f64 {
    corpus
        .word_counts
        .iter()
        .filter_map(|(word, &n)| {
            let w = embeddings.get(word)?;
            let st = words.get(word)?;
            Some(n as f64 * residual_sq(w, st.chi, v0, &st.w_prime))
        })
        .sum()
}

/// Step 1: independent closed-form `(w′, χ)` per word.
fn solve_words<'a>(
    vocab: impl Iterator<Item = (&'a str, &'a [f64])>,
    v0: &[f64],
) -> Result<BTreeMap<String, WordState>> {
    vocab
        .map(|(word, w)| {
            let w_prime = solve_w_prime(w, v0)?;
            let chi = solve_chi(w, &w_prime, v0);
            Ok((word.to_string(), WordState { chi, w_prime }))
        })
        .collect()
}

pub fn run_casem(corpus: &Corpus, embeddings: &EmbeddingTable, max_iters: usize) -> Result<ReembeddingModel> {
    run_casem_with(
        corpus,
        embeddings,
        &CasemConfig {
            max_iters,
            ..CasemConfig::default()
        },
    )
}

/// Block-coordinate minimization. Starts from the first principal direction
/// of the count-weighted word vectors, then alternates `v0` and per-word
/// updates until the energy stops decreasing. Returns the best iterate.
pub fn run_casem_with(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    config: &CasemConfig,
) -> Result<ReembeddingModel> {
    let vocab: Vec<(&str, &[f64], usize)> = corpus
        .word_counts
        .iter()
        .filter_map(|(word, &n)| embeddings.get(word).map(|w| (word.as_str(), w, n)))
        .collect();
    if vocab.is_empty() {
        return Err(CasemError::EmptyCorpus);
    }
    let d = embeddings.dim();

    // √n-scaled rows give the same Gram matrix as one row per occurrence
    let mut rows = Vec::with_capacity(vocab.len() * d);
    for (_, w, n) in &vocab {
        let s = (*n as f64).sqrt();
        rows.extend(w.iter().map(|x| s * x));
    }
    let points = Tensor::matrix(vocab.len(), d, rows)?;
    let mut v0 = first_principal_direction(&points, config.power_iters, config.seed)?.into_data();
    // orient along the count-weighted mean; χ cannot go negative
    let lean: f64 = vocab.iter().map(|(_, w, n)| *n as f64 * dot(w, &v0)).sum();
    if lean < 0.0 {
        v0.iter_mut().for_each(|x| *x = -*x);
    }
    let pairs = || vocab.iter().map(|(t, w, _)| (*t, *w));

    let mut words = solve_words(pairs(), &v0)?;
    let mut best_energy = energy_of(corpus, embeddings, &v0, &words);
    let mut trace = vec![best_energy];
    debug!("iteration 0: energy {best_energy:.6}");

    for iter in 1..=config.max_iters {
        let next_v0 = match solve_v0(corpus, embeddings, &words) {
            Ok(v) => v,
            Err(CasemError::NoContextSignal) => {
                warn!("iteration {iter}: no context signal, keeping previous v0");
                break;
            }
            Err(e) => return Err(e),
        };
        let next_words = match solve_words(pairs(), &next_v0) {
            Ok(w) => w,
            Err(CasemError::Tensor(TensorError::DegenerateContext { .. })) => {
                warn!("iteration {iter}: context vector collapsed");
                break;
            }
            Err(e) => return Err(e),
        };
        let e = energy_of(corpus, embeddings, &next_v0, &next_words);
        debug!("iteration {iter}: energy {e:.6}");
        if !(e < best_energy) {
            break;
        }
        best_energy = e;
        trace.push(e);
        v0 = next_v0;
        words = next_words;
    }

    Ok(ReembeddingModel {
        dim: d,
        v0,
        words,
        energy_trace: trace,
    })
}

/// Sentence vector and bookkeeping from [`embed_sentence`].
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    pub oov: usize,
    /// Set for an empty sentence, whose vector is zero.
    pub empty: bool,
}

impl ReembeddingModel {
    pub fn chi(&self, word: &str) -> Option<f64> {
        self.words.get(word).map(|s| s.chi)
    }

    pub fn w_prime(&self, word: &str) -> Option<&[f64]> {
        self.words.get(word).map(|s| s.w_prime.as_slice())
    }

    /// Adds closed-form `(w′, χ)` for embedded words the corpus never saw,
    /// keeping `v0` fixed. Returns how many words were added.
    pub fn extend<'a, I>(&mut self, embeddings: &EmbeddingTable, words: I) -> Result<usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if embeddings.dim() != self.dim {
            return Err(CasemError::DimMismatch {
                expected: self.dim,
                found: embeddings.dim(),
            });
        }
        let mut added = 0;
        for word in words {
            if self.words.contains_key(word) {
                continue;
            }
            let Some(w) = embeddings.get(word) else { continue };
            let w_prime = solve_w_prime(w, &self.v0)?;
            let chi = solve_chi(w, &w_prime, &self.v0);
            self.words.insert(word.to_string(), WordState { chi, w_prime });
            added += 1;
        }
        Ok(added)
    }
}

impl PhraseDictionary for ReembeddingModel {
    fn contains_phrase(&self, phrase: &str) -> bool {
        self.words.contains_key(phrase)
    }
}

/// `v0·Σχ + Σ(1 − χ)·w′` over the sentence; unknown words count as pure
/// context (`χ = 1`).
pub fn embed_sentence<S: AsRef<str>>(tokens: &[S], model: &ReembeddingModel) -> SentenceEmbedding {
    let mut vector = vec![0.0; model.dim];
    if tokens.is_empty() {
        warn!("embedding an empty sentence");
        return SentenceEmbedding {
            vector,
            oov: 0,
            empty: true,
        };
    }
    let mut chi_sum = 0.0;
    let mut oov = 0;
    for t in tokens {
        match model.words.get(t.as_ref()) {
            Some(st) => {
                chi_sum += st.chi;
                for (acc, &p) in vector.iter_mut().zip(&st.w_prime) {
                    *acc += (1.0 - st.chi) * p;
                }
            }
            None => {
                chi_sum += 1.0;
                oov += 1;
            }
        }
    }
    for (acc, &v) in vector.iter_mut().zip(&model.v0) {
        *acc += chi_sum * v;
    }
    SentenceEmbedding {
        vector,
        oov,
        empty: false,
    }
}

/// Cosine between two sentence embeddings.
pub fn similarity<S: AsRef<str>>(s1: &[S], s2: &[S], model: &ReembeddingModel) -> Result<f64> {
    let a = embed_sentence(s1, model).vector;
    let b = embed_sentence(s2, model).vector;
    tensor::cosine(&a, &b).ok_or(CasemError::ZeroEmbedding)
}

/// Largest `|⟨w′, v0⟩| / (|w′|·|v0|)` over the vocabulary.
pub fn max_orthogonality_error(model: &ReembeddingModel) -> f64 {
    let nv = tensor::norm(&model.v0);
    model
        .words
        .values()
        .map(|s| {
            let np = tensor::norm(&s.w_prime);
            if np == 0.0 || nv == 0.0 {
                0.0
            } else {
                dot(&s.w_prime, &model.v0).abs() / (np * nv)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
