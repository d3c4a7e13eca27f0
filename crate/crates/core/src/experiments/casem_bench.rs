//! Synthetic word-embedding worlds for the sentence re-embedding solver.
//!
//! Every word vector is a topic part plus a share of one common direction;
//! stopwords sit almost entirely on the common direction with their own
//! idiosyncratic noise and appear in every sentence. Gold pair similarity is
//! the cosine of the two sentences' topic mixtures, so a method scores well
//! exactly when it suppresses the common part and the stopword noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mean, Result};
use crate::casem::{embed_sentence, evaluate_pairs, run_casem_with, average_embedding, CasemConfig, Corpus, PcaRemoval, ReembeddingModel};
use crate::data::{EmbeddingTable, SentencePair, SentencePairSet};
use crate::tensor::{cosine, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub dim: usize,
    /// Total vocabulary, stopwords included.
    pub vocab: usize,
    pub stopwords: usize,
    pub topics: usize,
    /// Length of the common direction in stopword vectors.
    pub stop_common: f64,
    /// Length of the per-stopword noise.
    pub stop_noise: f64,
    /// Length of the common direction in content-word vectors.
    pub content_common: f64,
    /// Length of the per-word noise added to content words.
    pub content_noise: f64,
    pub content_len: (usize, usize),
    pub stops_per_sentence: (usize, usize),
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            vocab: 300,
            stopwords: 10,
            topics: 10,
            stop_common: 3.0,
            stop_noise: 2.0,
            content_common: 0.3,
            content_noise: 0.5,
            content_len: (4, 8),
            stops_per_sentence: (2, 6),
            seed: 0,
        }
    }
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn axpy(acc: &mut [f64], k: f64, x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += k * b);
}

/// Embedding table plus the generative structure behind it.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub embeddings: EmbeddingTable,
    pub common: Vec<f64>,
    pub stopwords: Vec<String>,
    /// Content words grouped by topic.
    pub topic_words: Vec<Vec<String>>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        if config.stopwords >= config.vocab || config.topics == 0 || config.dim == 0 {
            return Err(super::ExperimentError::Config("degenerate synthetic vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.dim;
        let common = random_unit(d, &mut rng);
        let topics: Vec<Vec<f64>> = (0..config.topics).map(|_| random_unit(d, &mut rng)).collect();
        let mut embeddings = EmbeddingTable::new(d);
        let mut stopwords = Vec::with_capacity(config.stopwords);
        for i in 0..config.stopwords {
            let name = format!("stop{i}");
            let mut w = vec![0.0; d];
            axpy(&mut w, config.stop_common, &common);
            axpy(&mut w, config.stop_noise, &random_unit(d, &mut rng));
            embeddings.insert(&name, &w)?;
            stopwords.push(name);
        }
        let mut topic_words = vec![Vec::new(); config.topics];
        for i in 0..config.vocab - config.stopwords {
            let k = i % config.topics;
            let name = format!("t{k}w{i}");
            let mut w = topics[k].clone();
            axpy(&mut w, config.content_common, &common);
            axpy(&mut w, config.content_noise, &random_unit(d, &mut rng));
            embeddings.insert(&name, &w)?;
            topic_words[k].push(name);
        }
        Ok(Self {
            config,
            embeddings,
            common,
            stopwords,
            topic_words,
            rng,
        })
    }

    /// Random nonnegative topic mixture on two or three topics, unit norm.
    pub fn random_mixture(&mut self) -> Vec<f64> {
        let k = self.config.topics;
        let mut theta = vec![0.0; k];
        let active = self.rng.gen_range(2..=3).min(k);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut self.rng);
        for &t in &order[..active] {
            theta[t] = self.rng.gen_range(0.1..1.0);
        }
        let n = norm(&theta);
        theta.iter_mut().for_each(|x| *x /= n);
        theta
    }

    /// Content words drawn from `theta` with stopwords spliced in.
    pub fn sentence(&mut self, theta: &[f64]) -> Vec<String> {
        let (lo, hi) = self.config.content_len;
        let len = self.rng.gen_range(lo..=hi);
        let total: f64 = theta.iter().sum();
        let mut words = Vec::with_capacity(len + self.config.stops_per_sentence.1);
        for _ in 0..len {
            let mut u = self.rng.gen_range(0.0..total);
            let mut k = 0;
            while k + 1 < theta.len() && u >= theta[k] {
                u -= theta[k];
                k += 1;
            }
            let pool = &self.topic_words[k];
            words.push(pool[self.rng.gen_range(0..pool.len())].clone());
        }
        let (slo, shi) = self.config.stops_per_sentence;
        for _ in 0..self.rng.gen_range(slo..=shi) {
            let s = self.stopwords[self.rng.gen_range(0..self.stopwords.len())].clone();
            let at = self.rng.gen_range(0..=words.len());
            words.insert(at, s);
        }
        words
    }

    pub fn corpus(&mut self, sentences: usize) -> Vec<Vec<String>> {
        (0..sentences)
            .map(|_| {
                let theta = self.random_mixture();
                self.sentence(&theta)
            })
            .collect()
    }

    /// Pairs whose second mixture interpolates between the first and a fresh
    /// one; the gold score is `5·cos(θa, θb)`.
    pub fn pairs(&mut self, count: usize) -> SentencePairSet {
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let ta = self.random_mixture();
            let fresh = self.random_mixture();
            let lambda: f64 = self.rng.gen_range(0.0..1.0);
            let tb: Vec<f64> = ta.iter().zip(&fresh).map(|(a, f)| lambda * a + (1.0 - lambda) * f).collect();
            let score = 5.0 * cosine(&ta, &tb).unwrap_or(0.0).clamp(0.0, 1.0);
            let a = self.sentence(&ta);
            let b = self.sentence(&tb);
            records.push(SentencePair { score, a, b });
        }
        SentencePairSet { records, skipped: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub model: ReembeddingModel,
    pub initial: f64,
    pub last: f64,
}

impl EnergyReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.model.energy_trace.windows(2).all(|w| w[1] < w[0])
    }

    pub fn ratio(&self) -> f64 {
        self.last / self.initial
    }
}

/// Runs the solver on a fresh synthetic corpus.
pub fn energy_run(config: WorldConfig, sentences: usize, casem: &CasemConfig) -> Result<EnergyReport> {
    let mut world = World::new(config)?;
    let corpus = Corpus::new(world.corpus(sentences));
    let model = run_casem_with(&corpus, &world.embeddings, casem)?;
    let initial = model.energy_trace[0];
    let last = *model.energy_trace.last().expect("trace holds the initial energy");
    Ok(EnergyReport { model, initial, last })
}

/// Pearson×100 of the three sentence embeddings on one synthetic pair set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScores {
    pub casem: f64,
    pub pca: f64,
    pub average: f64,
}

pub fn similarity_run(config: WorldConfig, pairs: usize, casem: &CasemConfig) -> Result<SimilarityScores> {
    let mut world = World::new(config)?;
    let set = world.pairs(pairs);
    let sentences = set.sentences();
    let emb = &world.embeddings;
    let model = run_casem_with(&Corpus::new(sentences.clone()), emb, casem)?;
    let pca = PcaRemoval::fit(&sentences, emb, casem.power_iters, casem.seed)?;
    Ok(SimilarityScores {
        casem: evaluate_pairs(&set, |s| Some(embed_sentence(s, &model).vector))?.pearson100,
        pca: evaluate_pairs(&set, |s| pca.embed(s, emb))?.pearson100,
        average: evaluate_pairs(&set, |s| average_embedding(s, emb))?.pearson100,
    })
}

#[derive(Debug, Clone)]
pub struct SimilarityReport {
    pub per_seed: Vec<SimilarityScores>,
    pub mean: SimilarityScores,
}

/// [`similarity_run`] over seeds `base.seed, base.seed + 1, …`.
pub fn similarity_bench(base: &WorldConfig, pairs: usize, seeds: u64, max_iters: usize) -> Result<SimilarityReport> {
    let per_seed = (0..seeds)
        .map(|s| {
            let cfg = WorldConfig {
                seed: base.seed + s,
                ..base.clone()
            };
            let casem = CasemConfig {
                max_iters,
                seed: base.seed + s,
                ..CasemConfig::default()
            };
            similarity_run(cfg, pairs, &casem)
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&SimilarityScores) -> f64| mean(&per_seed.iter().map(f).collect::<Vec<_>>());
    let mean = SimilarityScores {
        casem: pick(|s| s.casem),
        pca: pick(|s| s.pca),
        average: pick(|s| s.average),
    };
    Ok(SimilarityReport { per_seed, mean })
}
