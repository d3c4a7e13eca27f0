//! Tiny sentiment task for comparing recurrent cells: two training
//! sentences, two held-out sentences that reuse the training words.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mean, train_step, ExperimentError, MetricsLog, Result};
use crate::autodiff::{sigmoid, Graph, Group, GroupSet, NodeId, OptimizerState, ParamId, ParamStore};
use crate::layers::{Activation, CaRnn, Dense, Gru, Lstm, RecurrentCell};
use crate::tensor::Tensor;

pub const VOCAB: [&str; 8] = ["i", "am", "happy", "you", "are", "very", "angry", "look"];

pub const TRAIN: [(&[&str], f64); 2] = [(&["i", "am", "happy"], 1.0), (&["you", "are", "very", "angry"], 0.0)];

pub const TEST: [(&[&str], f64); 2] = [(&["i", "am", "very", "happy"], 1.0), (&["you", "look", "angry"], 0.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Lstm,
    Gru,
    CaRnn,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Lstm, CellKind::Gru, CellKind::CaRnn];
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::CaRnn => "carnn",
        })
    }
}

impl FromStr for CellKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            "carnn" | "ca-rnn" => Ok(CellKind::CaRnn),
            other => Err(ExperimentError::Config(format!("unknown cell `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnBenchConfig {
    pub embed_dim: usize,
    /// Word vectors start uniform in `[−embed_scale, embed_scale]`.
    pub embed_scale: f64,
    pub hidden: usize,
    pub iterations: u64,
    pub learning_rate: f64,
    pub runs: u64,
    pub seed: u64,
}

impl Default for RnnBenchConfig {
    fn default() -> Self {
        Self {
            embed_dim: 8,
            embed_scale: 0.05,
            hidden: 8,
            iterations: 100,
            learning_rate: 0.1,
            runs: 10,
            seed: 0,
        }
    }
}

fn make_cell(kind: CellKind, store: &mut ParamStore, x: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Box<dyn RecurrentCell>> {
    Ok(match kind {
        CellKind::Lstm => Box::new(Lstm::new(store, "cell", x, h, rng)?),
        CellKind::Gru => Box::new(Gru::new(store, "cell", x, h, rng)?),
        CellKind::CaRnn => Box::new(CaRnn::new(store, "cell", x, h, rng)?),
    })
}

struct Model {
    embed: ParamId,
    cell: Box<dyn RecurrentCell>,
    head: Dense,
}

impl Model {
    fn new(kind: CellKind, cfg: &RnnBenchConfig, seed: u64) -> Result<(ParamStore, Self)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let table = Tensor::uniform(&[VOCAB.len(), cfg.embed_dim], -cfg.embed_scale, cfg.embed_scale, &mut rng);
        let embed = store.add("embed", table, Group::Embed)?;
        let cell = make_cell(kind, &mut store, cfg.embed_dim, cfg.hidden, &mut rng)?;
        let head = Dense::new(&mut store, "head", cfg.hidden, 1, Activation::Linear, Group::Other, &mut rng)?;
        Ok((store, Self { embed, cell, head }))
    }

    /// Logit `[1 × 1]` read from the final cell state.
    fn logit(&self, g: &mut Graph, words: &[&str]) -> Result<NodeId> {
        let table = g.param(self.embed);
        let mut xs = Vec::with_capacity(words.len());
        for w in words {
            let i = VOCAB
                .iter()
                .position(|v| v == w)
                .ok_or_else(|| ExperimentError::Config(format!("word `{w}` not in vocabulary")))?;
            xs.push(g.gather(table, vec![i])?);
        }
        let states = self.cell.unroll(g, &xs)?;
        let last = states.last().ok_or_else(|| ExperimentError::Config("empty sentence".into()))?;
        Ok(self.head.forward(g, last.c)?)
    }

    fn predict(&self, store: &ParamStore, words: &[&str]) -> Result<f64> {
        let mut g = Graph::new(store);
        let z = self.logit(&mut g, words)?;
        Ok(sigmoid(g.value(z).data()[0]))
    }
}

#[derive(Debug, Clone)]
pub struct RnnRun {
    pub losses: Vec<f64>,
    /// Probabilities for the held-out sentences.
    pub predictions: Vec<f64>,
    /// Mean `|p − target|` over the held-out sentences.
    pub error: f64,
    /// Fraction of held-out sentences on the wrong side of 0.5.
    pub misclassified: f64,
}

pub fn run_once(kind: CellKind, cfg: &RnnBenchConfig, seed: u64) -> Result<RnnRun> {
    let (mut store, model) = Model::new(kind, cfg, seed)?;
    let mut opt = OptimizerState::new(cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.iterations as usize);
    for _ in 0..cfg.iterations {
        let loss = train_step(&mut store, &mut opt, GroupSet::ALL, |g| {
            let mut total: Option<NodeId> = None;
            for (words, target) in TRAIN {
                let z = model.logit(g, words)?;
                let t = g.input(Tensor::matrix(1, 1, vec![target])?);
                let l = g.sigmoid_cross_entropy(z, t)?;
                total = Some(match total {
                    Some(acc) => g.add(acc, l)?,
                    None => l,
                });
            }
            let sum = total.expect("training set is not empty");
            let half = g.constant(0.5);
            Ok(g.mul(sum, half)?)
        })?;
        losses.push(loss);
    }
    let mut predictions = Vec::with_capacity(TEST.len());
    let (mut err, mut wrong) = (0.0, 0.0);
    for (words, target) in TEST {
        let p = model.predict(&store, words)?;
        err += (p - target).abs();
        if (p >= 0.5) != (target >= 0.5) {
            wrong += 1.0;
        }
        predictions.push(p);
    }
    let n = TEST.len() as f64;
    Ok(RnnRun {
        losses,
        predictions,
        error: err / n,
        misclassified: wrong / n,
    })
}

#[derive(Debug, Clone)]
pub struct RnnBenchReport {
    pub cell: CellKind,
    pub runs: Vec<RnnRun>,
    pub mean_error: f64,
    pub mean_misclassified: f64,
    /// Training loss averaged over runs, per iteration.
    pub mean_losses: Vec<f64>,
}

impl RnnBenchReport {
    pub fn metrics(&self) -> MetricsLog {
        let mut log = MetricsLog::new();
        for (i, l) in self.mean_losses.iter().enumerate() {
            log.push(i as u64 + 1, "train_loss", *l);
        }
        let last = self.mean_losses.len() as u64;
        log.push(last, "test_error", self.mean_error);
        log.push(last, "test_misclassified", self.mean_misclassified);
        log
    }
}

/// Runs `cfg.runs` seeds `cfg.seed, cfg.seed + 1, …` for one cell.
pub fn bench(kind: CellKind, cfg: &RnnBenchConfig) -> Result<RnnBenchReport> {
    if cfg.runs == 0 {
        return Err(ExperimentError::Config("need at least one run".into()));
    }
    let runs = (0..cfg.runs)
        .map(|r| run_once(kind, cfg, cfg.seed + r))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
    let wrong: Vec<f64> = runs.iter().map(|r| r.misclassified).collect();
    let mean_losses = (0..cfg.iterations as usize)
        .map(|i| mean(&runs.iter().map(|r| r.losses[i]).collect::<Vec<_>>()))
        .collect();
    Ok(RnnBenchReport {
        cell: kind,
        mean_error: mean(&errors),
        mean_misclassified: mean(&wrong),
        mean_losses,
        runs,
    })
}
