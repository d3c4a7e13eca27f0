//! Small bag-of-features sentiment task for the alternating update schedule.
//!
//! A handful of polar words decide the label; every bag also carries many
//! neutral words drawn from the rest of the vocabulary. With few training
//! bags the neutral words are easy to memorize, which is what the schedule
//! is meant to counter.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mean, train_step, ExperimentError, MetricsLog, Result};
use crate::autodiff::{coordinate_schedule, sigmoid, Graph, Group, NodeId, OptimizerState, ParamStore};
use crate::layers::{Activation, Bsfe, Dense};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct BagTaskConfig {
    pub vocab: usize,
    /// Polar words per class.
    pub polar: usize,
    pub neutral_per_bag: (usize, usize),
    pub polar_per_bag: (usize, usize),
    /// Probability that a training label is flipped.
    pub label_noise: f64,
    pub train: usize,
    pub test: usize,
    pub dim: usize,
    pub gate_dim: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub em_steps: u64,
    pub eval_every: u64,
    pub seed: u64,
}

impl Default for BagTaskConfig {
    fn default() -> Self {
        Self {
            vocab: 300,
            polar: 10,
            neutral_per_bag: (6, 12),
            polar_per_bag: (1, 2),
            label_noise: 0.1,
            train: 200,
            test: 1000,
            dim: 5,
            gate_dim: 5,
            steps: 2000,
            batch_size: 16,
            learning_rate: 0.1,
            em_steps: 0,
            eval_every: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub features: Vec<usize>,
    pub label: f64,
}

/// Words `0..polar` are positive, `polar..2·polar` negative, the rest neutral.
pub fn make_bags(cfg: &BagTaskConfig, count: usize, noisy: bool, rng: &mut ChaCha8Rng) -> Result<Vec<Bag>> {
    if cfg.vocab <= 2 * cfg.polar || cfg.polar == 0 {
        return Err(ExperimentError::Config("vocabulary must hold both polar sets and neutral words".into()));
    }
    let mut bags = Vec::with_capacity(count);
    for _ in 0..count {
        let positive = rng.gen_bool(0.5);
        let base = if positive { 0 } else { cfg.polar };
        let mut features = Vec::new();
        for _ in 0..rng.gen_range(cfg.polar_per_bag.0..=cfg.polar_per_bag.1) {
            features.push(base + rng.gen_range(0..cfg.polar));
        }
        for _ in 0..rng.gen_range(cfg.neutral_per_bag.0..=cfg.neutral_per_bag.1) {
            features.push(rng.gen_range(2 * cfg.polar..cfg.vocab));
        }
        features.shuffle(rng);
        let mut label = if positive { 1.0 } else { 0.0 };
        if noisy && rng.gen_bool(cfg.label_noise) {
            label = 1.0 - label;
        }
        bags.push(Bag { features, label });
    }
    Ok(bags)
}

struct Model {
    bsfe: Bsfe,
    head: Dense,
}

impl Model {
    fn logits(&self, g: &mut Graph, bags: &[&Bag]) -> Result<NodeId> {
        let feats: Vec<Vec<Option<usize>>> = bags.iter().map(|b| b.features.iter().map(|&f| Some(f)).collect()).collect();
        let out = self.bsfe.forward(g, &feats)?;
        Ok(self.head.forward(g, out.embedding)?)
    }

    fn accuracy(&self, store: &ParamStore, bags: &[Bag]) -> Result<f64> {
        let mut correct = 0usize;
        for chunk in bags.chunks(256) {
            let refs: Vec<&Bag> = chunk.iter().collect();
            let mut g = Graph::new(store);
            let z = self.logits(&mut g, &refs)?;
            let v = g.value(z);
            for (i, b) in chunk.iter().enumerate() {
                let p = sigmoid(v.data()[i]);
                correct += usize::from((p >= 0.5) == (b.label >= 0.5));
            }
        }
        Ok(correct as f64 / bags.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct BagTaskReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub metrics: MetricsLog,
}

pub fn run_bag_task(cfg: &BagTaskConfig) -> Result<BagTaskReport> {
    if cfg.batch_size == 0 || cfg.train == 0 || cfg.test == 0 {
        return Err(ExperimentError::Config("batch, train and test sizes must be positive".into()));
    }
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = make_bags(cfg, cfg.train, true, &mut data_rng)?;
    let test = make_bags(cfg, cfg.test, false, &mut data_rng)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut store = ParamStore::new();
    let model = Model {
        bsfe: Bsfe::new(&mut store, "bsfe", cfg.vocab, cfg.dim, cfg.gate_dim, &mut rng)?,
        head: Dense::new(&mut store, "head", cfg.dim, 1, Activation::Linear, Group::Other, &mut rng)?,
    };
    let mut opt = OptimizerState::new(cfg.learning_rate);
    let mut metrics = MetricsLog::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    for step in 0..cfg.steps {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let take = cfg.batch_size.min(order.len());
        let batch: Vec<&Bag> = order[cursor..cursor + take].iter().map(|&i| &train[i]).collect();
        cursor += take;
        let targets = Tensor::matrix(batch.len(), 1, batch.iter().map(|b| b.label).collect())?;
        let active = coordinate_schedule(step, cfg.em_steps);
        let loss = train_step(&mut store, &mut opt, active, |g| {
            let z = model.logits(g, &batch)?;
            let t = g.input(targets);
            Ok(g.sigmoid_cross_entropy(z, t)?)
        })?;
        let done = step + 1;
        if done % cfg.eval_every.max(1) == 0 || done == cfg.steps {
            metrics.push(done, "train_loss", loss);
            metrics.push(done, "train_accuracy", model.accuracy(&store, &train)?);
            metrics.push(done, "test_accuracy", model.accuracy(&store, &test)?);
        }
    }
    Ok(BagTaskReport {
        train_accuracy: model.accuracy(&store, &train)?,
        test_accuracy: model.accuracy(&store, &test)?,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct ScheduleComparison {
    /// `(alternating, joint)` final test accuracy per seed.
    pub per_seed: Vec<(f64, f64)>,
    pub alternating: f64,
    pub joint: f64,
}

/// Final test accuracy with `em_steps` against plain joint updates, over
/// seeds `base.seed, base.seed + 1, …`.
pub fn compare_schedules(base: &BagTaskConfig, em_steps: u64, seeds: u64) -> Result<ScheduleComparison> {
    let mut per_seed = Vec::with_capacity(seeds as usize);
    for s in 0..seeds {
        let run = |em| {
            run_bag_task(&BagTaskConfig {
                em_steps: em,
                seed: base.seed + s,
                ..base.clone()
            })
        };
        per_seed.push((run(em_steps)?.test_accuracy, run(0)?.test_accuracy));
    }
    Ok(ScheduleComparison {
        alternating: mean(&per_seed.iter().map(|p| p.0).collect::<Vec<_>>()),
        joint: mean(&per_seed.iter().map(|p| p.1).collect::<Vec<_>>()),
        per_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bags_hold_one_polarity_and_neutral_words() {
        let cfg = BagTaskConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for b in make_bags(&cfg, 200, false, &mut rng).unwrap() {
            let pos = b.features.iter().filter(|&&f| f < cfg.polar).count();
            let neg = b.features.iter().filter(|&&f| (cfg.polar..2 * cfg.polar).contains(&f)).count();
            assert!(pos == 0 || neg == 0);
            assert_eq!(b.label == 1.0, pos > 0);
            assert!(b.features.len() >= 7);
        }
    }

    #[test]
    fn task_is_learnable() {
        let cfg = BagTaskConfig {
            steps: 400,
            label_noise: 0.0,
            ..BagTaskConfig::default()
        };
        let r = run_bag_task(&cfg).unwrap();
        assert!(r.train_accuracy > 0.9, "{}", r.train_accuracy);
        assert!(r.test_accuracy > 0.6, "{}", r.test_accuracy);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = BagTaskConfig {
            steps: 30,
            em_steps: 10,
            ..BagTaskConfig::default()
        };
        let a = run_bag_task(&cfg).unwrap();
        let b = run_bag_task(&cfg).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn zero_batch_is_rejected() {
        let cfg = BagTaskConfig {
            batch_size: 0,
            ..BagTaskConfig::default()
        };
        assert!(run_bag_task(&cfg).is_err());
    }
}
