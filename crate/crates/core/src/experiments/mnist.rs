//! Single convolution layer + 128-unit hidden layer + softmax on MNIST-style
//! digits, with the convolution swapped between plain, gated and CA-RES
//! variants.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train_step, ExperimentError, MetricsLog, Result};
use crate::autodiff::{ConvGeometry, Graph, Group, GroupSet, NodeId, OptimizerState, ParamStore};
use crate::data::LabeledImageSet;
use crate::layers::{Activation, Cacnn, Cares, CaresConfig, Conv2d, Dense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvKind {
    Cnn,
    Cacnn,
    Cares,
}

impl fmt::Display for ConvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvKind::Cnn => "cnn",
            ConvKind::Cacnn => "cacnn",
            ConvKind::Cares => "cares",
        })
    }
}

impl FromStr for ConvKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ConvKind::Cnn),
            "cacnn" | "ca-cnn" => Ok(ConvKind::Cacnn),
            "cares" | "ca-res" => Ok(ConvKind::Cares),
            other => Err(ExperimentError::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistConfig {
    pub kind: ConvKind,
    pub kernel: usize,
    pub depth: usize,
    pub stride: usize,
    pub hidden: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Evaluate on the test set every this many steps (and at the end).
    pub eval_every: u64,
    /// Cap on test images used by periodic evaluations; the final one uses all.
    pub eval_limit: usize,
    /// Sublayers when `kind` is CA-RES.
    pub cares_layers: usize,
    pub seed: u64,
}

impl Default for MnistConfig {
    fn default() -> Self {
        Self {
            kind: ConvKind::Cacnn,
            kernel: 8,
            depth: 16,
            stride: 1,
            hidden: 128,
            steps: 10_000,
            batch_size: 16,
            learning_rate: 0.01,
            eval_every: 1000,
            eval_limit: 500,
            cares_layers: 2,
            seed: 0,
        }
    }
}

fn patch_geometry(cfg: &MnistConfig, rows: usize, cols: usize) -> Result<ConvGeometry> {
    if cfg.kernel > rows || cfg.kernel > cols {
        return Err(ExperimentError::Config(format!("kernel {} larger than {rows}×{cols} images", cfg.kernel)));
    }
    ConvGeometry::same(rows, cols, 1, cfg.kernel, cfg.stride).map_err(|e| ExperimentError::Config(e.to_string()))
}

#[derive(Debug, Clone)]
enum Front {
    Cnn(Conv2d),
    Cacnn(Cacnn),
    Cares { geom: ConvGeometry, layer: Cares },
}

/// Output of the convolutional front end.
struct FrontOut {
    features: NodeId,
    /// `[B × positions]` gate map, absent for the plain convolution.
    sigma: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct MnistModel {
    front: Front,
    hidden: Dense,
    logits: Dense,
    rows: usize,
    cols: usize,
}

impl MnistModel {
    pub fn new(store: &mut ParamStore, cfg: &MnistConfig, rows: usize, cols: usize) -> Result<Self> {
        if cfg.hidden == 0 || cfg.batch_size == 0 {
            return Err(ExperimentError::Config("hidden size and batch size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let shape = (rows, cols, 1);
        let act = Activation::Relu;
        let (front, features) = match cfg.kind {
            ConvKind::Cnn => {
                let c = Conv2d::new(store, "conv", shape, cfg.kernel, cfg.stride, cfg.depth, act, &mut rng)?;
                (Front::Cnn(c), c.output_len())
            }
            ConvKind::Cacnn => {
                let c = Cacnn::new(store, "conv", shape, cfg.kernel, cfg.stride, cfg.depth, act, &mut rng)?;
                (Front::Cacnn(c), c.output_len())
            }
            ConvKind::Cares => {
                let geom = patch_geometry(cfg, rows, cols)?;
                let mut rc = CaresConfig::new(cfg.cares_layers, 1, 1, false, geom.patch_len(), cfg.depth);
                rc.activation = act;
                let layer = Cares::new(store, "conv", rc, &mut rng)?;
                (Front::Cares { geom, layer }, geom.positions() * cfg.depth)
            }
        };
        let hidden = Dense::new(store, "hidden", features, cfg.hidden, Activation::Relu, Group::Other, &mut rng)?;
        let logits = Dense::new(store, "logits", cfg.hidden, 10, Activation::Linear, Group::Other, &mut rng)?;
        Ok(Self {
            front,
            hidden,
            logits,
            rows,
            cols,
        })
    }

    fn front(&self, g: &mut Graph, x: NodeId) -> Result<FrontOut> {
        Ok(match &self.front {
            Front::Cnn(c) => FrontOut {
                features: c.forward(g, x)?,
                sigma: None,
            },
            Front::Cacnn(c) => {
                let o = c.forward(g, x)?;
                FrontOut {
                    features: o.features,
                    sigma: Some(o.sigma_map),
                }
            }
            Front::Cares { geom, layer } => {
                let batch = g.value(x).rows();
                let patches = g.im2col(x, *geom)?;
                let out = layer.forward(g, patches)?;
                let width = layer.config.width;
                let features = g.reshape(out.last(), &[batch, geom.positions() * width])?;
                let sigma = match out.chi.last().copied().flatten() {
                    Some(chi) => Some(g.reshape(chi, &[batch, geom.positions()])?),
                    None => None,
                };
                FrontOut { features, sigma }
            }
        })
    }

    /// Logits `[B × 10]` and the gate map of the convolution, if any.
    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<(NodeId, Option<NodeId>)> {
        let f = self.front(g, x)?;
        let h = self.hidden.forward(g, f.features)?;
        Ok((self.logits.forward(g, h)?, f.sigma))
    }

    fn check(&self, data: &LabeledImageSet) -> Result<()> {
        if data.rows() != self.rows || data.cols() != self.cols {
            return Err(ExperimentError::Config(format!(
                "model expects {}×{} images, got {}×{}",
                self.rows,
                self.cols,
                data.rows(),
                data.cols()
            )));
        }
        Ok(())
    }

    /// Fraction of the first `limit` images classified correctly.
    pub fn accuracy(&self, store: &ParamStore, data: &LabeledImageSet, limit: usize) -> Result<f64> {
        self.check(data)?;
        let n = limit.min(data.len());
        if n == 0 {
            return Err(ExperimentError::Config("no images to evaluate".into()));
        }
        let mut correct = 0usize;
        let idx: Vec<usize> = (0..n).collect();
        for chunk in idx.chunks(100) {
            let (x, labels) = data.batch(chunk);
            let mut g = Graph::new(store);
            let xn = g.input(x);
            let (logits, _) = self.forward(&mut g, xn)?;
            let v = g.value(logits);
            for (i, &label) in labels.iter().enumerate() {
                let row = v.row(i);
                let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
                correct += usize::from(best == label);
            }
        }
        Ok(correct as f64 / n as f64)
    }

    /// Gate maps of the given images, one row-major `rows × cols` map each
    /// (stride 1) or the strided grid otherwise. `None` for the plain model.
    pub fn sigma_maps(&self, store: &ParamStore, data: &LabeledImageSet, indices: &[usize]) -> Result<Option<Vec<Vec<f64>>>> {
        self.check(data)?;
        if indices.is_empty() {
            return Ok(Some(Vec::new()));
        }
        let (x, _) = data.batch(indices);
        let mut g = Graph::new(store);
        let xn = g.input(x);
        let f = self.front(&mut g, xn)?;
        Ok(f.sigma.map(|s| {
            let v = g.value(s);
            (0..indices.len()).map(|i| v.row(i).to_vec()).collect()
        }))
    }
}

/// Mean gate value on ink pixels (≥ 0.5) minus that on blank pixels (= 0),
/// for one image and its same-sized map. `None` if either set is empty.
pub fn ink_background_gap(image: &[f64], map: &[f64]) -> Option<f64> {
    if image.len() != map.len() {
        return None;
    }
    let (mut ink, mut ni, mut bg, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for (&p, &s) in image.iter().zip(map) {
        if p >= 0.5 {
            ink += s;
            ni += 1;
        } else if p == 0.0 {
            bg += s;
            nb += 1;
        }
    }
    (ni > 0 && nb > 0).then(|| ink / ni as f64 - bg / nb as f64)
}

#[derive(Debug, Clone)]
pub struct MnistReport {
    pub config: MnistConfig,
    pub metrics: MetricsLog,
    pub initial_accuracy: f64,
    /// Accuracy on the whole test set after the last step.
    pub final_accuracy: f64,
    /// Mean ink-minus-background gate gap over the sampled test digits.
    pub sigma_gap: Option<f64>,
    /// Gate maps of the first sampled test digits.
    pub sigma_maps: Vec<Vec<f64>>,
    pub map_shape: (usize, usize),
}

/// Trains and evaluates one model. `sigma_digits` test images feed the gate
/// statistics; `keep_maps` of them are returned for dumping.
pub fn train_mnist(
    cfg: &MnistConfig,
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    sigma_digits: usize,
    keep_maps: usize,
) -> Result<MnistReport> {
    if train.is_empty() || test.is_empty() {
        return Err(ExperimentError::Config("empty MNIST split".into()));
    }
    let mut store = ParamStore::new();
    let model = MnistModel::new(&mut store, cfg, train.rows(), train.cols())?;
    model.check(train)?;
    let mut metrics = MetricsLog::new();
    let initial_accuracy = model.accuracy(&store, test, cfg.eval_limit)?;
    metrics.push(0, "test_accuracy", initial_accuracy);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d6e_6973_74);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut opt = OptimizerState::new(cfg.learning_rate);
    let mut running = 0.0;
    let mut since = 0u64;
    for step in 1..=cfg.steps {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let take = cfg.batch_size.min(order.len());
        let (x, labels) = train.batch(&order[cursor..cursor + take]);
        cursor += take;
        let loss = train_step(&mut store, &mut opt, GroupSet::ALL, |g| {
            let xn = g.input(x);
            let (logits, _) = model.forward(g, xn)?;
            Ok(g.softmax_cross_entropy(logits, labels)?)
        })?;
        running += loss;
        since += 1;
        if step % cfg.eval_every.max(1) == 0 && step != cfg.steps {
            metrics.push(step, "train_loss", running / since as f64);
            let acc = model.accuracy(&store, test, cfg.eval_limit)?;
            log::info!("{} step {step}: loss {:.4} accuracy {acc:.4}", cfg.kind, running / since as f64);
            metrics.push(step, "test_accuracy", acc);
            running = 0.0;
            since = 0;
        }
    }
    if since > 0 {
        metrics.push(cfg.steps, "train_loss", running / since as f64);
    }
    let final_accuracy = model.accuracy(&store, test, test.len())?;
    metrics.push(cfg.steps, "test_accuracy", final_accuracy);

    let idx: Vec<usize> = (0..sigma_digits.min(test.len())).collect();
    let (sigma_gap, sigma_maps) = match model.sigma_maps(&store, test, &idx)? {
        Some(maps) => {
            let gaps: Vec<f64> = idx
                .iter()
                .zip(&maps)
                .filter_map(|(&i, m)| ink_background_gap(test.image(i), m))
                .collect();
            let gap = (!gaps.is_empty()).then(|| super::mean(&gaps));
            if let Some(g) = gap {
                metrics.push(cfg.steps, "sigma_gap", g);
            }
            (gap, maps.into_iter().take(keep_maps).collect())
        }
        None => (None, Vec::new()),
    };
    let map_shape = (train.rows().div_ceil(cfg.stride), train.cols().div_ceil(cfg.stride));

    Ok(MnistReport {
        config: cfg.clone(),
        metrics,
        initial_accuracy,
        final_accuracy,
        sigma_gap,
        sigma_maps,
        map_shape,
    })
}
