//! Context-aware layers and recurrent baselines on top of [`autodiff`].
//!
//! Every layer follows the same decomposition: an output is a gated mix
//! `χ·v + (1 − χ)·w0` of a context-dependent head `v` and a default or
//! context-free vector `w0`. Batches are rows; weights are stored
//! `[in × out]` so a dense map is `x·W + b`.
//!
//! [`autodiff`]: crate::autodiff

mod att;
mod bsfe;
mod cann;
mod conv;
mod rnn;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{Graph, GraphError, Group, NodeId, ParamId, ParamStore};
use crate::tensor::TensorError;

pub use att::{AttScore, CaAtt, CaAttOutput};
pub use bsfe::{Bsfe, BsfeOutput};
pub use cann::{Cann, CannOutput, Cares, CaresConfig, CaresOutput, VHead};
pub use conv::{Cacnn, CacnnOutput, Conv2d};
pub use rnn::{CaRnn, CaRnnCellParams, CaRnnOutputParams, CaRnnStep, Gru, Lstm, RecurrentCell, RnnState};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("invalid layer configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, LayerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Linear => x,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => crate::autodiff::sigmoid(x),
            Activation::Linear => x,
        }
    }
}

/// `x·W + b` with optional activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        group: Group,
        rng: &mut R,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(LayerError::Config(format!("{name}: zero-sized dense layer")));
        }
        Ok(Self {
            w: store.add_weight(&format!("{name}/w"), &[inputs, outputs], group, rng)?,
            b: store.add_zeros(&format!("{name}/b"), &[outputs], group)?,
            activation,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let z = g.affine(x, self.w, self.b)?;
        Ok(self.activation.apply(g, z))
    }
}

/// `χ·v + (1 − χ)·w0` with `χ` broadcast over columns.
pub(crate) fn gate_mix(g: &mut Graph, chi: NodeId, v: NodeId, w0: NodeId) -> Result<NodeId> {
    let a = g.mul(chi, v)?;
    let inv = g.one_minus(chi);
    let b = g.mul(inv, w0)?;
    Ok(g.add(a, b)?)
}

/// Scalar-per-row sigmoid gate `σ(x·v + b)`.
pub(crate) fn scalar_gate(g: &mut Graph, x: NodeId, v: ParamId, b: ParamId) -> Result<NodeId> {
    let z = g.affine(x, v, b)?;
    Ok(g.sigmoid(z))
}
