//! Desk-scale experiment drivers shared by the CLI and the acceptance suite.
//!
//! Every driver is deterministic given its seed and returns plain report
//! structs; writing files is left to the caller except for [`MetricsLog`]
//! and [`write_pgm`] helpers.

pub mod bsfe_task;
pub mod casem_bench;
pub mod mnist;
mod metrics;
pub mod rnn_bench;
pub mod surface;

use thiserror::Error;

use crate::autodiff::{Graph, GraphError, GroupSet, NodeId, OptimizerState, ParamStore};
use crate::casem::CasemError;
use crate::data::DataError;
use crate::layers::LayerError;
use crate::tensor::TensorError;

pub use metrics::{write_pgm, MetricsLog};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Casem(#[from] CasemError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Builds a graph, backpropagates its scalar root and applies one optimizer
/// update to the `active` groups. Returns the loss.
pub fn train_step<F>(store: &mut ParamStore, opt: &mut OptimizerState, active: GroupSet, build: F) -> Result<f64>
where
    F: FnOnce(&mut Graph) -> Result<NodeId>,
{
    let (loss, grads) = {
        let mut g = Graph::new(store);
        let root = build(&mut g)?;
        (g.value(root).data()[0], g.backward(root)?)
    };
    opt.step(store, &grads, active);
    Ok(loss)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
