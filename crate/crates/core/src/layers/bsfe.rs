use rand::Rng;

use super::{LayerError, Result};
use crate::autodiff::{Graph, Group, NodeId, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Bag-of-sparse-features embedding with a global context vector.
///
/// Each feature owns a value embedding `w′ ∈ ℝⁿ` (group EMBED) and a gate
/// embedding `w_σ ∈ ℝᵐ` (group CHI); `χ(w) = σ(θᵀw_σ)`. A bag embeds to
/// `v0·Σχ + Σ(1 − χ)·w′`. Unknown features behave as pure context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bsfe {
    pub vocab: usize,
    pub dim: usize,
    pub gate_dim: usize,
    pub w_prime: ParamId,
    pub w_sigma: ParamId,
    pub theta: ParamId,
    pub v0: ParamId,
}

#[derive(Debug, Clone)]
pub struct BsfeOutput {
    /// `[B × n]`.
    pub embedding: NodeId,
    /// `χ` of every known feature in bag order, `[T × 1]`; `None` if no bag
    /// has a known feature.
    pub chi: Option<NodeId>,
    /// Bags that were empty and embed to zero.
    pub empty: Vec<bool>,
}

impl Bsfe {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        vocab: usize,
        dim: usize,
        gate_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if vocab == 0 || dim == 0 || gate_dim == 0 {
            return Err(LayerError::Config(format!(
                "{name}: vocab {vocab}, n {dim}, m {gate_dim} must be positive"
            )));
        }
        Ok(Self {
            vocab,
            dim,
            gate_dim,
            w_prime: store.add_weight(&format!("{name}/w_prime"), &[vocab, dim], Group::Embed, rng)?,
            w_sigma: store.add_weight(&format!("{name}/w_sigma"), &[vocab, gate_dim], Group::Chi, rng)?,
            theta: store.add_weight(&format!("{name}/theta"), &[gate_dim, 1], Group::Chi, rng)?,
            v0: store.add_zeros(&format!("{name}/v0"), &[dim], Group::Other)?,
        })
    }

    /// Embeds a batch of bags; `None` entries are out-of-vocabulary features.
    pub fn forward(&self, g: &mut Graph, bags: &[Vec<Option<usize>>]) -> Result<BsfeOutput> {
        let b = bags.len();
        let mut rows = Vec::new();
        let mut segments = Vec::new();
        let mut oov = vec![0.0; b];
        for (i, bag) in bags.iter().enumerate() {
            for f in bag {
                match f {
                    Some(r) if *r < self.vocab => {
                        rows.push(*r);
                        segments.push(i);
                    }
                    Some(r) => {
                        return Err(LayerError::Config(format!(
                            "feature {r} outside vocabulary of {}",
                            self.vocab
                        )))
                    }
                    None => oov[i] += 1.0,
                }
            }
        }
        let empty = bags.iter().map(Vec::is_empty).collect();
        let v0 = g.param(self.v0);
        let oov_count = g.input(Tensor::matrix(b, 1, oov)?);

        if rows.is_empty() {
            let embedding = g.mul(oov_count, v0)?;
            return Ok(BsfeOutput {
                embedding,
                chi: None,
                empty,
            });
        }

        let wp_table = g.param(self.w_prime);
        let ws_table = g.param(self.w_sigma);
        let theta = g.param(self.theta);
        let wp = g.gather(wp_table, rows.clone())?;
        let ws = g.gather(ws_table, rows)?;
        let z = g.matmul(ws, theta)?;
        let chi = g.sigmoid(z);

        let chi_sum = g.segment_sum(chi, segments.clone(), b)?;
        let chi_total = g.add(chi_sum, oov_count)?;
        let context = g.mul(chi_total, v0)?;
        let inv = g.one_minus(chi);
        let weighted = g.mul(inv, wp)?;
        let sensitive = g.segment_sum(weighted, segments, b)?;
        let embedding = g.add(context, sensitive)?;
        Ok(BsfeOutput {
            embedding,
            chi: Some(chi),
            empty,
        })
    }
}
