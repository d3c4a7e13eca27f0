use rand::Rng;

use super::{LayerError, Result};
use crate::autodiff::{Graph, Group, NodeId, ParamId, ParamStore};
use crate::tensor::Tensor;

/// How the relevance logit of a memory item is scored against the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttScore {
    /// `w_gᵀsᵢ + u_gᵀc + b_g`.
    #[default]
    Sigmoid,
    /// Additive: `v_aᵀ tanh(W₁c + W₂sᵢ) + b_g` with a hidden width.
    Bahdanau { hidden: usize },
    /// Multiplicative: `cᵀW sᵢ + b_g`.
    Luong,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scorer {
    Sigmoid { w_g: ParamId, u_g: ParamId },
    Bahdanau { v_a: ParamId, w1: ParamId, w2: ParamId },
    Luong { w: ParamId },
}

/// Context-aware attention: memory items are summed, each replaced by the
/// query-dependent head `v(c) = tanh(W_h c + b_h)` in proportion to its
/// context-freeness `χ(sᵢ, c)`. There is no normalisation across items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaAtt {
    pub memory_dim: usize,
    pub query_dim: usize,
    pub w_h: ParamId,
    pub b_h: ParamId,
    pub b_g: ParamId,
    pub kind: AttScore,
    scorer: Scorer,
}

#[derive(Debug, Clone)]
pub struct CaAttOutput {
    /// `[1 × ds]`.
    pub output: NodeId,
    /// `χ` per memory item, `[n × 1]`.
    pub chi: NodeId,
    /// `v(c)`, `[1 × ds]`.
    pub head: NodeId,
}

impl CaAtt {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        memory_dim: usize,
        query_dim: usize,
        score: AttScore,
        rng: &mut R,
    ) -> Result<Self> {
        if memory_dim == 0 || query_dim == 0 || score == (AttScore::Bahdanau { hidden: 0 }) {
            return Err(LayerError::Config(format!("{name}: zero-sized attention")));
        }
        let p = |s: &str| format!("{name}/{s}");
        let (ds, dc) = (memory_dim, query_dim);
        let scorer = match score {
            AttScore::Sigmoid => Scorer::Sigmoid {
                w_g: store.add_weight(&p("w_g"), &[ds, 1], Group::Other, rng)?,
                u_g: store.add_weight(&p("u_g"), &[dc, 1], Group::Other, rng)?,
            },
            AttScore::Bahdanau { hidden } => Scorer::Bahdanau {
                v_a: store.add_weight(&p("v_a"), &[hidden, 1], Group::Other, rng)?,
                w1: store.add_weight(&p("w1"), &[dc, hidden], Group::Other, rng)?,
                w2: store.add_weight(&p("w2"), &[ds, hidden], Group::Other, rng)?,
            },
            AttScore::Luong => Scorer::Luong {
                w: store.add_weight(&p("w"), &[dc, ds], Group::Other, rng)?,
            },
        };
        Ok(Self {
            memory_dim,
            query_dim,
            w_h: store.add_weight(&p("w_h"), &[dc, ds], Group::Other, rng)?,
            b_h: store.add_zeros(&p("b_h"), &[ds], Group::Other)?,
            b_g: store.add_zeros(&p("b_g"), &[1], Group::Other)?,
            kind: score,
            scorer,
        })
    }

    /// `memory` is `[n × ds]`, `query` is `[1 × dc]`.
    pub fn forward(&self, g: &mut Graph, memory: NodeId, query: NodeId) -> Result<CaAttOutput> {
        let (n, ds) = g.value(memory).dims2();
        if ds != self.memory_dim {
            return Err(LayerError::Config(format!(
                "memory items have {ds} features, expected {}",
                self.memory_dim
            )));
        }
        let head = g.affine(query, self.w_h, self.b_h)?;
        let head = g.tanh(head);

        let logits = match self.scorer {
            Scorer::Sigmoid { w_g, u_g } => {
                let (wg, ug) = (g.param(w_g), g.param(u_g));
                let s = g.matmul(memory, wg)?;
                let q = g.matmul(query, ug)?;
                g.add(s, q)?
            }
            Scorer::Bahdanau { v_a, w1, w2 } => {
                let (va, w1, w2) = (g.param(v_a), g.param(w1), g.param(w2));
                let q = g.matmul(query, w1)?;
                let s = g.matmul(memory, w2)?;
                let h = g.add(s, q)?;
                let h = g.tanh(h);
                g.matmul(h, va)?
            }
            Scorer::Luong { w } => {
                let w = g.param(w);
                let q = g.matmul(query, w)?;
                let prod = g.mul(memory, q)?;
                let ones = g.input(Tensor::filled(&[self.memory_dim, 1], 1.0));
                g.matmul(prod, ones)?
            }
        };
        let bg = g.param(self.b_g);
        let logits = g.add(logits, bg)?;
        let chi = g.sigmoid(logits);

        let ones = g.input(Tensor::filled(&[1, n], 1.0));
        let chi_total = g.matmul(ones, chi)?;
        let context = g.mul(chi_total, head)?;
        let inv = g.one_minus(chi);
        let kept = g.mul(inv, memory)?;
        let kept = g.matmul(ones, kept)?;
        let output = g.add(context, kept)?;
        Ok(CaAttOutput { output, chi, head })
    }
}
