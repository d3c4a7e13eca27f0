use rand::Rng;

use super::{gate_mix, scalar_gate, Activation, Dense, LayerError, Result};
use crate::autodiff::{Graph, Group, NodeId, ParamId, ParamStore};

/// Single context-aware layer `w = χ(c)·v(c) + (1 − χ(c))·w0` with
/// `χ(c) = σ(vᵀc + b)` and `v` a dense head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cann {
    pub inputs: usize,
    pub outputs: usize,
    pub head: Dense,
    pub gate_v: ParamId,
    pub gate_b: ParamId,
    pub w0: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CannOutput {
    pub output: NodeId,
    /// `[B × 1]`.
    pub chi: NodeId,
}

impl Cann {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let head = Dense::new(store, &format!("{name}/head"), inputs, outputs, activation, Group::Other, rng)?;
        Ok(Self {
            inputs,
            outputs,
            head,
            gate_v: store.add_weight(&format!("{name}/gate_v"), &[inputs, 1], Group::Other, rng)?,
            gate_b: store.add_zeros(&format!("{name}/gate_b"), &[1], Group::Other)?,
            w0: store.add_zeros(&format!("{name}/w0"), &[outputs], Group::Other)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, c: NodeId) -> Result<CannOutput> {
        let v = self.head.forward(g, c)?;
        let chi = scalar_gate(g, c, self.gate_v, self.gate_b)?;
        let w0 = g.param(self.w0);
        let output = gate_mix(g, chi, v, w0)?;
        Ok(CannOutput { output, chi })
    }
}

/// Form of the context-free head `v_l` of a CA-RES sublayer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VHead {
    /// Dense map of the concatenated context window.
    Dense,
    /// Sum of the context window; needs `input == width`.
    Additive,
}

/// `(l, n_v, n_σ, b)` plus sizes. Sublayer `k` sees `c` and the outputs of
/// up to `n_v` (head) or `n_σ` (gate) sublayers directly below it.
#[derive(Debug, Clone, PartialEq)]
pub struct CaresConfig {
    pub layers: usize,
    pub n_v: usize,
    pub n_sigma: usize,
    /// Gate fixed at 1: no gate parameters, no default vector.
    pub bypass: bool,
    pub input: usize,
    pub width: usize,
    pub activation: Activation,
    /// One per sublayer; empty means all [`VHead::Dense`].
    pub heads: Vec<VHead>,
}

impl CaresConfig {
    pub fn new(layers: usize, n_v: usize, n_sigma: usize, bypass: bool, input: usize, width: usize) -> Self {
        Self {
            layers,
            n_v,
            n_sigma,
            bypass,
            input,
            width,
            activation: Activation::Tanh,
            heads: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LayerError::Config(m));
        if self.layers == 0 || self.input == 0 || self.width == 0 {
            return bad("CA-RES needs at least one sublayer and positive sizes".into());
        }
        for (what, n) in [("n_v", self.n_v), ("n_sigma", self.n_sigma)] {
            if n == 0 || n > self.layers {
                return bad(format!("{what} = {n} outside 1..={}", self.layers));
            }
        }
        if !self.heads.is_empty() && self.heads.len() != self.layers {
            return bad(format!("{} heads for {} sublayers", self.heads.len(), self.layers));
        }
        for (k, h) in self.heads.iter().enumerate() {
            if *h == VHead::Additive && (k == 0 || self.input != self.width) {
                return bad(format!("sublayer {k}: additive head needs lower outputs and input == width"));
            }
        }
        Ok(())
    }

    fn head(&self, k: usize) -> VHead {
        self.heads.get(k).copied().unwrap_or(VHead::Dense)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sublayer {
    head: Option<Dense>,
    gate: Option<(ParamId, ParamId, ParamId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cares {
    pub config: CaresConfig,
    sublayers: Vec<Sublayer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaresOutput {
    /// `w_1 … w_l`; the last entry is the layer output.
    pub outputs: Vec<NodeId>,
    /// Gate per sublayer, `None` when bypassed.
    pub chi: Vec<Option<NodeId>>,
}

impl CaresOutput {
    pub fn last(&self) -> NodeId {
        *self.outputs.last().expect("at least one sublayer")
    }
}

impl Cares {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, config: CaresConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut sublayers = Vec::with_capacity(config.layers);
        for k in 0..config.layers {
            let v_in = config.input + config.width * k.min(config.n_v);
            let g_in = config.input + config.width * k.min(config.n_sigma);
            let head = match config.head(k) {
                VHead::Dense => Some(Dense::new(
                    store,
                    &format!("{name}/{k}/head"),
                    v_in,
                    config.width,
                    config.activation,
                    Group::Other,
                    rng,
                )?),
                VHead::Additive => None,
            };
            let gate = if config.bypass {
                None
            } else {
                Some((
                    store.add_weight(&format!("{name}/{k}/gate_v"), &[g_in, 1], Group::Other, rng)?,
                    store.add_zeros(&format!("{name}/{k}/gate_b"), &[1], Group::Other)?,
                    store.add_zeros(&format!("{name}/{k}/w0"), &[config.width], Group::Other)?,
                ))
            };
            sublayers.push(Sublayer { head, gate });
        }
        Ok(Self { config, sublayers })
    }

    pub fn forward(&self, g: &mut Graph, c: NodeId) -> Result<CaresOutput> {
        let mut outputs: Vec<NodeId> = Vec::with_capacity(self.sublayers.len());
        let mut chis = Vec::with_capacity(self.sublayers.len());
        for layer in &self.sublayers {
            let window = |n: usize| -> Vec<NodeId> {
                std::iter::once(c).chain(outputs.iter().rev().take(n).copied()).collect()
            };
            let v_parts = window(self.config.n_v);
            let v = match layer.head {
                Some(dense) => {
                    let x = g.concat(&v_parts)?;
                    dense.forward(g, x)?
                }
                None => {
                    let mut acc = v_parts[0];
                    for &p in &v_parts[1..] {
                        acc = g.add(acc, p)?;
                    }
                    acc
                }
            };
            let w = match layer.gate {
                None => {
                    chis.push(None);
                    v
                }
                Some((gv, gb, w0)) => {
                    let x = g.concat(&window(self.config.n_sigma))?;
                    let chi = scalar_gate(g, x, gv, gb)?;
                    chis.push(Some(chi));
                    let w0 = g.param(w0);
                    gate_mix(g, chi, v, w0)?
                }
            };
            outputs.push(w);
        }
        Ok(CaresOutput { outputs, chi: chis })
    }

    /// Head of sublayer `k`, if dense.
    pub fn head(&self, k: usize) -> Option<Dense> {
        self.sublayers.get(k).and_then(|s| s.head)
    }

    /// `(v, b, w0)` of sublayer `k`'s gate, if not bypassed.
    pub fn gate(&self, k: usize) -> Option<(ParamId, ParamId, ParamId)> {
        self.sublayers.get(k).and_then(|s| s.gate)
    }
}
