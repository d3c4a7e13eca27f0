use rand::Rng;

use super::{gate_mix, scalar_gate, Activation, LayerError, Result};
use crate::autodiff::{ConvGeometry, Graph, Group, NodeId, ParamId, ParamStore};

fn geometry(in_h: usize, in_w: usize, channels: usize, kernel: usize, stride: usize, depth: usize) -> Result<ConvGeometry> {
    if depth == 0 {
        return Err(LayerError::Config("convolution depth must be positive".into()));
    }
    if kernel > in_h || kernel > in_w {
        return Err(LayerError::Config(format!(
            "kernel {kernel} larger than the {in_h}×{in_w} input"
        )));
    }
    ConvGeometry::same(in_h, in_w, channels, kernel, stride).map_err(|_| {
        LayerError::Config(format!(
            "kernel {kernel} stride {stride} does not fit a {in_h}×{in_w}×{channels} input"
        ))
    })
}

/// Plain same-padded 2-D convolution over NHWC rows `[B × H·W·C]`,
/// producing `[B × H′·W′·depth]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv2d {
    pub geom: ConvGeometry,
    pub depth: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        (in_h, in_w, channels): (usize, usize, usize),
        kernel: usize,
        stride: usize,
        depth: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let geom = geometry(in_h, in_w, channels, kernel, stride, depth)?;
        Ok(Self {
            geom,
            depth,
            w: store.add_weight(&format!("{name}/w"), &[geom.patch_len(), depth], Group::Other, rng)?,
            b: store.add_zeros(&format!("{name}/b"), &[depth], Group::Other)?,
            activation,
        })
    }

    pub fn output_len(&self) -> usize {
        self.geom.positions() * self.depth
    }

    pub fn forward(&self, g: &mut Graph, input: NodeId) -> Result<NodeId> {
        let batch = g.value(input).rows();
        let patches = g.im2col(input, self.geom)?;
        let v = g.affine(patches, self.w, self.b)?;
        let v = self.activation.apply(g, v);
        Ok(g.reshape(v, &[batch, self.output_len()])?)
    }
}

/// Convolution with a per-patch scalar gate: each location outputs
/// `χ(p)·act(W p + b) + (1 − χ(p))·w0`, where `χ(p) = σ(gᵀp + b_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cacnn {
    pub conv: Conv2d,
    pub gate_v: ParamId,
    pub gate_b: ParamId,
    pub w0: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacnnOutput {
    /// `[B × H′·W′·depth]`.
    pub features: NodeId,
    /// `χ` per location, `[B × H′·W′]`.
    pub sigma_map: NodeId,
}

impl Cacnn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: (usize, usize, usize),
        kernel: usize,
        stride: usize,
        depth: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = Conv2d::new(store, name, input, kernel, stride, depth, activation, rng)?;
        let patch = conv.geom.patch_len();
        Ok(Self {
            conv,
            gate_v: store.add_weight(&format!("{name}/gate_v"), &[patch, 1], Group::Other, rng)?,
            gate_b: store.add_zeros(&format!("{name}/gate_b"), &[1], Group::Other)?,
            w0: store.add_zeros(&format!("{name}/w0"), &[depth], Group::Other)?,
        })
    }

    pub fn output_len(&self) -> usize {
        self.conv.output_len()
    }

    pub fn forward(&self, g: &mut Graph, input: NodeId) -> Result<CacnnOutput> {
        let batch = g.value(input).rows();
        let c = &self.conv;
        let patches = g.im2col(input, c.geom)?;
        let v = g.affine(patches, c.w, c.b)?;
        let v = c.activation.apply(g, v);
        let chi = scalar_gate(g, patches, self.gate_v, self.gate_b)?;
        let w0 = g.param(self.w0);
        let mixed = gate_mix(g, chi, v, w0)?;
        Ok(CacnnOutput {
            features: g.reshape(mixed, &[batch, self.output_len()])?,
            sigma_map: g.reshape(chi, &[batch, c.geom.positions()])?,
        })
    }
}
