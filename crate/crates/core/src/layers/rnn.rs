use rand::Rng;

use super::{LayerError, Result};
use crate::autodiff::{Graph, Group, NodeId, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Output `y` and cell state `c` after a step, both `[B × h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnState {
    pub y: NodeId,
    pub c: NodeId,
}

pub trait RecurrentCell {
    fn input_dim(&self) -> usize;
    fn hidden_dim(&self) -> usize;

    fn step(&self, g: &mut Graph, x: NodeId, prev: RnnState) -> Result<RnnState>;

    fn initial_state(&self, g: &mut Graph, batch: usize) -> RnnState {
        let y = g.input(Tensor::zeros(&[batch, self.hidden_dim()]));
        let c = g.input(Tensor::zeros(&[batch, self.hidden_dim()]));
        RnnState { y, c }
    }

    /// Runs the cell over `xs` from a zero state and returns every state.
    fn unroll(&self, g: &mut Graph, xs: &[NodeId]) -> Result<Vec<RnnState>> {
        let Some(&first) = xs.first() else {
            return Ok(Vec::new());
        };
        let batch = g.value(first).rows();
        let mut state = self.initial_state(g, batch);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.step(g, x, state)?;
            out.push(state);
        }
        Ok(out)
    }
}

/// `Σ xᵢ·Wᵢ + b`.
fn linear(g: &mut Graph, terms: &[(NodeId, ParamId)], bias: ParamId) -> Result<NodeId> {
    let mut acc = g.param(bias);
    for &(x, w) in terms {
        let w = g.param(w);
        let t = g.matmul(x, w)?;
        acc = g.add(t, acc)?;
    }
    Ok(acc)
}

fn peephole(g: &mut Graph, z: NodeId, p: ParamId, c: NodeId) -> Result<NodeId> {
    let p = g.param(p);
    let pc = g.mul(p, c)?;
    Ok(g.add(z, pc)?)
}

fn mix(g: &mut Graph, gate: NodeId, a: NodeId, b: NodeId) -> Result<NodeId> {
    super::gate_mix(g, gate, a, b)
}

fn check_dims(name: &str, x: usize, h: usize) -> Result<()> {
    if x == 0 || h == 0 {
        return Err(LayerError::Config(format!("{name}: zero-sized recurrent cell")));
    }
    Ok(())
}

struct Builder<'a, R: ?Sized> {
    store: &'a mut ParamStore,
    name: &'a str,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn w(&mut self, key: &str, rows: usize, cols: usize) -> Result<ParamId> {
        let name = format!("{}/{key}", self.name);
        Ok(self.store.add_weight(&name, &[rows, cols], Group::Other, self.rng)?)
    }

    fn v(&mut self, key: &str, len: usize) -> Result<ParamId> {
        let name = format!("{}/{key}", self.name);
        Ok(self.store.add_weight(&name, &[len], Group::Other, self.rng)?)
    }

    fn zeros(&mut self, key: &str, len: usize) -> Result<ParamId> {
        let name = format!("{}/{key}", self.name);
        Ok(self.store.add_zeros(&name, &[len], Group::Other)?)
    }
}

/// Context-aware recurrent cell with scalar gates on both the cell state
/// and the output. `h` functions are `tanh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaRnn {
    pub input: usize,
    pub hidden: usize,
    pub cell: CaRnnCellParams,
    pub out: CaRnnOutputParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaRnnCellParams {
    pub v_f: ParamId,
    pub w_f: ParamId,
    pub u_f: ParamId,
    pub b_f: ParamId,
    pub w_v: ParamId,
    pub u_v: ParamId,
    pub p_v: ParamId,
    pub b_v: ParamId,
    pub w_c: ParamId,
    pub u_c: ParamId,
    pub b_c: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaRnnOutputParams {
    pub z_o: ParamId,
    pub v_o: ParamId,
    pub w_o: ParamId,
    pub u_o: ParamId,
    pub b_o: ParamId,
    pub z_v: ParamId,
    pub v_v: ParamId,
    pub w_v: ParamId,
    pub u_v: ParamId,
    pub b_v: ParamId,
    pub v_c: ParamId,
    pub w_c: ParamId,
    pub u_c: ParamId,
    pub b_c: ParamId,
}

/// Every intermediate of one [`CaRnn`] step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaRnnStep {
    pub state: RnnState,
    /// Cell gate `f_t`, `[B × 1]`.
    pub f: NodeId,
    pub v: NodeId,
    pub c_prime: NodeId,
    /// Output gate `o_t`, `[B × 1]`.
    pub o: NodeId,
    pub v_out: NodeId,
    pub c_out: NodeId,
}

impl CaRnn {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(name, input, hidden)?;
        let (x, h) = (input, hidden);
        let mut b = Builder { store, name, rng };
        let cell = CaRnnCellParams {
            v_f: b.w("v_f", h, 1)?,
            w_f: b.w("w_f", x, 1)?,
            u_f: b.w("u_f", h, 1)?,
            b_f: b.zeros("b_f", 1)?,
            w_v: b.w("W_v", x, h)?,
            u_v: b.w("U_v", h, h)?,
            p_v: b.v("p_v", h)?,
            b_v: b.zeros("b_v", h)?,
            w_c: b.w("W_c", x, h)?,
            u_c: b.w("U_c", h, h)?,
            b_c: b.zeros("b_c", h)?,
        };
        let out = CaRnnOutputParams {
            z_o: b.w("z_o", h, 1)?,
            v_o: b.w("v_o", h, 1)?,
            w_o: b.w("w_o", x, 1)?,
            u_o: b.w("u_o", h, 1)?,
            b_o: b.zeros("b_o", 1)?,
            z_v: b.w("Z_v", h, h)?,
            v_v: b.w("V_v_out", h, h)?,
            w_v: b.w("W_v_out", x, h)?,
            u_v: b.w("U_v_out", h, h)?,
            b_v: b.zeros("b_v_out", h)?,
            v_c: b.w("V_c_out", h, h)?,
            w_c: b.w("W_c_out", x, h)?,
            u_c: b.w("U_c_out", h, h)?,
            b_c: b.zeros("b_c_out", h)?,
        };
        Ok(Self { input, hidden, cell, out })
    }

    pub fn step_detailed(&self, g: &mut Graph, x: NodeId, prev: RnnState) -> Result<CaRnnStep> {
        let (c0, y0) = (prev.c, prev.y);
        let p = &self.cell;
        let f = linear(g, &[(c0, p.v_f), (x, p.w_f), (y0, p.u_f)], p.b_f)?;
        let f = g.sigmoid(f);
        let v = linear(g, &[(x, p.w_v), (y0, p.u_v)], p.b_v)?;
        let v = peephole(g, v, p.p_v, c0)?;
        let v = g.tanh(v);
        let c_prime = linear(g, &[(x, p.w_c), (y0, p.u_c)], p.b_c)?;
        let c_prime = g.tanh(c_prime);
        let c = mix(g, f, v, c_prime)?;

        let q = &self.out;
        let o = linear(g, &[(c, q.z_o), (c0, q.v_o), (x, q.w_o), (y0, q.u_o)], q.b_o)?;
        let o = g.sigmoid(o);
        let v_out = linear(g, &[(c, q.z_v), (c0, q.v_v), (x, q.w_v), (y0, q.u_v)], q.b_v)?;
        let v_out = g.tanh(v_out);
        let c_out = linear(g, &[(c0, q.v_c), (x, q.w_c), (y0, q.u_c)], q.b_c)?;
        let c_out = g.tanh(c_out);
        let y = mix(g, o, v_out, c_out)?;
        Ok(CaRnnStep {
            state: RnnState { y, c },
            f,
            v,
            c_prime,
            o,
            v_out,
            c_out,
        })
    }
}

impl RecurrentCell for CaRnn {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn step(&self, g: &mut Graph, x: NodeId, prev: RnnState) -> Result<RnnState> {
        Ok(self.step_detailed(g, x, prev)?.state)
    }
}

/// Peephole LSTM: `c = z⊙i + c₋₁⊙f`, `y = tanh(c)⊙o` with `o` peeking at
/// the new cell state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub w_z: ParamId,
    pub r_z: ParamId,
    pub b_z: ParamId,
    pub w_i: ParamId,
    pub r_i: ParamId,
    pub p_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub r_f: ParamId,
    pub p_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub r_o: ParamId,
    pub p_o: ParamId,
    pub b_o: ParamId,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(name, input, hidden)?;
        let (x, h) = (input, hidden);
        let mut b = Builder { store, name, rng };
        Ok(Self {
            input,
            hidden,
            w_z: b.w("W_z", x, h)?,
            r_z: b.w("R_z", h, h)?,
            b_z: b.zeros("b_z", h)?,
            w_i: b.w("W_i", x, h)?,
            r_i: b.w("R_i", h, h)?,
            p_i: b.v("p_i", h)?,
            b_i: b.zeros("b_i", h)?,
            w_f: b.w("W_f", x, h)?,
            r_f: b.w("R_f", h, h)?,
            p_f: b.v("p_f", h)?,
            b_f: b.zeros("b_f", h)?,
            w_o: b.w("W_o", x, h)?,
            r_o: b.w("R_o", h, h)?,
            p_o: b.v("p_o", h)?,
            b_o: b.zeros("b_o", h)?,
        })
    }
}

impl RecurrentCell for Lstm {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn step(&self, g: &mut Graph, x: NodeId, prev: RnnState) -> Result<RnnState> {
        let (c0, y0) = (prev.c, prev.y);
        let z = linear(g, &[(x, self.w_z), (y0, self.r_z)], self.b_z)?;
        let z = g.tanh(z);
        let i = linear(g, &[(x, self.w_i), (y0, self.r_i)], self.b_i)?;
        let i = peephole(g, i, self.p_i, c0)?;
        let i = g.sigmoid(i);
        let f = linear(g, &[(x, self.w_f), (y0, self.r_f)], self.b_f)?;
        let f = peephole(g, f, self.p_f, c0)?;
        let f = g.sigmoid(f);
        let zi = g.mul(z, i)?;
        let cf = g.mul(c0, f)?;
        let c = g.add(zi, cf)?;
        let o = linear(g, &[(x, self.w_o), (y0, self.r_o)], self.b_o)?;
        let o = peephole(g, o, self.p_o, c)?;
        let o = g.sigmoid(o);
        let hc = g.tanh(c);
        let y = g.mul(hc, o)?;
        Ok(RnnState { y, c })
    }
}

/// GRU without gate biases; the output is `y = tanh(W_y c + b_y)` and the
/// previous output is not an input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub w: ParamId,
    pub u: ParamId,
    pub w_y: ParamId,
    pub b_y: ParamId,
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(name, input, hidden)?;
        let (x, h) = (input, hidden);
        let mut b = Builder { store, name, rng };
        Ok(Self {
            input,
            hidden,
            w_r: b.w("W_r", x, h)?,
            u_r: b.w("U_r", h, h)?,
            w_z: b.w("W_z", x, h)?,
            u_z: b.w("U_z", h, h)?,
            w: b.w("W", x, h)?,
            u: b.w("U", h, h)?,
            w_y: b.w("W_y", h, h)?,
            b_y: b.zeros("b_y", h)?,
        })
    }
}

impl RecurrentCell for Gru {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn step(&self, g: &mut Graph, x: NodeId, prev: RnnState) -> Result<RnnState> {
        let c0 = prev.c;
        let mm = |g: &mut Graph, a: NodeId, w: ParamId| -> Result<NodeId> {
            let w = g.param(w);
            Ok(g.matmul(a, w)?)
        };
        let (a, b) = (mm(g, x, self.w_r)?, mm(g, c0, self.u_r)?);
        let r = g.add(a, b)?;
        let r = g.sigmoid(r);
        let (a, b) = (mm(g, x, self.w_z)?, mm(g, c0, self.u_z)?);
        let z = g.add(a, b)?;
        let z = g.sigmoid(z);
        let rc = g.mul(r, c0)?;
        let (a, b) = (mm(g, x, self.w)?, mm(g, rc, self.u)?);
        let cbar = g.add(a, b)?;
        let cbar = g.tanh(cbar);
        let c = mix(g, z, c0, cbar)?;
        let y = g.affine(c, self.w_y, self.b_y)?;
        let y = g.tanh(y);
        Ok(RnnState { y, c })
    }
}
