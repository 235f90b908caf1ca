use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Padding, Tensor, Var};

/// LSTM gate order used by [`LstmParams`].
pub const LSTM_GATES: [&str; 4] = ["input", "forget", "cell", "output"];
/// GRU gate order used by [`GruParams`].
pub const GRU_GATES: [&str; 3] = ["update", "reset", "candidate"];

/// Per-gate LSTM weights: `w[g]` is `[hidden × input]`, `u[g]` is
/// `[hidden × hidden]`, `b[g]` is `[hidden]`, gates ordered as
/// [`LSTM_GATES`].
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub w: [T; 4],
    pub u: [T; 4],
    pub b: [T; 4],
}

/// Per-gate GRU weights, gates ordered as [`GRU_GATES`].
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub w: [T; 3],
    pub u: [T; 3],
    pub b: [T; 3],
}

fn dims_of<E: Element>(w: &Tensor<E>, u: &Tensor<E>, b: &Tensor<E>) -> Result<(usize, usize)> {
    let (&[h, input], &[hu, hu2], &[hb]) = (w.shape(), u.shape(), b.shape()) else {
        return Err(Error::Contract(format!(
            "recurrent gate shapes {:?} {:?} {:?} are not [h×in] [h×h] [h]",
            w.shape(),
            u.shape(),
            b.shape()
        )));
    };
    if hu != h || hu2 != h || hb != h {
        return Err(Error::Contract(format!(
            "recurrent gate shapes {:?} {:?} {:?} disagree on hidden size",
            w.shape(),
            u.shape(),
            b.shape()
        )));
    }
    Ok((input, h))
}

fn gate_dims<E: Element>(w: &[Var<'_, E>], u: &[Var<'_, E>], b: &[Var<'_, E>]) -> Result<(usize, usize)> {
    let mut dims = None;
    for ((w, u), b) in w.iter().zip(u).zip(b) {
        let d = dims_of(&w.value(), &u.value(), &b.value())?;
        if dims.is_some_and(|prev| prev != d) {
            return Err(Error::Contract("gates disagree on dimensions".into()));
        }
        dims = Some(d);
    }
    Ok(dims.expect("at least one gate"))
}

impl<'g, E: Element> LstmParams<Var<'g, E>> {
    /// `(input, hidden)` after checking every gate agrees.
    pub fn dims(&self) -> Result<(usize, usize)> {
        gate_dims(&self.w, &self.u, &self.b)
    }
}

impl<'g, E: Element> GruParams<Var<'g, E>> {
    pub fn dims(&self) -> Result<(usize, usize)> {
        gate_dims(&self.w, &self.u, &self.b)
    }
}

impl<E: Element> LstmParams<Tensor<E>> {
    pub fn bind<'g>(&self, g: &'g Graph<E>) -> LstmParams<Var<'g, E>> {
        LstmParams {
            w: self.w.clone().map(|t| g.param(t)),
            u: self.u.clone().map(|t| g.param(t)),
            b: self.b.clone().map(|t| g.param(t)),
        }
    }
}

impl<E: Element> GruParams<Tensor<E>> {
    pub fn bind<'g>(&self, g: &'g Graph<E>) -> GruParams<Var<'g, E>> {
        GruParams {
            w: self.w.clone().map(|t| g.param(t)),
            u: self.u.clone().map(|t| g.param(t)),
            b: self.b.clone().map(|t| g.param(t)),
        }
    }
}

fn check_state<E: Element>(op: &str, x: Var<'_, E>, h: Var<'_, E>, input: usize, hidden: usize) -> Result<()> {
    let (xs, hs) = (x.shape(), h.shape());
    let ok = xs.len() == 2 && hs.len() == 2 && xs[1] == input && hs[1] == hidden && xs[0] == hs[0];
    if ok {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{op}: input {xs:?} and state {hs:?} do not fit input {input}, hidden {hidden}"
        )))
    }
}

fn pre_activation<'g, E: Element>(
    x: Var<'g, E>,
    h: Var<'g, E>,
    w: Var<'g, E>,
    u: Var<'g, E>,
    b: Var<'g, E>,
) -> Result<Var<'g, E>> {
    x.linear(w, Some(b))?.add(h.linear(u, None)?)
}

/// One LSTM step on `x: [B × input]`, `h, c: [B × hidden]`.
///
/// `i, f, o = σ(W x + U h + b)`, `g = tanh(W x + U h + b)`,
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_cell<'g, E: Element>(
    x: Var<'g, E>,
    h: Var<'g, E>,
    c: Var<'g, E>,
    p: &LstmParams<Var<'g, E>>,
) -> Result<(Var<'g, E>, Var<'g, E>)> {
    let (input, hidden) = p.dims()?;
    check_state("lstm_cell", x, h, input, hidden)?;
    check_state("lstm_cell", x, c, input, hidden)?;
    let gate = |k: usize| pre_activation(x, h, p.w[k], p.u[k], p.b[k]);
    let i = gate(0)?.sigmoid()?;
    let f = gate(1)?.sigmoid()?;
    let g = gate(2)?.tanh()?;
    let o = gate(3)?.sigmoid()?;
    let c_next = f.mul(c)?.add(i.mul(g)?)?;
    let h_next = o.mul(c_next.tanh()?)?;
    Ok((h_next, c_next))
}

/// One GRU step: `h' = (1 − z)⊙h + z⊙h̃` with
/// `h̃ = tanh(W_h x + U_h (r⊙h) + b_h)`.
pub fn gru_cell<'g, E: Element>(x: Var<'g, E>, h: Var<'g, E>, p: &GruParams<Var<'g, E>>) -> Result<Var<'g, E>> {
    let (input, hidden) = p.dims()?;
    check_state("gru_cell", x, h, input, hidden)?;
    let z = pre_activation(x, h, p.w[0], p.u[0], p.b[0])?.sigmoid()?;
    let r = pre_activation(x, h, p.w[1], p.u[1], p.b[1])?.sigmoid()?;
    let candidate = x
        .linear(p.w[2], Some(p.b[2]))?
        .add(r.mul(h)?.linear(p.u[2], None)?)?
        .tanh()?;
    z.one_minus()?.mul(h)?.add(z.mul(candidate)?)
}

fn zero_state<'g, E: Element>(g: &'g Graph<E>, batch: usize, hidden: usize) -> Var<'g, E> {
    g.constant(Tensor::zeros(&[batch, hidden]))
}

fn batch_of<E: Element>(op: &str, seq: &[Var<'_, E>]) -> Result<usize> {
    let first = seq
        .first()
        .ok_or_else(|| Error::Contract(format!("{op}: empty sequence")))?;
    Ok(first.shape()[0])
}

/// Run an LSTM over `seq` (each step `[B × input]`), optionally right to left.
/// Outputs are returned in sequence order either way.
pub fn lstm_pass<'g, E: Element>(
    seq: &[Var<'g, E>],
    p: &LstmParams<Var<'g, E>>,
    reverse: bool,
) -> Result<Vec<Var<'g, E>>> {
    let batch = batch_of("lstm", seq)?;
    let (_, hidden) = p.dims()?;
    let g = seq[0].graph();
    let (mut h, mut c) = (zero_state(g, batch, hidden), zero_state(g, batch, hidden));
    let mut out = vec![None; seq.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..seq.len()).rev())
    } else {
        Box::new(0..seq.len())
    };
    for t in order {
        (h, c) = lstm_cell(seq[t], h, c, p)?;
        out[t] = Some(h);
    }
    Ok(out.into_iter().map(|v| v.expect("every step visited")).collect())
}

/// Bidirectional LSTM layer: step `t` of the output is
/// `[h_fwd(t) ; h_bwd(t)]`, width `2·hidden`.
pub fn bilstm_layer<'g, E: Element>(
    seq: &[Var<'g, E>],
    fwd: &LstmParams<Var<'g, E>>,
    bwd: &LstmParams<Var<'g, E>>,
) -> Result<Vec<Var<'g, E>>> {
    let f = lstm_pass(seq, fwd, false)?;
    let b = lstm_pass(seq, bwd, true)?;
    f.into_iter()
        .zip(b)
        .map(|(f, b)| Var::concat(&[f, b]))
        .collect()
}

/// GRU over a sequence, left to right; returns every hidden state.
pub fn gru_pass<'g, E: Element>(seq: &[Var<'g, E>], p: &GruParams<Var<'g, E>>) -> Result<Vec<Var<'g, E>>> {
    let batch = batch_of("gru", seq)?;
    let (_, hidden) = p.dims()?;
    let mut h = zero_state(seq[0].graph(), batch, hidden);
    let mut out = Vec::with_capacity(seq.len());
    for &x in seq {
        h = gru_cell(x, h, p)?;
        out.push(h);
    }
    Ok(out)
}

/// Convolution block: conv1d, per-channel bias, ReLU, max-pool.
pub fn conv_block<'g, E: Element>(
    x: Var<'g, E>,
    kernels: Var<'g, E>,
    bias: Var<'g, E>,
    stride: usize,
    padding: Padding,
    pool: usize,
) -> Result<Var<'g, E>> {
    let y = x.conv1d(kernels, stride, padding)?.add_bias(bias)?.relu()?;
    if pool > 1 {
        y.max_pool1d(pool)
    } else {
        Ok(y)
    }
}

/// Split `[B × C × T]` into `T` steps of `[B × C]`.
pub fn time_steps<'g, E: Element>(x: Var<'g, E>) -> Result<Vec<Var<'g, E>>> {
    let shape = x.shape();
    if shape.len() != 3 {
        return Err(Error::Contract(format!("expected [B × C × T], got {shape:?}")));
    }
    (0..shape[2]).map(|t| x.time_step(t)).collect()
}
