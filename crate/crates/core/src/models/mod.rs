//! Recurrent and convolutional layers and the two classifier architectures.
//!
//! Both models consume batches shaped `[B × C × T]` and produce class
//! probabilities `[B × K]`.
//!
//! ```
//! use csi_har::models::{build_model, model_forward, ModelConfig, ModelKind};
//! use csi_har::tensor::Tensor;
//!
//! let mut cfg = ModelConfig::new(ModelKind::CnnGru, 4, 16, 3).with_seed(7);
//! cfg.cnn_gru.gru_hidden = 8;
//! let model = build_model(&cfg)?;
//! assert_eq!(model.param_count(), cfg.param_count()?);
//!
//! let probs = model_forward(&model, &Tensor::<f64>::zeros(&[2, 4, 16]))?;
//! assert_eq!(probs.shape(), &[2, 3]);
//! for row in 0..2 {
//!     assert!((probs.row(row).iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! }
//! # Ok::<(), csi_har::Error>(())
//! ```

mod config;
mod layers;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Tensor, Var};

pub use config::{BiLstmConfig, CnnGruConfig, ConvBlock, ModelConfig, ModelKind};
pub use layers::{
    bilstm_layer, conv_block, gru_cell, gru_pass, lstm_cell, lstm_pass, time_steps, GruParams,
    LstmParams, GRU_GATES, LSTM_GATES,
};

/// Batches at most this large are recorded in one graph by [`model_forward`].
pub const FORWARD_CHUNK: usize = 32;

const LSTM_SUFFIX: [&str; 4] = ["i", "f", "g", "o"];
const GRU_SUFFIX: [&str; 3] = ["z", "r", "h"];

#[derive(Clone, Copy, Debug)]
enum Init {
    Uniform { fan_in: usize },
    Constant(f64),
}

struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn slot(name: String, shape: &[usize], init: Init) -> Slot {
    Slot {
        name,
        shape: shape.to_vec(),
        init,
    }
}

fn recurrent_slots(out: &mut Vec<Slot>, prefix: &str, suffixes: &[&str], input: usize, h: usize) {
    for s in suffixes {
        out.push(slot(format!("{prefix}.w_{s}"), &[h, input], Init::Uniform { fan_in: input }));
    }
    for s in suffixes {
        out.push(slot(format!("{prefix}.u_{s}"), &[h, h], Init::Uniform { fan_in: h }));
    }
    for s in suffixes {
        let init = if *s == "f" && suffixes.len() == 4 {
            Init::Constant(1.0)
        } else {
            Init::Uniform { fan_in: h }
        };
        out.push(slot(format!("{prefix}.b_{s}"), &[h], init));
    }
}

/// Parameter layout in storage order.
fn layout(cfg: &ModelConfig) -> Result<Vec<Slot>> {
    cfg.validate()?;
    let mut slots = Vec::new();
    let features = match cfg.kind {
        ModelKind::Bilstm => {
            let h = cfg.bilstm.hidden;
            let mut input = cfg.input_channels;
            for l in 0..cfg.bilstm.layers {
                for dir in ["fwd", "bwd"] {
                    recurrent_slots(&mut slots, &format!("bilstm.{l}.{dir}"), &LSTM_SUFFIX, input, h);
                }
                input = 2 * h;
            }
            2 * h
        }
        ModelKind::CnnGru => {
            let c = &cfg.cnn_gru;
            let shapes = cfg.conv_shapes()?;
            for (i, (b, &(cin, _))) in c.blocks.iter().zip(&shapes).enumerate() {
                let fan_in = cin * b.kernel;
                slots.push(slot(
                    format!("conv.{i}.weight"),
                    &[b.out_channels, cin, b.kernel],
                    Init::Uniform { fan_in },
                ));
                slots.push(slot(format!("conv.{i}.bias"), &[b.out_channels], Init::Uniform { fan_in }));
            }
            let mut input = shapes.last().unwrap().0;
            for l in 0..c.gru_layers {
                recurrent_slots(&mut slots, &format!("gru.{l}"), &GRU_SUFFIX, input, c.gru_hidden);
                input = c.gru_hidden;
            }
            c.gru_hidden
        }
    };
    let fan_in = features;
    slots.push(slot("head.weight".into(), &[cfg.n_classes, features], Init::Uniform { fan_in }));
    slots.push(slot("head.bias".into(), &[cfg.n_classes], Init::Uniform { fan_in }));
    Ok(slots)
}

/// Ordered named parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        let (names, tensors) = entries.into_iter().unzip();
        Self { names, tensors }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// A built classifier: its configuration and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
}

/// Allocate and initialize parameters, uniform in `±1/√fan_in` with forget
/// gate biases set to 1, drawn from ChaCha8 seeded by the config.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    let slots = layout(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed());
    let entries = slots
        .into_iter()
        .map(|s| {
            let t = match s.init {
                Init::Constant(v) => Tensor::full(&s.shape, v),
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    Tensor::from_fn(&s.shape, |_| rng.gen_range(-bound..bound))
                }
            };
            (s.name, t)
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        params: ParamStore::new(entries),
    })
}

struct Cursor<'a, 'g, E: Element> {
    vars: &'a [Var<'g, E>],
    pos: usize,
}

impl<'g, E: Element> Cursor<'_, 'g, E> {
    fn next(&mut self) -> Result<Var<'g, E>> {
        let v = self
            .vars
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Contract("fewer bound parameters than the model needs".into()))?;
        self.pos += 1;
        Ok(v)
    }

    fn array<const N: usize>(&mut self) -> Result<[Var<'g, E>; N]> {
        let v: Vec<_> = (0..N).map(|_| self.next()).collect::<Result<_>>()?;
        Ok(v.try_into().expect("length N"))
    }

    fn lstm(&mut self) -> Result<LstmParams<Var<'g, E>>> {
        Ok(LstmParams {
            w: self.array()?,
            u: self.array()?,
            b: self.array()?,
        })
    }

    fn gru(&mut self) -> Result<GruParams<Var<'g, E>>> {
        Ok(GruParams {
            w: self.array()?,
            u: self.array()?,
            b: self.array()?,
        })
    }
}

impl Model {
    /// Wrap existing parameters, checking names and shapes against the config.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let slots = layout(&config)?;
        if slots.len() != params.len() {
            return Err(Error::Contract(format!(
                "{} parameter tensors given, config needs {}",
                params.len(),
                slots.len()
            )));
        }
        for (s, (name, t)) in slots.iter().zip(params.iter()) {
            if s.name != name || s.shape != t.shape() {
                return Err(Error::Contract(format!(
                    "parameter {name} {:?} does not match expected {} {:?}",
                    t.shape(),
                    s.name,
                    s.shape
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    /// Record every parameter on `g`, as trainable leaves or constants.
    pub fn bind<'g, E: Element>(&self, g: &'g Graph<E>, trainable: bool) -> Vec<Var<'g, E>> {
        self.params
            .tensors()
            .iter()
            .map(|t| {
                let v = t.cast::<E>();
                if trainable {
                    g.param(v)
                } else {
                    g.constant(v)
                }
            })
            .collect()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let c = &self.config;
        match *shape {
            [b, ch, t] if b > 0 && ch == c.input_channels && t == c.input_time => Ok(()),
            _ => Err(Error::Contract(format!(
                "batch shape {shape:?} does not match model input [B × {} × {}]",
                c.input_channels, c.input_time
            ))),
        }
    }

    /// Logits `[B × K]` for `x: [B × C × T]` using parameters bound by
    /// [`bind`](Self::bind).
    pub fn logits<'g, E: Element>(&self, params: &[Var<'g, E>], x: Var<'g, E>) -> Result<Var<'g, E>> {
        self.check_input(&x.shape())?;
        let mut cur = Cursor { vars: params, pos: 0 };
        let features = match self.config.kind {
            ModelKind::Bilstm => {
                let mut seq = time_steps(x)?;
                for _ in 0..self.config.bilstm.layers {
                    let fwd = cur.lstm()?;
                    let bwd = cur.lstm()?;
                    seq = bilstm_layer(&seq, &fwd, &bwd)?;
                }
                *seq.last().expect("T >= 1")
            }
            ModelKind::CnnGru => {
                let c = &self.config.cnn_gru;
                let mut y = x;
                for b in &c.blocks {
                    let (w, bias) = (cur.next()?, cur.next()?);
                    y = conv_block(y, w, bias, b.stride, c.padding, b.pool)?;
                }
                let mut seq = time_steps(y)?;
                for _ in 0..c.gru_layers {
                    let p = cur.gru()?;
                    seq = gru_pass(&seq, &p)?;
                }
                *seq.last().expect("T >= 1")
            }
        };
        let (w, b) = (cur.next()?, cur.next()?);
        if cur.pos != params.len() {
            return Err(Error::Contract("more bound parameters than the model uses".into()));
        }
        features.linear(w, Some(b))
    }

    /// Activation elements recorded by one forward pass of `batch` samples.
    pub fn activation_elements(&self, batch: usize) -> Result<usize> {
        let g = Graph::<f64>::empty();
        let params = self.bind(&g, false);
        let c = &self.config;
        let x = g.constant(Tensor::zeros(&[batch, c.input_channels, c.input_time]));
        self.logits(&params, x)?.softmax()?;
        Ok(g.activation_elements())
    }
}

/// Class probabilities `[B × K]` for `batch: [B × C × T]`, evaluated in
/// chunks of [`FORWARD_CHUNK`] samples.
pub fn model_forward<E: Element>(model: &Model, batch: &Tensor<E>) -> Result<Tensor<E>> {
    model.check_input(batch.shape())?;
    let (b, c, t) = (batch.shape()[0], batch.shape()[1], batch.shape()[2]);
    let k = model.config.n_classes;
    let per = c * t;
    let mut out = Vec::with_capacity(b * k);
    for start in (0..b).step_by(FORWARD_CHUNK) {
        let n = FORWARD_CHUNK.min(b - start);
        let chunk = Tensor::new(&[n, c, t], batch.data()[start * per..(start + n) * per].to_vec())?;
        let g = Graph::<E>::empty();
        let params = model.bind(&g, false);
        let probs = model.logits(&params, g.constant(chunk))?.softmax()?;
        out.extend_from_slice(probs.value().data());
    }
    Tensor::new(&[b, k], out)
}
