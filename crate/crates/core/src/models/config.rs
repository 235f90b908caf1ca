use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Padding;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bilstm,
    CnnGru,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bilstm => "bilstm",
            ModelKind::CnnGru => "cnn_gru",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiLstmConfig {
    pub layers: usize,
    pub hidden: usize,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    /// Max-pool window; 1 disables pooling.
    #[serde(default = "two")]
    pub pool: usize,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn same() -> Padding {
    Padding::Same
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnGruConfig {
    pub blocks: Vec<ConvBlock>,
    pub gru_hidden: usize,
    #[serde(default = "one")]
    pub gru_layers: usize,
    #[serde(default = "same")]
    pub padding: Padding,
}

impl Default for CnnGruConfig {
    fn default() -> Self {
        let block = |out_channels| ConvBlock {
            out_channels,
            kernel: 5,
            stride: 1,
            pool: 2,
        };
        Self {
            blocks: vec![block(16), block(32)],
            gru_hidden: 128,
            gru_layers: 1,
            padding: Padding::Same,
        }
    }
}

/// Architecture description. Input dims and class count may be left at 0
/// in experiment files; they are filled from the dataset before building.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub input_channels: usize,
    #[serde(default)]
    pub input_time: usize,
    #[serde(default)]
    pub n_classes: usize,
    #[serde(default)]
    pub bilstm: BiLstmConfig,
    #[serde(default)]
    pub cnn_gru: CnnGruConfig,
    /// Initialization seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelConfig {
    /// Defaults for `kind` with the given input and class count.
    pub fn new(kind: ModelKind, input_channels: usize, input_time: usize, n_classes: usize) -> Self {
        Self {
            kind,
            input_channels,
            input_time,
            n_classes,
            bilstm: BiLstmConfig::default(),
            cnn_gru: CnnGruConfig::default(),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn init_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Channels and length after each conv block, input first.
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let cfg = &self.cnn_gru;
        let mut shapes = vec![(self.input_channels, self.input_time)];
        let mut len = self.input_time;
        for (i, b) in cfg.blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 || b.pool == 0 {
                return Err(Error::Config(format!(
                    "cnn_gru.blocks[{i}]: out_channels, kernel, stride and pool must be >= 1"
                )));
            }
            let conv = cfg.padding.output_len(len, b.kernel, b.stride).ok_or_else(|| {
                Error::Config(format!(
                    "cnn_gru.blocks[{i}]: kernel {} does not fit time length {len}",
                    b.kernel
                ))
            })?;
            len = conv / b.pool;
            if len == 0 {
                return Err(Error::Config(format!(
                    "cnn_gru.blocks[{i}]: pooling {} reduces time length {conv} below 1",
                    b.pool
                )));
            }
            shapes.push((b.out_channels, len));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.input_time == 0 {
            return Err(Error::Config(format!(
                "model input shape {}x{} must be positive",
                self.input_channels, self.input_time
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::Config(format!(
                "model.n_classes must be >= 2, got {}",
                self.n_classes
            )));
        }
        match self.kind {
            ModelKind::Bilstm => {
                if self.bilstm.layers == 0 || self.bilstm.hidden == 0 {
                    return Err(Error::Config("bilstm.layers and bilstm.hidden must be >= 1".into()));
                }
            }
            ModelKind::CnnGru => {
                let c = &self.cnn_gru;
                if c.gru_hidden == 0 || c.gru_layers == 0 {
                    return Err(Error::Config(
                        "cnn_gru.gru_hidden and cnn_gru.gru_layers must be >= 1".into(),
                    ));
                }
                self.conv_shapes()?;
            }
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> Result<usize> {
        self.validate()?;
        let lstm = |input: usize, h: usize| 4 * (h * input + h * h + h);
        let gru = |input: usize, h: usize| 3 * (h * input + h * h + h);
        let head = |features: usize| features * self.n_classes + self.n_classes;
        Ok(match self.kind {
            ModelKind::Bilstm => {
                let h = self.bilstm.hidden;
                let mut total = 0;
                let mut input = self.input_channels;
                for _ in 0..self.bilstm.layers {
                    total += 2 * lstm(input, h);
                    input = 2 * h;
                }
                total + head(2 * h)
            }
            ModelKind::CnnGru => {
                let c = &self.cnn_gru;
                let shapes = self.conv_shapes()?;
                let mut total = 0;
                for (b, (cin, _)) in c.blocks.iter().zip(&shapes) {
                    total += b.out_channels * cin * b.kernel + b.out_channels;
                }
                let mut input = shapes.last().unwrap().0;
                for _ in 0..c.gru_layers {
                    total += gru(input, c.gru_hidden);
                    input = c.gru_hidden;
                }
                total + head(c.gru_hidden)
            }
        })
    }
}
