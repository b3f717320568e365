//! Recurrent sequence models trained on sliding windows.

mod lstm;
mod simple;

use serde::{Deserialize, Serialize};

pub use lstm::{
    lstm_cell_step, lstm_cell_step_with_gates, lstm_forward, lstm_hidden_sequence, CellState, Gate,
    GateValues, LstmLayer, LstmParams, LstmSpec,
};
pub use simple::{elman_step, jordan_step, RnnParams, SimpleKind};

use crate::error::{Error, Result};
use crate::nnet::{train_with_hook, Activation, Network, TrainConfig, TrainTrace, WindowedData};

/// Clipping ceiling applied when the config leaves it unset.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Jordan,
    Elman,
    Lstm,
}

/// Architecture of a recurrent model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentSpec {
    pub kind: RecurrentKind,
    pub input_dim: usize,
    /// Cells per layer. Jordan and Elman take exactly one layer.
    pub hidden: Vec<usize>,
    /// Hidden nonlinearity for Jordan and Elman; the LSTM ignores it.
    pub hidden_activation: Activation,
}

impl RecurrentSpec {
    pub fn new(kind: RecurrentKind, input_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            kind,
            input_dim,
            hidden,
            hidden_activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RecurrentKind::Lstm => LstmSpec {
                input_dim: self.input_dim,
                hidden: self.hidden.clone(),
            }
            .validate(),
            _ if self.hidden.len() != 1 || self.hidden[0] == 0 || self.input_dim == 0 => {
                Err(Error::InvalidArgument(format!(
                    "{:?} network needs one nonempty hidden layer, got {:?}",
                    self.kind, self.hidden
                )))
            }
            _ => Ok(()),
        }
    }

    /// Freshly initialised parameters.
    pub fn init(&self, seed: u64) -> Result<RecurrentModel> {
        self.validate()?;
        Ok(match self.kind {
            RecurrentKind::Lstm => RecurrentModel::Lstm(LstmParams::init(
                &LstmSpec {
                    input_dim: self.input_dim,
                    hidden: self.hidden.clone(),
                },
                seed,
            )?),
            RecurrentKind::Jordan => RecurrentModel::Simple(RnnParams::init(
                SimpleKind::Jordan,
                self.input_dim,
                self.hidden[0],
                self.hidden_activation,
                seed,
            )),
            RecurrentKind::Elman => RecurrentModel::Simple(RnnParams::init(
                SimpleKind::Elman,
                self.input_dim,
                self.hidden[0],
                self.hidden_activation,
                seed,
            )),
        })
    }
}

/// A trained recurrent model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum RecurrentModel {
    Simple(RnnParams),
    Lstm(LstmParams),
}

impl RecurrentModel {
    pub fn predict_all(&self, data: &WindowedData) -> Vec<f64> {
        match self {
            Self::Simple(p) => p.predict_all(data),
            Self::Lstm(p) => p.predict_all(data),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Train a recurrent network under the same contract as the feedforward
/// trainer. Gradients are clipped at `DEFAULT_CLIP_NORM` unless the config
/// says otherwise.
pub fn train_rnn(
    spec: &RecurrentSpec,
    config: &TrainConfig,
    train: &WindowedData,
    val: &WindowedData,
) -> Result<(RecurrentModel, TrainTrace)> {
    train_rnn_with_hook(spec, config, train, val, &mut |_, _| {})
}

pub fn train_rnn_with_hook(
    spec: &RecurrentSpec,
    config: &TrainConfig,
    train: &WindowedData,
    val: &WindowedData,
    hook: &mut dyn FnMut(usize, &RecurrentModel),
) -> Result<(RecurrentModel, TrainTrace)> {
    let mut config = config.clone();
    config.clip_norm = config.clip_norm.or(Some(DEFAULT_CLIP_NORM));
    match spec.init(config.seed)? {
        RecurrentModel::Simple(p) => {
            let (p, trace) = train_with_hook(p, &config, train, val, &mut |e, n: &RnnParams| {
                hook(e, &RecurrentModel::Simple(n.clone()))
            })?;
            Ok((RecurrentModel::Simple(p), trace))
        }
        RecurrentModel::Lstm(p) => {
            let (p, trace) = train_with_hook(p, &config, train, val, &mut |e, n: &LstmParams| {
                hook(e, &RecurrentModel::Lstm(n.clone()))
            })?;
            Ok((RecurrentModel::Lstm(p), trace))
        }
    }
}
