//! Feedforward networks and the training loop shared with the recurrent
//! models.

mod data;
mod dropout;
mod mlp;
mod train;

use serde::{Deserialize, Serialize};

pub use data::WindowedData;
pub use dropout::{apply_dropout, DropoutState, Phase};
pub use mlp::{forward, DenseLayer, MlpParams, MlpSpec};
pub use train::{
    loss_and_gradient, total_loss, train, train_with_hook, Adam, Network, TrainConfig, TrainTrace,
};

use crate::error::Result;
use crate::series;

/// Unit nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Linear => v,
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative at pre-activation `v`; the ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(v);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

impl LossKind {
    pub fn value(self, y: &[f64], yhat: &[f64]) -> Result<f64> {
        match self {
            LossKind::Mse => series::mse(y, yhat),
            LossKind::Mae => series::mae(y, yhat),
        }
    }

    /// Derivative of the per-sample term with respect to the prediction.
    #[inline]
    pub fn derivative(self, y: f64, yhat: f64) -> f64 {
        match self {
            LossKind::Mse => 2.0 * (yhat - y),
            LossKind::Mae => {
                let d = yhat - y;
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Data term plus `λ Σ w²` over every weight (biases excluded).
pub fn loss<N: Network>(
    y: &[f64],
    yhat: &[f64],
    kind: LossKind,
    params: &N,
    weight_decay: f64,
) -> Result<f64> {
    Ok(kind.value(y, yhat)? + weight_decay * params.weight_norm2())
}
