//! Mini-batch training with early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DropoutState, LossKind, WindowedData};
use crate::error::{Error, Result};

/// A differentiable regressor over windowed samples.
pub trait Network: Clone + Send + Sync {
    /// Predictions for the samples in `batch`.
    fn predict(&self, data: &WindowedData, batch: &[usize]) -> Vec<f64>;

    /// Mean data loss over `batch` and its gradient (same layout as `self`).
    fn data_gradient(
        &self,
        data: &WindowedData,
        batch: &[usize],
        loss: LossKind,
        dropout: &mut DropoutState,
    ) -> (f64, Self);

    /// Every parameter tensor, flagged `true` for weights (decayed) and
    /// `false` for biases.
    fn tensors(&self) -> Vec<(&[f64], bool)>;

    fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)>;

    /// Validates that `data` has the shape this network consumes.
    fn check_data(&self, data: &WindowedData) -> Result<()>;

    fn weight_norm2(&self) -> f64 {
        self.tensors()
            .into_iter()
            .filter(|(_, w)| *w)
            .map(|(t, _)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    fn parameter_len(&self) -> usize {
        self.tensors().iter().map(|(t, _)| t.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (t, _) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Predictions for every sample.
    fn predict_all(&self, data: &WindowedData) -> Vec<f64> {
        let idx: Vec<usize> = (0..data.len()).collect();
        idx.chunks(512)
            .flat_map(|c| self.predict(data, c))
            .collect()
    }
}

/// Loss including the weight penalty, and its full gradient.
pub fn loss_and_gradient<N: Network>(
    net: &N,
    data: &WindowedData,
    batch: &[usize],
    loss: LossKind,
    weight_decay: f64,
) -> (f64, N) {
    let mut off = DropoutState::new(0.0, 0);
    let (value, mut grad) = net.data_gradient(data, batch, loss, &mut off);
    add_decay(net, &mut grad, weight_decay);
    (value + weight_decay * net.weight_norm2(), grad)
}

/// Loss including the weight penalty, by forward evaluation only.
pub fn total_loss<N: Network>(
    net: &N,
    data: &WindowedData,
    batch: &[usize],
    loss: LossKind,
    weight_decay: f64,
) -> f64 {
    let preds = net.predict(data, batch);
    let y: Vec<f64> = batch.iter().map(|&i| data.targets()[i]).collect();
    loss.value(&y, &preds).expect("batch is nonempty") + weight_decay * net.weight_norm2()
}

fn add_decay<N: Network>(net: &N, grad: &mut N, weight_decay: f64) {
    if weight_decay == 0.0 {
        return;
    }
    for ((g, is_w), (p, _)) in grad.tensors_mut().into_iter().zip(net.tensors()) {
        if is_w {
            for (gv, pv) in g.iter_mut().zip(p) {
                *gv += 2.0 * weight_decay * pv;
            }
        }
    }
}

fn clip<N: Network>(grad: &mut N, max_norm: f64) {
    let norm: f64 = grad
        .tensors()
        .iter()
        .map(|(t, _)| t.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (t, _) in grad.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(learning_rate: f64, len: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step<N: Network>(&mut self, params: &mut N, grad: &N) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut k = 0;
        for ((p, _), (g, _)) in params.tensors_mut().into_iter().zip(grad.tensors()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gv;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv;
                *pv -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub loss: LossKind,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            batch_size: 32,
            patience: 10,
            weight_decay: 0.0,
            learning_rate: 1e-3,
            dropout_rate: 0.0,
            seed: 0,
            shuffle: false,
            loss: LossKind::Mse,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "max_epochs must be at least 1".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 0.5]",
                self.dropout_rate
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be nonnegative".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch losses (data term only) of a training run. Epochs count from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainTrace {
    /// `epoch,train_loss,val_loss` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Csv {
            line: 0,
            message: e.to_string(),
        };
        w.write_record(["epoch", "train_loss", "val_loss"])
            .map_err(err)?;
        for (i, (a, b)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            w.write_record([(i + 1).to_string(), a.to_string(), b.to_string()])
                .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn train<N: Network>(
    net: N,
    config: &TrainConfig,
    train: &WindowedData,
    val: &WindowedData,
) -> Result<(N, TrainTrace)> {
    train_with_hook(net, config, train, val, &mut |_, _| {})
}

/// Train from the initial parameters in `net`.
///
/// After every epoch the validation loss is recorded (the training loss
/// stands in when `val` is empty); training stops once it has not improved
/// for `patience` epochs, and the parameters from the best epoch are
/// returned. `hook` sees the current parameters after every epoch.
pub fn train_with_hook<N: Network>(
    mut net: N,
    config: &TrainConfig,
    train: &WindowedData,
    val: &WindowedData,
    hook: &mut dyn FnMut(usize, &N),
) -> Result<(N, TrainTrace)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    net.check_data(train)?;
    if !val.is_empty() {
        net.check_data(val)?;
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_0bde);
    let mut dropout = DropoutState::new(config.dropout_rate, config.seed.wrapping_add(1));
    let mut adam = Adam::new(config.learning_rate, net.parameter_len());
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut trace = TrainTrace {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best = (f64::INFINITY, net.clone());
    for epoch in 1..=config.max_epochs {
        if config.shuffle {
            order.shuffle(&mut order_rng);
        }
        for batch in order.chunks(config.batch_size) {
            let (_, mut grad) = net.data_gradient(train, batch, config.loss, &mut dropout);
            add_decay(&net, &mut grad, config.weight_decay);
            if let Some(max_norm) = config.clip_norm {
                clip(&mut grad, max_norm);
            }
            adam.step(&mut net, &grad);
        }
        let train_loss = config
            .loss
            .value(train.targets(), &net.predict_all(train))?;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            config.loss.value(val.targets(), &net.predict_all(val))?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.train_loss.push(train_loss);
        trace.val_loss.push(val_loss);
        trace.stopped_epoch = epoch;
        hook(epoch, &net);
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            trace.best_epoch = epoch;
        } else if epoch - trace.best_epoch >= config.patience {
            break;
        }
    }
    Ok((best.1, trace))
}
