use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, DropoutState, LossKind, Network, WindowedData};
use crate::error::{Error, Result};

/// Layer sizes and activations of a feedforward network with one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// `(M₁, …, M_L)`; empty for the linear network.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, hidden_activation: Activation) -> Self {
        Self {
            input_dim,
            hidden,
            hidden_activation,
            output_activation: Activation::Linear,
        }
    }

    /// No hidden layer: `ŷ = β₀ + β₁ᵀx`.
    pub fn linear(input_dim: usize) -> Self {
        Self::new(input_dim, vec![], Activation::Linear)
    }

    /// `M₁(p+1) + M₂(M₁+1) + … + M_L + 1`.
    pub fn parameter_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for &m in &self.hidden {
            total += m * (fan_in + 1);
            fan_in = m;
        }
        total + fan_in + 1
    }
}

/// `out × in` weights and `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub(crate) fn zeros(out: usize, input: usize) -> Self {
        Self {
            weights: Array2::zeros((out, input)),
            bias: Array1::zeros(out),
        }
    }

    pub(crate) fn uniform(out: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self {
            weights: Array2::from_shape_fn((out, input), |_| rng.gen_range(-bound..bound)),
            bias: Array1::zeros(out),
        }
    }

    /// `a Wᵀ + b` for a batch `a` (batch × in).
    pub(crate) fn affine(&self, a: &Array2<f64>) -> Array2<f64> {
        a.dot(&self.weights.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let mut fan_in = spec.input_dim;
        let mut hidden = Vec::new();
        for &m in &spec.hidden {
            hidden.push(DenseLayer::zeros(m, fan_in));
            fan_in = m;
        }
        Self {
            spec: spec.clone(),
            hidden,
            output: DenseLayer::zeros(1, fan_in),
        }
    }

    /// Weights uniform on `±1/√fan_in`, biases zero.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = spec.input_dim;
        let mut hidden = Vec::new();
        for &m in &spec.hidden {
            hidden.push(DenseLayer::uniform(m, fan_in, &mut rng));
            fan_in = m;
        }
        let output = DenseLayer::uniform(1, fan_in, &mut rng);
        Self {
            spec: spec.clone(),
            hidden,
            output,
        }
    }

    fn batch_inputs(data: &WindowedData, batch: &[usize]) -> Array2<f64> {
        data.step(batch, 0)
    }
}

/// Single-sample forward pass: prediction and the activations of every
/// hidden layer.
pub fn forward(params: &MlpParams, x: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    if x.len() != params.spec.input_dim {
        return Err(Error::Shape(format!(
            "input has {} values, network expects {}",
            x.len(),
            params.spec.input_dim
        )));
    }
    let mut a = Array1::from(x.to_vec());
    let mut hidden = Vec::with_capacity(params.hidden.len());
    for layer in &params.hidden {
        a = (layer.weights.dot(&a) + &layer.bias).mapv(|v| params.spec.hidden_activation.apply(v));
        hidden.push(a.to_vec());
    }
    let z = params.output.weights.row(0).dot(&a) + params.output.bias[0];
    Ok((params.spec.output_activation.apply(z), hidden))
}

impl Network for MlpParams {
    fn predict(&self, data: &WindowedData, batch: &[usize]) -> Vec<f64> {
        let mut a = Self::batch_inputs(data, batch);
        for layer in &self.hidden {
            a = layer
                .affine(&a)
                .mapv(|v| self.spec.hidden_activation.apply(v));
        }
        let z = self.output.affine(&a);
        z.column(0)
            .iter()
            .map(|&v| self.spec.output_activation.apply(v))
            .collect()
    }

    fn data_gradient(
        &self,
        data: &WindowedData,
        batch: &[usize],
        loss: LossKind,
        dropout: &mut DropoutState,
    ) -> (f64, Self) {
        let bsz = batch.len() as f64;
        let hid_act = self.spec.hidden_activation;
        let out_act = self.spec.output_activation;

        // Forward, keeping pre-activations, (masked) activations and masks.
        let mut acts = vec![Self::batch_inputs(data, batch)];
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut masks = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let z = layer.affine(acts.last().unwrap());
            let mut a = z.mapv(|v| hid_act.apply(v));
            let mask = dropout.mask(a.nrows(), a.ncols());
            if let Some(m) = &mask {
                a *= m;
            }
            pre.push(z);
            masks.push(mask);
            acts.push(a);
        }
        let z_out = self.output.affine(acts.last().unwrap());

        let mut value = 0.0;
        let mut dz = Array2::<f64>::zeros((batch.len(), 1));
        for (b, &i) in batch.iter().enumerate() {
            let zo = z_out[[b, 0]];
            let yhat = out_act.apply(zo);
            let y = data.targets()[i];
            value += match loss {
                LossKind::Mse => (yhat - y) * (yhat - y),
                LossKind::Mae => (yhat - y).abs(),
            };
            dz[[b, 0]] = loss.derivative(y, yhat) * out_act.derivative(zo) / bsz;
        }
        value /= bsz;

        let mut grad = self.zeros_like();
        let last = acts.last().unwrap();
        grad.output.weights = dz.t().dot(last).as_standard_layout().into_owned();
        grad.output.bias = dz.sum_axis(Axis(0));
        let mut da = dz.dot(&self.output.weights);
        for l in (0..self.hidden.len()).rev() {
            if let Some(m) = &masks[l] {
                da *= m;
            }
            let dzl = &da * &pre[l].mapv(|v| hid_act.derivative(v));
            grad.hidden[l].weights = dzl.t().dot(&acts[l]).as_standard_layout().into_owned();
            grad.hidden[l].bias = dzl.sum_axis(Axis(0));
            if l > 0 {
                da = dzl.dot(&self.hidden[l].weights);
            }
        }
        (value, grad)
    }

    fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut v = Vec::new();
        for l in self.hidden.iter().chain(std::iter::once(&self.output)) {
            v.push((l.weights.as_slice().expect("standard layout"), true));
            v.push((l.bias.as_slice().expect("standard layout"), false));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut v = Vec::new();
        for l in self
            .hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.output))
        {
            v.push((l.weights.as_slice_mut().expect("standard layout"), true));
            v.push((l.bias.as_slice_mut().expect("standard layout"), false));
        }
        v
    }

    fn check_data(&self, data: &WindowedData) -> Result<()> {
        if data.window() != 1 || data.features() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "feedforward network expects window 1 with {} features, got window {} with {}",
                self.spec.input_dim,
                data.window(),
                data.features()
            )));
        }
        Ok(())
    }
}
