//! Jordan and Elman networks: one hidden layer with a feedback term.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{Activation, DropoutState, LossKind, Network, WindowedData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimpleKind {
    /// Feeds back the previous prediction.
    Jordan,
    /// Feeds back the previous hidden vector.
    Elman,
}

/// Parameters of a Jordan or Elman network with `M` hidden units.
///
/// `alpha2` is `M × 1` for Jordan and `M × M` for Elman.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub kind: SimpleKind,
    pub alpha0: Array1<f64>,
    pub alpha1: Array2<f64>,
    pub alpha2: Array2<f64>,
    /// Output bias, stored as a length-1 vector.
    pub beta0: Array1<f64>,
    pub beta1: Array1<f64>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl RnnParams {
    pub fn zeros(
        kind: SimpleKind,
        input_dim: usize,
        hidden: usize,
        hidden_activation: Activation,
    ) -> Self {
        let fb = match kind {
            SimpleKind::Jordan => 1,
            SimpleKind::Elman => hidden,
        };
        Self {
            kind,
            alpha0: Array1::zeros(hidden),
            alpha1: Array2::zeros((hidden, input_dim)),
            alpha2: Array2::zeros((hidden, fb)),
            beta0: Array1::zeros(1),
            beta1: Array1::zeros(hidden),
            hidden_activation,
            output_activation: Activation::Linear,
        }
    }

    /// Weights uniform on `±1/√fan_in`, biases zero.
    pub fn init(
        kind: SimpleKind,
        input_dim: usize,
        hidden: usize,
        hidden_activation: Activation,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros(kind, input_dim, hidden, hidden_activation);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = 1.0 / ((input_dim + p.alpha2.ncols()) as f64).sqrt();
        p.alpha1.mapv_inplace(|_| rng.gen_range(-b..b));
        p.alpha2.mapv_inplace(|_| rng.gen_range(-b..b));
        let b = 1.0 / (hidden as f64).sqrt();
        p.beta1.mapv_inplace(|_| rng.gen_range(-b..b));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.alpha1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.alpha0.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn output(&self, h: &Array1<f64>) -> f64 {
        self.output_activation
            .apply(self.beta0[0] + self.beta1.dot(h))
    }

    /// Prediction at the end of a `T × p` window, starting from zero state.
    pub fn forward_window(&self, window: ArrayView2<f64>) -> Result<f64> {
        self.trajectory(window)?
            .last()
            .copied()
            .ok_or_else(|| Error::InvalidArgument("empty window".into()))
    }

    /// Predictions at every step of a window.
    pub fn trajectory(&self, window: ArrayView2<f64>) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(window.nrows());
        let mut yprev = 0.0;
        let mut hprev = vec![0.0; self.hidden_dim()];
        for row in window.rows() {
            let x = row.to_vec();
            let (h, y) = match self.kind {
                SimpleKind::Jordan => jordan_step(self, &x, yprev)?,
                SimpleKind::Elman => elman_step(self, &x, &hprev)?,
            };
            yprev = y;
            hprev = h;
            out.push(y);
        }
        Ok(out)
    }
}

/// One Jordan step: hidden values and the prediction fed back next step.
pub fn jordan_step(params: &RnnParams, x_t: &[f64], yhat_prev: f64) -> Result<(Vec<f64>, f64)> {
    if params.kind != SimpleKind::Jordan {
        return Err(Error::InvalidArgument(
            "jordan_step needs Jordan parameters".into(),
        ));
    }
    params.check_input(x_t)?;
    let x = Array1::from(x_t.to_vec());
    let z =
        &params.alpha0 + &params.alpha1.dot(&x) + &(params.alpha2.column(0).to_owned() * yhat_prev);
    let h = z.mapv(|v| params.hidden_activation.apply(v));
    let y = params.output(&h);
    Ok((h.to_vec(), y))
}

/// One Elman step from the previous hidden vector.
pub fn elman_step(params: &RnnParams, x_t: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, f64)> {
    if params.kind != SimpleKind::Elman {
        return Err(Error::InvalidArgument(
            "elman_step needs Elman parameters".into(),
        ));
    }
    params.check_input(x_t)?;
    if h_prev.len() != params.hidden_dim() {
        return Err(Error::Shape(format!(
            "hidden state has {} values, expected {}",
            h_prev.len(),
            params.hidden_dim()
        )));
    }
    let x = Array1::from(x_t.to_vec());
    let hp = Array1::from(h_prev.to_vec());
    let z = &params.alpha0 + &params.alpha1.dot(&x) + &params.alpha2.dot(&hp);
    let h = z.mapv(|v| params.hidden_activation.apply(v));
    let y = params.output(&h);
    Ok((h.to_vec(), y))
}

struct Cache {
    xs: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
    /// Hidden values per step; Elman keeps the zero initial state in front.
    h: Vec<Array2<f64>>,
    /// Jordan: pre-output and the fed-back prediction entering each step.
    u: Vec<Array1<f64>>,
    yprev: Vec<Array1<f64>>,
    mask: Option<Array2<f64>>,
    u_final: Array1<f64>,
}

impl RnnParams {
    fn run(&self, data: &WindowedData, batch: &[usize], dropout: &mut DropoutState) -> Cache {
        let bsz = batch.len();
        let m = self.hidden_dim();
        let act = self.hidden_activation;
        let mut c = Cache {
            xs: vec![],
            z: vec![],
            h: vec![],
            u: vec![],
            yprev: vec![],
            mask: None,
            u_final: Array1::zeros(bsz),
        };
        let mut yprev = Array1::<f64>::zeros(bsz);
        let mut hprev = Array2::<f64>::zeros((bsz, m));
        if self.kind == SimpleKind::Elman {
            c.h.push(hprev.clone());
        }
        let last = data.window() - 1;
        for t in 0..data.window() {
            let x = data.step(batch, t);
            let mut z = x.dot(&self.alpha1.t()) + &self.alpha0;
            match self.kind {
                SimpleKind::Jordan => {
                    let col = self.alpha2.column(0);
                    for (mut row, yp) in z.rows_mut().into_iter().zip(yprev.iter()) {
                        row.scaled_add(*yp, &col);
                    }
                }
                SimpleKind::Elman => z += &hprev.dot(&self.alpha2.t()),
            }
            let mut h = z.mapv(|v| act.apply(v));
            if t == last {
                c.mask = dropout.mask(bsz, m);
                if let Some(mk) = &c.mask {
                    h *= mk;
                }
            }
            if self.kind == SimpleKind::Jordan {
                let u = h.dot(&self.beta1) + self.beta0[0];
                c.yprev.push(std::mem::replace(
                    &mut yprev,
                    u.mapv(|v| self.output_activation.apply(v)),
                ));
                c.u.push(u);
            }
            c.xs.push(x);
            c.z.push(z);
            hprev = h.clone();
            c.h.push(h);
        }
        c.u_final = match self.kind {
            SimpleKind::Jordan => c.u.last().unwrap().clone(),
            SimpleKind::Elman => hprev.dot(&self.beta1) + self.beta0[0],
        };
        c
    }
}

impl Network for RnnParams {
    fn predict(&self, data: &WindowedData, batch: &[usize]) -> Vec<f64> {
        let mut off = DropoutState::new(0.0, 0);
        self.run(data, batch, &mut off)
            .u_final
            .iter()
            .map(|&u| self.output_activation.apply(u))
            .collect()
    }

    fn data_gradient(
        &self,
        data: &WindowedData,
        batch: &[usize],
        loss: LossKind,
        dropout: &mut DropoutState,
    ) -> (f64, Self) {
        let c = self.run(data, batch, dropout);
        let bsz = batch.len() as f64;
        let act = self.hidden_activation;
        let out = self.output_activation;
        let mut value = 0.0;
        let mut dyhat = Array1::<f64>::zeros(batch.len());
        for (b, &i) in batch.iter().enumerate() {
            let yhat = out.apply(c.u_final[b]);
            let y = data.targets()[i];
            value += match loss {
                LossKind::Mse => (yhat - y) * (yhat - y),
                LossKind::Mae => (yhat - y).abs(),
            };
            dyhat[b] = loss.derivative(y, yhat) / bsz;
        }
        value /= bsz;

        let mut g = self.zeros_like();
        let steps = c.xs.len();
        match self.kind {
            SimpleKind::Jordan => {
                let a2 = self.alpha2.column(0).to_owned();
                for t in (0..steps).rev() {
                    let du = &dyhat * &c.u[t].mapv(|v| out.derivative(v));
                    g.beta0[0] += du.sum();
                    g.beta1 += &c.h[t].t().dot(&du);
                    let mut dh = outer(&du, &self.beta1);
                    if t == steps - 1 {
                        if let Some(mk) = &c.mask {
                            dh *= mk;
                        }
                    }
                    let dz = dh * c.z[t].mapv(|v| act.derivative(v));
                    g.alpha0 += &dz.sum_axis(Axis(0));
                    g.alpha1 += &dz.t().dot(&c.xs[t]);
                    let mut ga2 = g.alpha2.column_mut(0);
                    ga2 += &dz.t().dot(&c.yprev[t]);
                    dyhat = dz.dot(&a2);
                }
            }
            SimpleKind::Elman => {
                let du = &dyhat * &c.u_final.mapv(|v| out.derivative(v));
                g.beta0[0] = du.sum();
                g.beta1 = c.h[steps].t().dot(&du).as_standard_layout().into_owned();
                let mut dh = outer(&du, &self.beta1);
                if let Some(mk) = &c.mask {
                    dh *= mk;
                }
                for t in (0..steps).rev() {
                    let dz = &dh * &c.z[t].mapv(|v| act.derivative(v));
                    g.alpha0 += &dz.sum_axis(Axis(0));
                    g.alpha1 += &dz.t().dot(&c.xs[t]);
                    g.alpha2 += &dz.t().dot(&c.h[t]);
                    dh = dz.dot(&self.alpha2);
                }
            }
        }
        (value, g)
    }

    fn tensors(&self) -> Vec<(&[f64], bool)> {
        vec![
            (self.alpha0.as_slice().unwrap(), false),
            (self.alpha1.as_slice().unwrap(), true),
            (self.alpha2.as_slice().unwrap(), true),
            (self.beta0.as_slice().unwrap(), false),
            (self.beta1.as_slice().unwrap(), true),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        vec![
            (self.alpha0.as_slice_mut().unwrap(), false),
            (self.alpha1.as_slice_mut().unwrap(), true),
            (self.alpha2.as_slice_mut().unwrap(), true),
            (self.beta0.as_slice_mut().unwrap(), false),
            (self.beta1.as_slice_mut().unwrap(), true),
        ]
    }

    fn check_data(&self, data: &WindowedData) -> Result<()> {
        if data.features() != self.input_dim() {
            return Err(Error::Shape(format!(
                "recurrent network expects {} features, got {}",
                self.input_dim(),
                data.features()
            )));
        }
        Ok(())
    }
}

pub(crate) fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{forward, loss_and_gradient, total_loss, DenseLayer, MlpParams, MlpSpec};

    #[test]
    fn zero_jordan_predicts_zero() {
        let p = RnnParams::zeros(SimpleKind::Jordan, 2, 3, Activation::Tanh);
        let w = Array2::from_elem((5, 2), 1.7);
        assert!(p.trajectory(w.view()).unwrap().iter().all(|y| *y == 0.0));
    }

    #[test]
    fn jordan_hand_recursion() {
        let mut p = RnnParams::zeros(SimpleKind::Jordan, 1, 1, Activation::Linear);
        p.alpha1[[0, 0]] = 1.0;
        p.beta1[0] = 1.0;
        p.alpha2[[0, 0]] = 0.5;
        let y = p.trajectory(Array2::ones((3, 1)).view()).unwrap();
        assert_eq!(y, vec![1.0, 1.5, 1.75]);

        let mut e = RnnParams::zeros(SimpleKind::Elman, 1, 1, Activation::Linear);
        e.alpha1[[0, 0]] = 1.0;
        e.beta1[0] = 1.0;
        e.alpha2[[0, 0]] = 0.5;
        assert_eq!(e.trajectory(Array2::ones((3, 1)).view()).unwrap(), y);
    }

    #[test]
    fn zero_elman_hidden_is_constant() {
        let p = RnnParams::zeros(SimpleKind::Elman, 2, 3, Activation::Sigmoid);
        let mut h = vec![0.0; 3];
        for _ in 0..4 {
            h = elman_step(&p, &[0.3, -1.0], &h).unwrap().0;
            assert_eq!(h, vec![0.5; 3]);
        }
    }

    #[test]
    fn elman_without_feedback_is_feedforward() {
        let p = RnnParams::init(SimpleKind::Elman, 3, 4, Activation::Tanh, 5);
        let mut p0 = p.clone();
        p0.alpha2.fill(0.0);
        let mlp = MlpParams {
            spec: MlpSpec::new(3, vec![4], Activation::Tanh),
            hidden: vec![DenseLayer {
                weights: p.alpha1.clone(),
                bias: p.alpha0.clone(),
            }],
            output: DenseLayer {
                weights: p.beta1.clone().insert_axis(Axis(0)),
                bias: p.beta0.clone(),
            },
        };
        let x = [0.2, -0.7, 1.1];
        let (_, y) = elman_step(&p0, &x, &[0.9, -0.1, 0.3, 0.0]).unwrap();
        assert!((y - forward(&mlp, &x).unwrap().0).abs() < 1e-15);
    }

    #[test]
    fn step_shape_errors() {
        let j = RnnParams::zeros(SimpleKind::Jordan, 2, 3, Activation::Tanh);
        let e = RnnParams::zeros(SimpleKind::Elman, 2, 3, Activation::Tanh);
        assert!(jordan_step(&j, &[1.0], 0.0).is_err());
        assert!(elman_step(&e, &[1.0, 2.0], &[0.0]).is_err());
        assert!(elman_step(&j, &[1.0, 2.0], &[0.0; 3]).is_err());
    }

    /// With linear units a Jordan network is an Elman network whose
    /// feedback matrix is `α₂β₁ᵀ` and whose bias absorbs `α₂β₀`.
    #[test]
    fn linear_jordan_collapses_to_elman() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, m) = (rng.gen_range(1..4), rng.gen_range(1..5));
            let mut j = RnnParams::init(SimpleKind::Jordan, p, m, Activation::Linear, seed);
            j.alpha0.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            j.beta0[0] = rng.gen_range(-0.5..0.5);
            let mut e = RnnParams::zeros(SimpleKind::Elman, p, m, Activation::Linear);
            e.alpha1 = j.alpha1.clone();
            e.beta0 = j.beta0.clone();
            e.beta1 = j.beta1.clone();
            let a2 = j.alpha2.column(0).to_owned();
            e.alpha2 = outer(&a2, &j.beta1);
            e.alpha0 = &j.alpha0 + &(a2 * j.beta0[0]);
            // The Elman zero state emits β₀, so Jordan starts from that output.
            let mut yj = j.beta0[0];
            let mut he = vec![0.0; m];
            for _ in 0..12 {
                let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
                yj = jordan_step(&j, &x, yj).unwrap().1;
                let (h, ye) = elman_step(&e, &x, &he).unwrap();
                he = h;
                assert!((yj - ye).abs() < 1e-10, "seed {seed}: {yj} vs {ye}");
            }
        }
    }

    #[test]
    fn batched_prediction_matches_scalar_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((12, 2), |_| rng.gen_range(-1.0..1.0));
        let data = WindowedData::new(x.clone(), vec![0.0; 8], 5).unwrap();
        for kind in [SimpleKind::Jordan, SimpleKind::Elman] {
            let p = RnnParams::init(kind, 2, 3, Activation::Tanh, 9);
            let preds = p.predict_all(&data);
            for (i, pred) in preds.iter().enumerate() {
                let y = p
                    .forward_window(x.slice(ndarray::s![i..i + 5, ..]))
                    .unwrap();
                assert!((pred - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, m, t) = (
                rng.gen_range(1..4),
                rng.gen_range(1..5),
                rng.gen_range(1..8),
            );
            let n = 6;
            let x = Array2::from_shape_fn((n + t - 1, p), |_| rng.gen_range(-1.0..1.0));
            let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let data = WindowedData::new(x, y, t).unwrap();
            let idx: Vec<usize> = (0..n).collect();
            for kind in [SimpleKind::Jordan, SimpleKind::Elman] {
                for act in [Activation::Tanh, Activation::Sigmoid, Activation::Linear] {
                    let mut net = RnnParams::init(kind, p, m, act, seed);
                    net.alpha0.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
                    net.beta0[0] = 0.2;
                    let (_, g) = loss_and_gradient(&net, &data, &idx, LossKind::Mse, 0.01);
                    let analytic: Vec<f64> = g
                        .tensors()
                        .iter()
                        .flat_map(|(t, _)| t.iter().copied())
                        .collect();
                    let mut k = 0;
                    for ti in 0..net.tensors().len() {
                        for j in 0..net.tensors()[ti].0.len() {
                            let h = 1e-5;
                            let mut a = net.clone();
                            a.tensors_mut()[ti].0[j] += h;
                            let mut b = net.clone();
                            b.tensors_mut()[ti].0[j] -= h;
                            let fd = (total_loss(&a, &data, &idx, LossKind::Mse, 0.01)
                                - total_loss(&b, &data, &idx, LossKind::Mse, 0.01))
                                / (2.0 * h);
                            let scale = fd.abs().max(analytic[k].abs()).max(1e-4);
                            assert!(
                                (fd - analytic[k]).abs() / scale < 1e-4,
                                "{kind:?} {act:?} seed {seed} param {k}: {fd} vs {}",
                                analytic[k]
                            );
                            k += 1;
                        }
                    }
                }
            }
        }
    }
}
