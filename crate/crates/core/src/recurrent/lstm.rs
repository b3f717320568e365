//! Long short-term memory networks with one or two stacked layers.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{sigmoid, DenseLayer, DropoutState, LossKind, Network, WindowedData};

/// Gate blocks, in the order their rows are stacked in every layer matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_dim: usize,
    /// Cells per layer; one or two layers.
    pub hidden: Vec<usize>,
}

impl LstmSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Self> {
        let s = Self { input_dim, hidden };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument(
                "LSTM needs at least one input".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.len() > 2 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "LSTM supports 1 or 2 nonempty layers, got {:?}",
                self.hidden
            )));
        }
        Ok(())
    }
}

/// One layer of `M` cells. Each matrix stacks the four gate blocks
/// (`Gate` order) along its rows, so `w_x` is `4M × p_in`, `w_h` is
/// `4M × M` and `bias` has `4M` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LstmLayer {
    pub fn zeros(input_dim: usize, cells: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * cells, input_dim)),
            w_h: Array2::zeros((4 * cells, cells)),
            bias: Array1::zeros(4 * cells),
        }
    }

    pub fn cells(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }

    /// Rows of the stacked matrices belonging to `gate`.
    pub fn block(gate: Gate, cells: usize) -> std::ops::Range<usize> {
        let g = gate as usize;
        g * cells..(g + 1) * cells
    }
}

/// Hidden output `h` and memory cell `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub s: Vec<f64>,
}

impl CellState {
    pub fn zeros(cells: usize) -> Self {
        Self {
            h: vec![0.0; cells],
            s: vec![0.0; cells],
        }
    }
}

/// Gate activations produced by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateValues {
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub spec: LstmSpec,
    pub layers: Vec<LstmLayer>,
    /// Linear readout from the last layer's `h`.
    pub output: DenseLayer,
}

impl LstmParams {
    pub fn zeros(spec: &LstmSpec) -> Result<Self> {
        spec.validate()?;
        let mut fan_in = spec.input_dim;
        let mut layers = Vec::new();
        for &m in &spec.hidden {
            layers.push(LstmLayer::zeros(fan_in, m));
            fan_in = m;
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
            output: DenseLayer::zeros(1, fan_in),
        })
    }

    /// Weights uniform on `±1/√fan_in`, forget-gate bias 1, other biases 0.
    pub fn init(spec: &LstmSpec, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut p.layers {
            let m = layer.cells();
            let b = 1.0 / ((layer.input_dim() + m) as f64).sqrt();
            layer.w_x.mapv_inplace(|_| rng.gen_range(-b..b));
            layer.w_h.mapv_inplace(|_| rng.gen_range(-b..b));
            layer
                .bias
                .slice_mut(s![LstmLayer::block(Gate::Forget, m)])
                .fill(1.0);
        }
        p.output = DenseLayer::uniform(1, *spec.hidden.last().unwrap(), &mut rng);
        Ok(p)
    }
}

/// One cell update, also reporting the gate activations.
pub fn lstm_cell_step_with_gates(
    layer: &LstmLayer,
    x_t: &[f64],
    prev: &CellState,
) -> Result<(CellState, GateValues)> {
    let m = layer.cells();
    if x_t.len() != layer.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} values, layer expects {}",
            x_t.len(),
            layer.input_dim()
        )));
    }
    if prev.h.len() != m || prev.s.len() != m {
        return Err(Error::Shape(format!("state width differs from {m} cells")));
    }
    let a = layer.w_x.dot(&Array1::from(x_t.to_vec()))
        + layer.w_h.dot(&Array1::from(prev.h.clone()))
        + &layer.bias;
    let block = |g: Gate| a.slice(s![LstmLayer::block(g, m)]).to_vec();
    let gates = GateValues {
        input: block(Gate::Input).into_iter().map(sigmoid).collect(),
        forget: block(Gate::Forget).into_iter().map(sigmoid).collect(),
        output: block(Gate::Output).into_iter().map(sigmoid).collect(),
        candidate: block(Gate::Candidate).into_iter().map(f64::tanh).collect(),
    };
    let s: Vec<f64> = (0..m)
        .map(|k| gates.forget[k] * prev.s[k] + gates.input[k] * gates.candidate[k])
        .collect();
    let h = (0..m).map(|k| s[k].tanh() * gates.output[k]).collect();
    Ok((CellState { h, s }, gates))
}

pub fn lstm_cell_step(layer: &LstmLayer, x_t: &[f64], prev: &CellState) -> Result<CellState> {
    Ok(lstm_cell_step_with_gates(layer, x_t, prev)?.0)
}

/// The `h` sequence of one layer over a `T × p` input, from zero state.
pub fn lstm_hidden_sequence(layer: &LstmLayer, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut state = CellState::zeros(layer.cells());
    let mut out = Array2::zeros((xs.nrows(), layer.cells()));
    for (t, row) in xs.rows().into_iter().enumerate() {
        state = lstm_cell_step(layer, &row.to_vec(), &state)?;
        out.row_mut(t).assign(&Array1::from(state.h.clone()));
    }
    Ok(out)
}

/// Prediction at the end of a `T × p` window.
pub fn lstm_forward(params: &LstmParams, window: ArrayView2<f64>) -> Result<f64> {
    if window.nrows() == 0 {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let mut seq = window.to_owned();
    for layer in &params.layers {
        seq = lstm_hidden_sequence(layer, seq.view())?;
    }
    let h = seq.row(seq.nrows() - 1);
    Ok(params.output.bias[0] + params.output.weights.row(0).dot(&h))
}

struct LayerCache {
    xs: Vec<Array2<f64>>,
    /// Activated gates per step (B × 4M).
    gates: Vec<Array2<f64>>,
    /// `s` and `h` per step, with the zero state at index 0.
    s: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
    tanh_s: Vec<Array2<f64>>,
}

fn layer_forward(layer: &LstmLayer, xs: Vec<Array2<f64>>) -> LayerCache {
    let bsz = xs[0].nrows();
    let m = layer.cells();
    let mut c = LayerCache {
        gates: Vec::with_capacity(xs.len()),
        s: vec![Array2::zeros((bsz, m))],
        h: vec![Array2::zeros((bsz, m))],
        tanh_s: Vec::with_capacity(xs.len()),
        xs,
    };
    let wxt = layer.w_x.t();
    let wht = layer.w_h.t();
    for t in 0..c.xs.len() {
        let mut a = c.xs[t].dot(&wxt) + c.h[t].dot(&wht) + &layer.bias;
        a.slice_mut(s![.., 0..3 * m]).mapv_inplace(sigmoid);
        a.slice_mut(s![.., 3 * m..]).mapv_inplace(f64::tanh);
        let i = a.slice(s![.., 0..m]);
        let f = a.slice(s![.., m..2 * m]);
        let o = a.slice(s![.., 2 * m..3 * m]);
        let g = a.slice(s![.., 3 * m..]);
        let st = &f * &c.s[t] + &i * &g;
        let ts = st.mapv(f64::tanh);
        let ht = &ts * &o;
        c.gates.push(a);
        c.s.push(st);
        c.tanh_s.push(ts);
        c.h.push(ht);
    }
    c
}

/// Reverse accumulation through one layer. `dh_in[t]` is the gradient
/// reaching `h_t` from above. Returns the input gradients when asked.
fn layer_backward(
    layer: &LstmLayer,
    c: &LayerCache,
    dh_in: &[Option<Array2<f64>>],
    grad: &mut LstmLayer,
    want_dx: bool,
) -> Vec<Array2<f64>> {
    let m = layer.cells();
    let steps = c.xs.len();
    let bsz = c.xs[0].nrows();
    let mut dx = vec![Array2::zeros((0, 0)); if want_dx { steps } else { 0 }];
    let mut dh_next = Array2::<f64>::zeros((bsz, m));
    let mut ds_next = Array2::<f64>::zeros((bsz, m));
    let mut da = Array2::<f64>::zeros((bsz, 4 * m));
    for t in (0..steps).rev() {
        let mut dh = dh_next;
        if let Some(d) = &dh_in[t] {
            dh += d;
        }
        let a = &c.gates[t];
        let i = a.slice(s![.., 0..m]);
        let f = a.slice(s![.., m..2 * m]);
        let o = a.slice(s![.., 2 * m..3 * m]);
        let g = a.slice(s![.., 3 * m..]);
        let ts = &c.tanh_s[t];
        let ds = &ds_next + &(&dh * &o * &ts.mapv(|v| 1.0 - v * v));
        let do_ = &dh * ts;
        ndarray::Zip::from(da.slice_mut(s![.., 0..m]))
            .and(&ds)
            .and(&g)
            .and(&i)
            .for_each(|d, &ds, &g, &i| *d = ds * g * i * (1.0 - i));
        ndarray::Zip::from(da.slice_mut(s![.., m..2 * m]))
            .and(&ds)
            .and(&c.s[t])
            .and(&f)
            .for_each(|d, &ds, &sp, &f| *d = ds * sp * f * (1.0 - f));
        ndarray::Zip::from(da.slice_mut(s![.., 2 * m..3 * m]))
            .and(&do_)
            .and(&o)
            .for_each(|d, &dv, &o| *d = dv * o * (1.0 - o));
        ndarray::Zip::from(da.slice_mut(s![.., 3 * m..]))
            .and(&ds)
            .and(&i)
            .and(&g)
            .for_each(|d, &ds, &i, &g| *d = ds * i * (1.0 - g * g));
        ds_next = ds * f;
        grad.w_x += &da.t().dot(&c.xs[t]);
        grad.w_h += &da.t().dot(&c.h[t]);
        grad.bias += &da.sum_axis(Axis(0));
        if want_dx {
            dx[t] = da.dot(&layer.w_x);
        }
        dh_next = da.dot(&layer.w_h);
    }
    dx
}

impl LstmParams {
    fn run(&self, data: &WindowedData, batch: &[usize]) -> Vec<LayerCache> {
        let mut xs: Vec<Array2<f64>> = (0..data.window()).map(|t| data.step(batch, t)).collect();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let c = layer_forward(layer, xs);
            xs = c.h[1..].to_vec();
            caches.push(c);
        }
        caches
    }
}

impl Network for LstmParams {
    fn predict(&self, data: &WindowedData, batch: &[usize]) -> Vec<f64> {
        let caches = self.run(data, batch);
        let h = caches.last().unwrap().h.last().unwrap();
        self.output.affine(h).column(0).to_vec()
    }

    fn data_gradient(
        &self,
        data: &WindowedData,
        batch: &[usize],
        loss: LossKind,
        dropout: &mut DropoutState,
    ) -> (f64, Self) {
        let caches = self.run(data, batch);
        let bsz = batch.len() as f64;
        let mut h_top = caches.last().unwrap().h.last().unwrap().clone();
        let mask = dropout.mask(h_top.nrows(), h_top.ncols());
        if let Some(mk) = &mask {
            h_top *= mk;
        }
        let yhat = self.output.affine(&h_top);
        let mut value = 0.0;
        let mut du = Array2::<f64>::zeros((batch.len(), 1));
        for (b, &i) in batch.iter().enumerate() {
            let y = data.targets()[i];
            let e = yhat[[b, 0]] - y;
            value += match loss {
                LossKind::Mse => e * e,
                LossKind::Mae => e.abs(),
            };
            du[[b, 0]] = loss.derivative(y, yhat[[b, 0]]) / bsz;
        }
        value /= bsz;

        let mut g = self.zeros_like();
        g.output.weights = du.t().dot(&h_top).as_standard_layout().into_owned();
        g.output.bias = du.sum_axis(Axis(0));
        let mut dh_top = du.dot(&self.output.weights);
        if let Some(mk) = &mask {
            dh_top *= mk;
        }
        let steps = data.window();
        let mut dh_in: Vec<Option<Array2<f64>>> = vec![None; steps];
        dh_in[steps - 1] = Some(dh_top);
        for l in (0..self.layers.len()).rev() {
            let dx = layer_backward(&self.layers[l], &caches[l], &dh_in, &mut g.layers[l], l > 0);
            dh_in = dx.into_iter().map(Some).collect();
        }
        (value, g)
    }

    fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.push((l.w_x.as_slice().unwrap(), true));
            v.push((l.w_h.as_slice().unwrap(), true));
            v.push((l.bias.as_slice().unwrap(), false));
        }
        v.push((self.output.weights.as_slice().unwrap(), true));
        v.push((self.output.bias.as_slice().unwrap(), false));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut v = Vec::new();
        for l in &mut self.layers {
            v.push((l.w_x.as_slice_mut().unwrap(), true));
            v.push((l.w_h.as_slice_mut().unwrap(), true));
            v.push((l.bias.as_slice_mut().unwrap(), false));
        }
        v.push((self.output.weights.as_slice_mut().unwrap(), true));
        v.push((self.output.bias.as_slice_mut().unwrap(), false));
        v
    }

    fn check_data(&self, data: &WindowedData) -> Result<()> {
        if data.features() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "LSTM expects {} features, got {}",
                self.spec.input_dim,
                data.features()
            )));
        }
        Ok(())
    }
}
