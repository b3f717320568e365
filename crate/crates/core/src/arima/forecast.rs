use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::DynRegModel;
use crate::error::{Error, Result};
use crate::poly;

/// Standard normal quantiles for central 80% and 95% intervals.
pub const Z80: f64 = 1.2815515655;
pub const Z95: f64 = 1.9599639845;

/// Point forecasts with 80% and 95% prediction intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub mean: Vec<f64>,
    pub lower80: Vec<f64>,
    pub upper80: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}

/// Coefficients `c_1..c_d` of `(1-B)^d = 1 + Σ c_i B^i`.
fn differencing_poly(d: usize) -> Vec<f64> {
    let mut full = vec![1.0];
    for _ in 0..d {
        full = poly::multiply(&full, &[1.0, -1.0]);
    }
    full[1..].to_vec()
}

/// Tracks the level and differenced-scale history while stepping forward.
struct Stepper<'a> {
    model: &'a DynRegModel,
    diff: Vec<f64>,
    eta: Vec<f64>,
    resid: Vec<f64>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a DynRegModel) -> Self {
        Self {
            model,
            diff: differencing_poly(model.order.d),
            eta: model.state.eta.clone(),
            resid: model.state.resid.clone(),
            y: model.state.y.clone(),
            x: model.state.x.clone(),
        }
    }

    /// `Δ^d x_t · β` for a new regressor row.
    fn regression(&self, row: &[f64]) -> f64 {
        let mut xd = row.to_vec();
        for (i, c) in self.diff.iter().enumerate() {
            let past = &self.x[self.x.len() - 1 - i];
            for (v, p) in xd.iter_mut().zip(past) {
                *v += c * p;
            }
        }
        xd.iter().zip(&self.model.beta).map(|(a, b)| a * b).sum()
    }

    fn eta_prediction(&self) -> f64 {
        let m = self.model;
        let mut v = 0.0;
        for (i, ph) in m.phi.iter().enumerate() {
            v += ph * self.eta[self.eta.len() - 1 - i];
        }
        for (j, th) in m.theta.iter().enumerate() {
            v += th * self.resid[self.resid.len() - 1 - j];
        }
        v
    }

    /// Map a differenced-scale value to the level scale.
    fn level(&self, w: f64) -> f64 {
        let mut v = w;
        for (i, c) in self.diff.iter().enumerate() {
            v -= c * self.y[self.y.len() - 1 - i];
        }
        v
    }

    fn push(&mut self, y: f64, eta: f64, resid: f64, row: &[f64]) {
        let m = self.model;
        if m.order.p > 0 {
            self.eta.remove(0);
            self.eta.push(eta);
        }
        if m.order.q > 0 {
            self.resid.remove(0);
            self.resid.push(resid);
        }
        if m.order.d > 0 {
            self.y.remove(0);
            self.y.push(y);
            self.x.remove(0);
            self.x.push(row.to_vec());
        }
    }
}

fn check_future(model: &DynRegModel, x: ArrayView2<'_, f64>, rows: usize) -> Result<()> {
    if x.ncols() != model.beta.len() {
        return Err(Error::Shape(format!(
            "model has {} regressors, future design has {} columns",
            model.beta.len(),
            x.ncols()
        )));
    }
    if x.nrows() != rows {
        return Err(Error::Shape(format!(
            "expected {rows} future rows, got {}",
            x.nrows()
        )));
    }
    Ok(())
}

/// Forecast `h` steps beyond the estimation sample given future regressors.
pub fn forecast(model: &DynRegModel, x_future: ArrayView2<'_, f64>, h: usize) -> Result<Forecast> {
    if h == 0 {
        return Err(Error::InvalidArgument(
            "forecast horizon must be at least 1".into(),
        ));
    }
    check_future(model, x_future, h)?;
    let mut st = Stepper::new(model);
    let mut mean = Vec::with_capacity(h);
    for t in 0..h {
        let row = x_future.row(t).to_vec();
        let eta = st.eta_prediction();
        let w = model.intercept + st.regression(&row) + eta;
        let y = st.level(w);
        mean.push(y);
        st.push(y, eta, 0.0, &row);
    }

    let psi = poly::psi_weights(&model.phi, &model.theta, model.order.d, h);
    let sigma = model.sigma2.sqrt();
    let mut cum = 0.0;
    let mut out = Forecast {
        mean: mean.clone(),
        lower80: Vec::with_capacity(h),
        upper80: Vec::with_capacity(h),
        lower95: Vec::with_capacity(h),
        upper95: Vec::with_capacity(h),
    };
    for (t, mu) in mean.iter().enumerate() {
        cum += psi[t] * psi[t];
        let se = sigma * cum.sqrt();
        out.lower80.push(mu - Z80 * se);
        out.upper80.push(mu + Z80 * se);
        out.lower95.push(mu - Z95 * se);
        out.upper95.push(mu + Z95 * se);
    }
    Ok(out)
}

/// One-step-ahead predictions over observations that follow the
/// estimation sample: each prediction uses the observed history up to the
/// previous day.
pub fn one_step_predictions(
    model: &DynRegModel,
    y_new: &[f64],
    x_new: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    check_future(model, x_new, y_new.len())?;
    let mut st = Stepper::new(model);
    let mut preds = Vec::with_capacity(y_new.len());
    for (t, &y) in y_new.iter().enumerate() {
        let row = x_new.row(t).to_vec();
        let reg = model.intercept + st.regression(&row);
        let eta_hat = st.eta_prediction();
        preds.push(st.level(reg + eta_hat));
        let w_obs = y - st.level(0.0);
        let eta = w_obs - reg;
        st.push(y, eta, eta - eta_hat, &row);
    }
    Ok(preds)
}
