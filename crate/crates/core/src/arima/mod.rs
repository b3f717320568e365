//! Regression with ARIMA(p, d, q) errors.
//!
//! The model is `y_t = c + βᵀx_t + η_t` with `φ(B)(1-B)^d η_t = θ(B) ε_t`.
//! With `d > 0` the regression is carried out on the differenced scale: `y`
//! and every regressor column are differenced identically and `c` becomes a
//! drift term.
//!
//! Estimation minimises the conditional sum of squares (pre-sample errors
//! set to zero). For fixed ARMA coefficients the objective is quadratic in
//! `(c, β)`, so those are profiled out by least squares and the simplex
//! search runs over the ARMA coefficients only, in an unconstrained space
//! where each partial autocorrelation is `tanh` of a free parameter.

mod estimate;
mod forecast;

use serde::{Deserialize, Serialize};

pub use estimate::{
    css_objective, fit, fit_from, fit_with, select_order, ArimaParams, SelectOptions, MAX_ORDER_CAP,
};
pub use forecast::{forecast, one_step_predictions, Forecast, Z80, Z95};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        let order = Self { p, d, q };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 2 {
            return Err(Error::InvalidArgument(format!(
                "differencing order {} is not one of 0, 1, 2",
                self.d
            )));
        }
        Ok(())
    }

    /// Number of leading observations that only seed the recursions.
    pub fn conditioning(&self) -> usize {
        self.p.max(self.q)
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// Recursion state at the end of the estimation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EndState {
    /// Last `p` regression errors on the differenced scale, oldest first.
    pub eta: Vec<f64>,
    /// Last `q` innovations, oldest first.
    pub resid: Vec<f64>,
    /// Last `d` observations of `y` (levels), oldest first.
    pub y: Vec<f64>,
    /// Last `d` rows of the regressors (levels), oldest first.
    pub x: Vec<Vec<f64>>,
}

/// A fitted dynamic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynRegModel {
    pub order: ArimaOrder,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub aic: f64,
    pub loglik: f64,
    pub n_eff: usize,
    pub css: f64,
    pub state: EndState,
}

impl DynRegModel {
    /// Free parameters counted by the AIC: ARMA coefficients, regression
    /// coefficients, intercept and innovation variance.
    pub fn parameter_count(&self) -> usize {
        self.order.p + self.order.q + self.beta.len() + 2
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.order.validate()?;
        if model.phi.len() != model.order.p || model.theta.len() != model.order.q {
            return Err(Error::Shape(
                "coefficient lengths disagree with the order".into(),
            ));
        }
        Ok(model)
    }
}

/// Apply `(1-B)^d`.
pub fn difference(y: &[f64], d: usize) -> Result<Vec<f64>> {
    if d > 2 {
        return Err(Error::InvalidArgument(format!(
            "differencing order {d} is not one of 0, 1, 2"
        )));
    }
    if y.len() <= d {
        return Err(Error::InsufficientData(format!(
            "cannot difference {} values {d} times",
            y.len()
        )));
    }
    let mut out = y.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Coefficients of the lagged regression equivalent to a regression with
/// AR(1) errors.
///
/// `y_t = β₀ + β₁x_t + η_t`, `η_t = φη_{t-1} + ε_t` rearranges to
/// `y_t = (1-φ)β₀ + β₁x_t + φy_{t-1} - φβ₁x_{t-1} + ε_t`; the result is
/// `(intercept, coef_x, coef_ylag, coef_xlag)`.
pub fn ar1_equivalent_coeffs(beta0: f64, beta1: f64, phi: f64) -> (f64, f64, f64, f64) {
    ((1.0 - phi) * beta0, beta1, phi, -phi * beta1)
}
