use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{difference, ArimaOrder, DynRegModel, EndState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::poly;

/// Hard cap on the AR and MA orders searched by [`select_order`].
pub const MAX_ORDER_CAP: usize = 5;

/// Largest partial autocorrelation magnitude reachable by the transform.
const PACF_LIMIT: f64 = 1.0 - 1e-9;

/// A full parameter vector for [`css_objective`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaParams {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl From<&DynRegModel> for ArimaParams {
    fn from(m: &DynRegModel) -> Self {
        Self {
            intercept: m.intercept,
            beta: m.beta.clone(),
            phi: m.phi.clone(),
            theta: m.theta.clone(),
        }
    }
}

/// `ε_t = η_t - Σφ_i η_{t-i} - Σθ_j ε_{t-j}` with zero pre-sample values.
pub(crate) fn arma_residuals(eta: &[f64], phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut eps = vec![0.0; eta.len()];
    for t in 0..eta.len() {
        let mut v = eta[t];
        for (i, ph) in phi.iter().enumerate() {
            if t > i {
                v -= ph * eta[t - i - 1];
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v -= th * eps[t - j - 1];
            }
        }
        eps[t] = v;
    }
    eps
}

/// The same filter applied to every column of `a` (time along rows).
fn filter_columns(a: &Array2<f64>, phi: &[f64], theta: &[f64]) -> Array2<f64> {
    let (n, k) = a.dim();
    let mut out = Array2::<f64>::zeros((n, k));
    for t in 0..n {
        let mut row = a.row(t).to_owned();
        for (i, ph) in phi.iter().enumerate() {
            if t > i {
                row.scaled_add(-ph, &a.row(t - i - 1));
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                row.scaled_add(-th, &out.row(t - j - 1));
            }
        }
        out.row_mut(t).assign(&row);
    }
    out
}

fn difference_columns(x: ArrayView2<'_, f64>, d: usize) -> Array2<f64> {
    let mut out = x.to_owned();
    for _ in 0..d {
        let n = out.nrows();
        out = &out.slice(s![1..n, ..]) - &out.slice(s![0..n - 1, ..]);
    }
    out
}

fn check_dims(y: &[f64], x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} regressor rows for {} observations",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Conditional sum of squares of `params` on `(y, x)`.
pub fn css_objective(
    params: &ArimaParams,
    y: &[f64],
    x: ArrayView2<'_, f64>,
    order: ArimaOrder,
) -> Result<f64> {
    order.validate()?;
    check_dims(y, x)?;
    if params.beta.len() != x.ncols()
        || params.phi.len() != order.p
        || params.theta.len() != order.q
    {
        return Err(Error::Shape(
            "parameter lengths disagree with the order or design".into(),
        ));
    }
    let all = std::iter::once(params.intercept)
        .chain(params.beta.iter().copied())
        .chain(params.phi.iter().copied())
        .chain(params.theta.iter().copied());
    if all.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite parameter value".into()));
    }
    let yd = difference(y, order.d)?;
    let xd = difference_columns(x, order.d);
    let beta = Array1::from(params.beta.clone());
    let eta: Vec<f64> = yd
        .iter()
        .zip(xd.dot(&beta))
        .map(|(yv, xb)| yv - params.intercept - xb)
        .collect();
    let eps = arma_residuals(&eta, &params.phi, &params.theta);
    Ok(eps[order.conditioning().min(eps.len())..]
        .iter()
        .map(|e| e * e)
        .sum())
}

/// Differenced data with the intercept column prepended.
struct Prepared {
    yd: Array1<f64>,
    design: Array2<f64>,
    m: usize,
}

struct Profile {
    css: f64,
    gamma: Array1<f64>,
}

impl Prepared {
    fn new(
        y: &[f64],
        x: ArrayView2<'_, f64>,
        order: ArimaOrder,
        conditioning: usize,
    ) -> Result<Self> {
        let yd = Array1::from(difference(y, order.d)?);
        let xd = difference_columns(x, order.d);
        let n = yd.len();
        let mut design = Array2::<f64>::ones((n, xd.ncols() + 1));
        design.slice_mut(s![.., 1..]).assign(&xd);
        Ok(Self {
            yd,
            design,
            m: order.conditioning().max(conditioning),
        })
    }

    fn profile(&self, phi: &[f64], theta: &[f64]) -> Result<Profile> {
        let fy = filter_columns(&self.yd.clone().insert_axis(Axis(1)), phi, theta);
        let fa = filter_columns(&self.design, phi, theta);
        let n = self.yd.len();
        let w = fy.slice(s![self.m..n, 0]);
        let z = fa.slice(s![self.m..n, ..]);
        let gram: Array2<f64> = z.t().dot(&z);
        let rhs: Array1<f64> = z.t().dot(&w);
        let gamma = match linalg::cholesky_solve(gram.view(), rhs.view()) {
            Ok(g) => g,
            Err(_) => linalg::lstsq(z, w)?,
        };
        let resid = &w - &z.dot(&gamma);
        Ok(Profile {
            css: resid.dot(&resid),
            gamma,
        })
    }
}

fn to_coeffs(u: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let squash = |v: &f64| v.tanh().clamp(-PACF_LIMIT, PACF_LIMIT);
    let ar_pacf: Vec<f64> = u[..p].iter().map(squash).collect();
    let ma_pacf: Vec<f64> = u[p..].iter().map(squash).collect();
    let phi = poly::pacf_to_ar(&ar_pacf);
    let theta = poly::pacf_to_ar(&ma_pacf).into_iter().map(|c| -c).collect();
    (phi, theta)
}

fn from_coeffs(phi: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    let ar =
        poly::ar_to_pacf(phi).ok_or_else(|| Error::NonStationary(format!("start AR {phi:?}")))?;
    let ma = poly::ar_to_pacf(&neg)
        .ok_or_else(|| Error::NonStationary(format!("start MA {theta:?}")))?;
    Ok(ar
        .iter()
        .chain(&ma)
        .map(|r| r.clamp(-PACF_LIMIT, PACF_LIMIT).atanh())
        .collect())
}

/// Designs wider than this alternate between the ARMA coefficients and the
/// regression coefficients instead of profiling at every simplex point.
const PROFILE_MAX_COLUMNS: usize = 16;
const MAX_ALTERNATIONS: usize = 200;

fn simplex_options(dim: usize, initial_step: f64) -> NelderMeadOptions {
    NelderMeadOptions {
        initial_step,
        f_tol: 1e-11,
        x_tol: 1e-7,
        max_evals: 400 + 300 * dim,
    }
}

/// Simplex search on the profiled CSS: exact, one regression per point.
fn minimise_profiled(
    prep: &Prepared,
    u0: Vec<f64>,
    p: usize,
) -> Result<(Vec<f64>, Vec<f64>, Profile)> {
    let objective = |u: &[f64]| {
        let (phi, theta) = to_coeffs(u, p);
        prep.profile(&phi, &theta)
            .map(|p| p.css)
            .unwrap_or(f64::INFINITY)
    };
    let best = nelder_mead(objective, &u0, &simplex_options(u0.len(), 0.3));
    let (phi, theta) = to_coeffs(&best.x, p);
    let profile = prep.profile(&phi, &theta)?;
    Ok((phi, theta, profile))
}

/// Block coordinate descent: a simplex search over the ARMA coefficients
/// with the regression part held fixed, then the exact regression update
/// for the new coefficients. Each half-step cannot increase the CSS, and
/// the loop ends once a full pass gains less than a relative 1e-10.
fn minimise_alternating(
    prep: &Prepared,
    mut u: Vec<f64>,
    p: usize,
) -> Result<(Vec<f64>, Vec<f64>, Profile)> {
    let (mut phi, mut theta) = to_coeffs(&u, p);
    let mut profile = prep.profile(&phi, &theta)?;
    if u.is_empty() {
        return Ok((phi, theta, profile));
    }
    for pass in 0..MAX_ALTERNATIONS {
        let eta = &prep.yd - &prep.design.dot(&profile.gamma);
        let eta = eta.to_vec();
        let objective = |v: &[f64]| {
            let (ph, th) = to_coeffs(v, p);
            let eps = arma_residuals(&eta, &ph, &th);
            let css: f64 = eps[prep.m..].iter().map(|e| e * e).sum();
            if css.is_finite() {
                css
            } else {
                f64::INFINITY
            }
        };
        let step = if pass == 0 { 0.3 } else { 0.05 };
        let best = nelder_mead(objective, &u, &simplex_options(u.len(), step));
        let (ph, th) = to_coeffs(&best.x, p);
        let next = prep.profile(&ph, &th)?;
        if !(next.css <= profile.css) {
            break;
        }
        let gain = profile.css - next.css;
        u = best.x;
        phi = ph;
        theta = th;
        profile = next;
        if gain <= 1e-10 * profile.css.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((phi, theta, profile))
}

/// Fit with ARMA coefficients started at zero.
pub fn fit(y: &[f64], x: ArrayView2<'_, f64>, order: ArimaOrder) -> Result<DynRegModel> {
    fit_with(y, x, order, None, 0)
}

/// Fit with ARMA coefficients started at `start` (padded with zeros when
/// `start` is a nested smaller model).
pub fn fit_from(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    order: ArimaOrder,
    start: Option<&ArimaParams>,
) -> Result<DynRegModel> {
    fit_with(y, x, order, start, 0)
}

/// General fit. The objective skips the first `max(p, q, conditioning)`
/// differenced observations; a common `conditioning` puts fits of different
/// orders on the same sample so their AICs are comparable.
pub fn fit_with(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    order: ArimaOrder,
    start: Option<&ArimaParams>,
    conditioning: usize,
) -> Result<DynRegModel> {
    order.validate()?;
    check_dims(y, x)?;
    let k = x.ncols();
    let free = order.p + order.q + k + 2;
    let available = y
        .len()
        .saturating_sub(order.d + order.conditioning().max(conditioning));
    if available <= free {
        return Err(Error::InsufficientData(format!(
            "{available} usable observations for {free} parameters"
        )));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite data".into()));
    }
    let prep = Prepared::new(y, x, order, conditioning)?;
    match linalg::check_full_rank(prep.design.view()) {
        Err(Error::SingularDesign { column: 0 }) => {
            return Err(Error::Numerical("intercept column is degenerate".into()))
        }
        Err(Error::SingularDesign { column }) => {
            return Err(Error::SingularDesign { column: column - 1 })
        }
        other => other?,
    }

    let u0 = match start {
        Some(s) => {
            let mut phi = s.phi.clone();
            let mut theta = s.theta.clone();
            if phi.len() > order.p || theta.len() > order.q {
                return Err(Error::InvalidArgument(
                    "start model is not nested in the order".into(),
                ));
            }
            phi.resize(order.p, 0.0);
            theta.resize(order.q, 0.0);
            from_coeffs(&phi, &theta)?
        }
        None => vec![0.0; order.p + order.q],
    };
    let (phi, theta, profile) = if prep.design.ncols() > PROFILE_MAX_COLUMNS {
        minimise_alternating(&prep, u0, order.p)?
    } else {
        minimise_profiled(&prep, u0, order.p)?
    };
    if !profile.css.is_finite() {
        return Err(Error::Numerical(format!(
            "ARIMA{order} objective is not finite"
        )));
    }

    let n_eff = prep.yd.len() - prep.m;
    let sigma2 = profile.css / n_eff as f64;
    let loglik = -0.5 * n_eff as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let intercept = profile.gamma[0];
    let beta = profile.gamma.slice(s![1..]).to_vec();
    let aic = -2.0 * loglik + 2.0 * free as f64;

    let fitted = prep.design.dot(&profile.gamma);
    let eta: Vec<f64> = prep.yd.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let eps = super::estimate::arma_residuals(&eta, &phi, &theta);
    let n = y.len();
    let state = EndState {
        eta: eta[eta.len() - order.p.min(eta.len())..].to_vec(),
        resid: eps[eps.len() - order.q.min(eps.len())..].to_vec(),
        y: y[n - order.d..].to_vec(),
        x: (n - order.d..n).map(|t| x.row(t).to_vec()).collect(),
    };

    Ok(DynRegModel {
        order,
        beta,
        intercept,
        phi,
        theta,
        sigma2,
        aic,
        loglik,
        n_eff,
        css: profile.css,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub p_max: usize,
    pub q_max: usize,
    pub d: usize,
    /// Fit grid cells on the rayon pool.
    pub parallel: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            p_max: 3,
            q_max: 3,
            d: 0,
            parallel: false,
        }
    }
}

/// Fit every `(p, q)` up to the caps and keep the minimum-AIC model; ties go
/// to the smaller `p + q`, then the smaller `p`. Every candidate is
/// conditioned on the first `max(p_max, q_max)` observations.
pub fn select_order(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    opts: &SelectOptions,
) -> Result<(ArimaOrder, DynRegModel)> {
    if opts.p_max > MAX_ORDER_CAP || opts.q_max > MAX_ORDER_CAP {
        return Err(Error::InvalidArgument(format!(
            "order caps ({}, {}) exceed {MAX_ORDER_CAP}",
            opts.p_max, opts.q_max
        )));
    }
    let candidates: Vec<ArimaOrder> = (0..=opts.p_max)
        .flat_map(|p| (0..=opts.q_max).map(move |q| (p, q)))
        .map(|(p, q)| ArimaOrder { p, d: opts.d, q })
        .collect();
    let cond = opts.p_max.max(opts.q_max);
    let fits: Vec<Result<DynRegModel>> = if opts.parallel {
        candidates
            .par_iter()
            .map(|o| fit_with(y, x, *o, None, cond))
            .collect()
    } else {
        candidates
            .iter()
            .map(|o| fit_with(y, x, *o, None, cond))
            .collect()
    };
    let mut errors = Vec::new();
    let mut best: Option<DynRegModel> = None;
    for (order, res) in candidates.iter().zip(fits) {
        match res {
            Ok(m) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let key = |m: &DynRegModel| (m.order.p + m.order.q, m.order.p);
                        m.aic < b.aic || (m.aic == b.aic && key(&m) < key(b))
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => errors.push(format!("ARIMA{order}: {e}")),
        }
    }
    match best {
        Some(m) => Ok((m.order, m)),
        None => match errors.len() {
            1 => Err(Error::Numerical(errors.remove(0))),
            _ => Err(Error::Numerical(format!(
                "every candidate fit failed: {}",
                errors.join("; ")
            ))),
        },
    }
}
