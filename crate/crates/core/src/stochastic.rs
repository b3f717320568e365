//! Simulation of ARFIMA(p, d, q) processes with fractional `d`.
//!
//! The pipeline is: Gaussian white noise, MA filter, AR recursion, then
//! fractional integration `(1-B)^{-d}` by convolution with a truncated
//! binomial expansion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

pub const DEFAULT_BURNIN: usize = 500;
pub const DEFAULT_WINDOW: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArfimaSpec {
    pub phi: Vec<f64>,
    pub d: f64,
    pub theta: Vec<f64>,
    pub sigma: f64,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    /// Truncation length of the fractional-integration filter.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_burnin() -> usize {
    DEFAULT_BURNIN
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl ArfimaSpec {
    pub fn white_noise(sigma: f64) -> Self {
        Self::new(vec![], 0.0, vec![], sigma)
    }

    pub fn new(phi: Vec<f64>, d: f64, theta: Vec<f64>, sigma: f64) -> Self {
        Self {
            phi,
            d,
            theta,
            sigma,
            burnin: DEFAULT_BURNIN,
            window: DEFAULT_WINDOW,
        }
    }

    /// Error process of the simple groundwater simulation:
    /// φ = (0.4, 0.2), d = 0.4, θ = 0.5.
    pub fn groundwater_default(sigma: f64) -> Self {
        Self::new(vec![0.4, 0.2], 0.4, vec![0.5], sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.abs() < 0.5) {
            return Err(Error::NonStationary(format!(
                "|d| = {} must be below 0.5",
                self.d.abs()
            )));
        }
        if !poly::is_stationary(&self.phi) {
            return Err(Error::NonStationary(format!(
                "AR coefficients {:?}",
                self.phi
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma {} must be finite and nonnegative",
                self.sigma
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "MA coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficients π₀..π_n of the binomial expansion of `(1-B)^d`.
pub fn fracdiff_coeffs(d: f64, n: usize) -> Vec<f64> {
    let mut pi = Vec::with_capacity(n + 1);
    pi.push(1.0);
    for k in 1..=n {
        let prev = pi[k - 1];
        pi.push(prev * ((k as f64 - 1.0 - d) / k as f64));
    }
    pi
}

fn white_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

fn arma_filter(eps: &[f64], phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let n = eps.len();
    let mut out = vec![0.0; n];
    for t in 0..n {
        let mut v = eps[t];
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v += th * eps[t - j - 1];
            }
        }
        for (i, ph) in phi.iter().enumerate() {
            if t > i {
                v += ph * out[t - i - 1];
            }
        }
        out[t] = v;
    }
    out
}

/// Pure ARMA path: the `d = 0` special case of [`simulate_arfima`].
pub fn simulate_arma(
    phi: &[f64],
    theta: &[f64],
    sigma: f64,
    burnin: usize,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let eps = white_noise(n + burnin, sigma, seed);
    arma_filter(&eps, phi, theta).split_off(burnin)
}

/// Simulate `n` values of the process described by `spec`.
pub fn simulate_arfima(spec: &ArfimaSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "simulation length must be at least 1".into(),
        ));
    }
    if spec.d == 0.0 {
        return Ok(simulate_arma(
            &spec.phi,
            &spec.theta,
            spec.sigma,
            spec.burnin,
            n,
            seed,
        ));
    }
    let total = n + spec.burnin;
    let eps = white_noise(total, spec.sigma, seed);
    let x = arma_filter(&eps, &spec.phi, &spec.theta);
    let psi = fracdiff_coeffs(-spec.d, spec.window);
    let y: Vec<f64> = (spec.burnin..total)
        .map(|t| {
            let reach = t.min(spec.window);
            (0..=reach).map(|k| psi[k] * x[t - k]).sum()
        })
        .collect();
    Ok(y)
}
