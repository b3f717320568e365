//! Lagged rainfall response with interception and large-event attenuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{calendar, TimeSeries};
use crate::stats::quantile;
use crate::stochastic::{simulate_arfima, ArfimaSpec};

/// Gamma-shaped distributed-lag kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaLagSpec {
    pub a: f64,
    pub b: f64,
    pub t_mem: usize,
    /// Sum of the weights.
    pub total_scale: f64,
}

impl Default for GammaLagSpec {
    fn default() -> Self {
        Self {
            a: 3.0,
            b: 2.0,
            t_mem: 20,
            total_scale: DEFAULT_TOTAL_SCALE,
        }
    }
}

/// Chosen so that, with the default noise and synthetic climate, the rain
/// signal carries roughly four times the variance of the noise.
pub const DEFAULT_TOTAL_SCALE: f64 = 0.08;

impl GammaLagSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) || !(self.b > 0.0) || self.t_mem == 0 || !self.total_scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma kernel needs a > 1, b > 0, t_mem ≥ 1 (got a={}, b={}, t_mem={})",
                self.a, self.b, self.t_mem
            )));
        }
        Ok(())
    }
}

/// `w_s ∝ s^(a-1) e^(-s/b)` for `s = 1..=t_mem`, summing to `total_scale`.
/// Element `s - 1` holds lag `s`.
pub fn gamma_lag_weights(spec: &GammaLagSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let raw: Vec<f64> = (1..=spec.t_mem)
        .map(|s| {
            let s = s as f64;
            ((spec.a - 1.0) * s.ln() - s / spec.b).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw
        .into_iter()
        .map(|w| w / total * spec.total_scale)
        .collect())
}

/// Interception of small events and damping of extreme ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RainCropSpec {
    pub low_quantile: f64,
    pub high_quantile: f64,
    pub knee_mm: f64,
    pub attenuation: f64,
}

impl Default for RainCropSpec {
    fn default() -> Self {
        Self {
            low_quantile: 0.40,
            high_quantile: 0.95,
            knee_mm: 100.0,
            attenuation: 0.25,
        }
    }
}

impl RainCropSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low_quantile
            && self.low_quantile < self.high_quantile
            && self.high_quantile <= 1.0)
        {
            return Err(Error::InvalidArgument(
                "crop quantiles must satisfy 0 ≤ low < high ≤ 1".into(),
            ));
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(Error::InvalidArgument(
                "attenuation must lie in (0, 1]".into(),
            ));
        }
        if !(self.knee_mm >= 0.0) {
            return Err(Error::InvalidArgument("knee must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Thresholds of a crop, fixed from one rainfall record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropThresholds {
    pub q_low: f64,
    pub q_high: f64,
    pub knee: f64,
    pub attenuation: f64,
}

impl CropThresholds {
    /// Quantiles of the nonzero values of `rain`.
    pub fn from_rain(rain: &[f64], spec: &RainCropSpec) -> Result<Self> {
        spec.validate()?;
        check_rain(rain)?;
        let wet: Vec<f64> = rain.iter().copied().filter(|v| *v > 0.0).collect();
        let (q_low, q_high) = if wet.is_empty() {
            (0.0, f64::INFINITY)
        } else {
            (
                quantile(&wet, spec.low_quantile),
                quantile(&wet, spec.high_quantile),
            )
        };
        Ok(Self {
            q_low,
            q_high,
            knee: spec.knee_mm,
            attenuation: spec.attenuation,
        })
    }

    /// Where attenuation starts: the knee, or `q_high` if that is larger
    /// (pivoting at the knee there would make the map jump downwards).
    pub fn pivot(&self) -> f64 {
        self.knee.max(self.q_high)
    }

    /// Values up to `q_low` vanish; the excess above the pivot is scaled
    /// by the attenuation.
    pub fn apply_value(&self, v: f64) -> f64 {
        let pivot = self.pivot();
        if v <= self.q_low {
            0.0
        } else if v > pivot {
            pivot + self.attenuation * (v - pivot)
        } else {
            v
        }
    }

    pub fn apply(&self, rain: &[f64]) -> Vec<f64> {
        rain.iter().map(|&v| self.apply_value(v)).collect()
    }
}

fn check_rain(rain: &[f64]) -> Result<()> {
    if let Some(i) = rain.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rainfall at index {i} is {} (must be finite and ≥ 0)",
            rain[i]
        )));
    }
    Ok(())
}

pub fn crop_rainfall(rain: &[f64], spec: &RainCropSpec) -> Result<Vec<f64>> {
    Ok(CropThresholds::from_rain(rain, spec)?.apply(rain))
}

/// `β₀ + Σ_s w_s c_{t-s}` for every `t ≥ t_mem`, where `c` is the cropped rain.
pub fn lagged_response(cropped: &[f64], weights: &[f64], beta0: f64) -> Vec<f64> {
    let m = weights.len();
    (m..cropped.len())
        .map(|t| {
            beta0
                + weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * cropped[t - 1 - k])
                    .sum::<f64>()
        })
        .collect()
}

/// Level series driven by lagged cropped rainfall plus long-memory noise.
/// The first `t_mem` days have no complete history and are dropped, so the
/// result starts `t_mem` days after `rain`.
pub fn simulate_simple_gw(
    rain: &TimeSeries,
    gamma: &GammaLagSpec,
    crop: &RainCropSpec,
    noise: &ArfimaSpec,
    beta0: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let weights = gamma_lag_weights(gamma)?;
    if rain.len() <= gamma.t_mem {
        return Err(Error::InsufficientData(format!(
            "{} days of rain cannot feed a {}-day memory",
            rain.len(),
            gamma.t_mem
        )));
    }
    let cropped = crop_rainfall(rain.values(), crop)?;
    let mut y = lagged_response(&cropped, &weights, beta0);
    let eps = simulate_arfima(noise, y.len(), seed)?;
    for (v, e) in y.iter_mut().zip(eps) {
        *v += e;
    }
    TimeSeries::new("level", calendar::add_days(rain.t0(), gamma.t_mem)?, y)
}
