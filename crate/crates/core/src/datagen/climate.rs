//! Seasonal synthetic daily climate, used as a bootstrap source when no
//! observed record is supplied.
//!
//! The defaults mimic a wet tropical coastal station: a pronounced summer
//! wet season (peak around mid-February), persistent wet spells and heavy
//! tailed daily totals, with evapotranspiration peaking in early summer.

use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{calendar, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateSpec {
    pub years: usize,
    pub start: NaiveDate,
    /// Wet-day probabilities after a dry / wet day, annual mean and
    /// seasonal amplitude.
    pub p_wet_dry: (f64, f64),
    pub p_wet_wet: (f64, f64),
    /// Gamma shape of wet-day totals and the seasonal range of its mean (mm).
    pub amount_shape: f64,
    pub amount_mean: (f64, f64),
    /// Day of year of the wettest point of the season.
    pub wet_peak_doy: u32,
    /// Evapotranspiration mean and amplitude (mm/day), its peak and noise.
    pub evap_mean: f64,
    pub evap_amplitude: f64,
    pub evap_peak_doy: u32,
    pub evap_noise: f64,
}

impl Default for ClimateSpec {
    fn default() -> Self {
        Self {
            years: 30,
            start: NaiveDate::from_ymd_opt(1990, 1, 1).expect("valid date"),
            p_wet_dry: (0.35, 0.25),
            p_wet_wet: (0.70, 0.20),
            amount_shape: 0.6,
            amount_mean: (14.0, 11.0),
            wet_peak_doy: 45,
            evap_mean: 4.0,
            evap_amplitude: 1.5,
            evap_peak_doy: 350,
            evap_noise: 0.6,
        }
    }
}

fn seasonal(doy: u32, peak: u32, mean: f64, amplitude: f64) -> f64 {
    mean + amplitude
        * (2.0 * PI * (doy as f64 - peak as f64) / calendar::DAYS_PER_YEAR as f64).cos()
}

/// Daily `rain` and `evap` columns.
pub fn synthetic_climate(spec: &ClimateSpec, seed: u64) -> Result<Dataset> {
    if spec.years == 0 {
        return Err(Error::InvalidArgument(
            "climate needs at least one year".into(),
        ));
    }
    if !(spec.amount_shape > 0.0) {
        return Err(Error::InvalidArgument(
            "amount shape must be positive".into(),
        ));
    }
    let start_doy = calendar::day_of_year(spec.start)?;
    let n = spec.years * calendar::DAYS_PER_YEAR;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.evap_noise.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rain = Vec::with_capacity(n);
    let mut evap = Vec::with_capacity(n);
    let mut wet = false;
    for i in 0..n {
        let doy = ((start_doy as usize - 1 + i) % calendar::DAYS_PER_YEAR) as u32 + 1;
        let (mean, amp) = if wet { spec.p_wet_wet } else { spec.p_wet_dry };
        let p = seasonal(doy, spec.wet_peak_doy, mean, amp).clamp(0.01, 0.99);
        wet = rng.gen::<f64>() < p;
        let amount = if wet {
            let m = seasonal(
                doy,
                spec.wet_peak_doy,
                spec.amount_mean.0,
                spec.amount_mean.1,
            )
            .max(0.5);
            let g = Gamma::new(spec.amount_shape, m / spec.amount_shape)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            // Round to the 0.1 mm gauge resolution.
            (g.sample(&mut rng) * 10.0).round() / 10.0
        } else {
            0.0
        };
        rain.push(amount);
        let e = seasonal(doy, spec.evap_peak_doy, spec.evap_mean, spec.evap_amplitude)
            + noise.sample(&mut rng);
        evap.push(if wet { 0.7 * e } else { e }.max(0.1));
    }
    Dataset::from_columns(spec.start, vec![("rain", rain), ("evap", evap)])
}
