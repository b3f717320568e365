//! Seasonal block bootstrap of daily series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{calendar, Dataset, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSpec {
    pub mean_block_days: usize,
    /// Block lengths are uniform on `mean ± block_length_spread`.
    pub block_length_spread: usize,
    /// Largest day-of-year offset between a block's source and output start.
    pub start_jitter_days: usize,
    pub target_years: usize,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            mean_block_days: 60,
            block_length_spread: 14,
            start_jitter_days: 14,
            target_years: 10,
            seed: 0,
        }
    }
}

impl BootstrapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mean_block_days == 0 {
            return Err(Error::InvalidArgument(
                "mean block length must be at least 1 day".into(),
            ));
        }
        if self.target_years == 0 {
            return Err(Error::InvalidArgument(
                "target_years must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn length_range(&self) -> (usize, usize) {
        let lo = self
            .mean_block_days
            .saturating_sub(self.block_length_spread)
            .max(1);
        (lo, self.mean_block_days + self.block_length_spread)
    }
}

/// One copied block: output rows `out_start..out_start+len` come from
/// source rows `src_start..src_start+len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub out_start: usize,
    pub src_start: usize,
    pub len: usize,
}

/// A resampled dataset together with the blocks it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrapped {
    pub data: Dataset,
    pub blocks: Vec<Block>,
}

impl Bootstrapped {
    /// Source row of every output row.
    pub fn source_index(&self) -> Vec<usize> {
        let mut out = vec![0; self.data.len()];
        for b in &self.blocks {
            for k in 0..b.len {
                out[b.out_start + k] = b.src_start + k;
            }
        }
        out
    }
}

/// Resample `target_years` of data, starting on the source's first date.
pub fn block_bootstrap(source: &Dataset, spec: &BootstrapSpec) -> Result<Bootstrapped> {
    block_bootstrap_days(source, spec, spec.target_years * calendar::DAYS_PER_YEAR)
}

/// As [`block_bootstrap`] but with an explicit output length in days.
///
/// All columns share the same block indices, so cross-correlations within a
/// block are carried over exactly.
pub fn block_bootstrap_days(
    source: &Dataset,
    spec: &BootstrapSpec,
    days: usize,
) -> Result<Bootstrapped> {
    spec.validate()?;
    if source.len() < 2 * calendar::DAYS_PER_YEAR {
        return Err(Error::InsufficientData(format!(
            "bootstrap source has {} days, at least two years ({}) are needed",
            source.len(),
            2 * calendar::DAYS_PER_YEAR
        )));
    }
    let n = source.len();
    let src_doy: Vec<u32> = (0..n).map(|i| source.day_of_year(i)).collect();
    let start_doy = src_doy[0] as usize - 1;
    let (lo, hi) = spec.length_range();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut blocks = Vec::new();
    let mut pos = 0;
    let mut candidates = Vec::with_capacity(n);
    while pos < days {
        let len = rng.gen_range(lo..=hi).min(days - pos);
        let out_doy = ((start_doy + pos) % calendar::DAYS_PER_YEAR) as u32 + 1;
        candidates.clear();
        candidates.extend((0..=n - len).filter(|&j| {
            calendar::doy_distance(src_doy[j], out_doy) as usize <= spec.start_jitter_days
        }));
        if candidates.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no source block of {len} days starts within {} days of day-of-year {out_doy}",
                spec.start_jitter_days
            )));
        }
        let src_start = candidates[rng.gen_range(0..candidates.len())];
        blocks.push(Block {
            out_start: pos,
            src_start,
            len,
        });
        pos += len;
    }
    let mut columns = Vec::new();
    for col in source.columns() {
        let values = col.values();
        let mut out = Vec::with_capacity(days);
        for b in &blocks {
            out.extend_from_slice(&values[b.src_start..b.src_start + b.len]);
        }
        columns.push(TimeSeries::new(col.name(), source.t0(), out)?);
    }
    Ok(Bootstrapped {
        data: Dataset::new(columns)?,
        blocks,
    })
}
