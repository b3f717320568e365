//! Daily time-series containers, lag embedding and chronological splitting.

pub mod calendar;
mod csv_io;
mod metrics;
mod scaling;

use chrono::NaiveDate;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

pub use csv_io::{
    read_dataset_csv, read_dataset_csv_from, write_dataset_csv, write_dataset_csv_to,
    HEADER_CONTRACT,
};
pub use metrics::{mae, mse};
pub use scaling::ScalerParams;

use crate::error::{Error, Result};

/// A named daily series on the 365-day calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    t0: NaiveDate,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, t0: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("series `{name}` is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "series `{name}` has a non-finite value at index {i}"
            )));
        }
        calendar::day_of_year(t0)?;
        Ok(Self { name, t0, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn t0(&self) -> NaiveDate {
        self.t0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        calendar::add_days(self.t0, i).expect("t0 validated at construction")
    }

    /// Day of year (1..=365) of element `i`.
    pub fn day_of_year(&self, i: usize) -> u32 {
        let start = calendar::day_of_year(self.t0).expect("t0 validated at construction") as usize;
        ((start - 1 + i) % calendar::DAYS_PER_YEAR) as u32 + 1
    }

    /// Elements `range`, re-anchored at the first retained date.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {range:?} out of bounds for length {}",
                self.len()
            )));
        }
        Self::new(
            self.name.clone(),
            self.date(range.start),
            self.values[range].to_vec(),
        )
    }
}

/// Columns sharing a start date and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<TimeSeries>,
}

impl Dataset {
    pub fn new(columns: Vec<TimeSeries>) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one column".into()))?;
        for c in &columns[1..] {
            if c.t0 != first.t0 || c.len() != first.len() {
                return Err(Error::Shape(format!(
                    "column `{}` is not aligned with `{}`",
                    c.name, first.name
                )));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        Ok(Self { columns })
    }

    /// Build from raw vectors sharing `t0`.
    pub fn from_columns(t0: NaiveDate, columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        let series = columns
            .into_iter()
            .map(|(name, values)| TimeSeries::new(name, t0, values))
            .collect::<Result<Vec<_>>>()?;
        Self::new(series)
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t0(&self) -> NaiveDate {
        self.columns[0].t0
    }

    pub fn columns(&self) -> &[TimeSeries] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name()).collect()
    }

    pub fn has(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Result<&TimeSeries> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        Ok(self.get(name)?.values())
    }

    /// Day of year of row `i`.
    pub fn day_of_year(&self, i: usize) -> u32 {
        self.columns[0].day_of_year(i)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let cols = self
            .columns
            .iter()
            .map(|c| c.slice(range.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cols)
    }

    /// Replace or append a column.
    pub fn with_column(mut self, series: TimeSeries) -> Result<Self> {
        if let Some(slot) = self.columns.iter_mut().find(|c| c.name == series.name) {
            *slot = series;
        } else {
            self.columns.push(series);
        }
        Self::new(self.columns)
    }
}

/// Target vector plus a matrix of lagged predictor values.
///
/// Row `i` predicts the target at time `first_usable_index + i`. Columns are
/// predictor-major and lag-ascending: with predictors `(rain, evap)` and
/// lags `0..=2`, the order is `rain_lag0, rain_lag1, rain_lag2, evap_lag0, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    pub target: Vec<f64>,
    pub matrix: Array2<f64>,
    pub lag_count: usize,
    pub include_lag0: bool,
    pub first_usable_index: usize,
    pub column_names: Vec<String>,
    /// Lag (in days) of each matrix column.
    pub column_lags: Vec<usize>,
}

impl LaggedDesign {
    pub fn rows(&self) -> usize {
        self.target.len()
    }

    /// Time index (into the source dataset) of the target in row `row`.
    pub fn target_time(&self, row: usize) -> usize {
        self.first_usable_index + row
    }

    /// Time index (into the source dataset) of the value stored at `(row, col)`.
    pub fn source_time(&self, row: usize, col: usize) -> usize {
        self.target_time(row) - self.column_lags[col]
    }

    /// Contiguous block of rows.
    pub fn rows_range(&self, range: std::ops::Range<usize>) -> LaggedDesign {
        LaggedDesign {
            target: self.target[range.clone()].to_vec(),
            matrix: self.matrix.slice(s![range.clone(), ..]).to_owned(),
            lag_count: self.lag_count,
            include_lag0: self.include_lag0,
            first_usable_index: self.first_usable_index + range.start,
            column_names: self.column_names.clone(),
            column_lags: self.column_lags.clone(),
        }
    }
}

/// Build the lagged design for `target_name` from `predictor_names`.
///
/// With `include_lag0` each predictor contributes lags `0..=k`; otherwise
/// lags `1..=k`. Either way the first `k` rows of the dataset are consumed
/// and the design has `n - k` rows.
pub fn embed_lags(
    dataset: &Dataset,
    target_name: &str,
    predictor_names: &[&str],
    k: usize,
    include_lag0: bool,
) -> Result<LaggedDesign> {
    let n = dataset.len();
    if !include_lag0 && k == 0 {
        return Err(Error::InvalidArgument(
            "k must be at least 1 when lag 0 is excluded".into(),
        ));
    }
    if k >= n {
        return Err(Error::InsufficientData(format!(
            "lag count {k} needs more than {n} rows"
        )));
    }
    let target = dataset.values(target_name)?;
    let predictors = predictor_names
        .iter()
        .map(|p| dataset.values(p))
        .collect::<Result<Vec<_>>>()?;

    let lags: Vec<usize> = if include_lag0 {
        (0..=k).collect()
    } else {
        (1..=k).collect()
    };
    let m = n - k;
    let width = lags.len() * predictors.len();
    let mut matrix = Array2::<f64>::zeros((m, width));
    let mut column_names = Vec::with_capacity(width);
    let mut column_lags = Vec::with_capacity(width);
    for (pi, values) in predictors.iter().enumerate() {
        for (li, &lag) in lags.iter().enumerate() {
            let col = pi * lags.len() + li;
            for row in 0..m {
                matrix[[row, col]] = values[row + k - lag];
            }
            column_names.push(format!("{}_lag{}", predictor_names[pi], lag));
            column_lags.push(lag);
        }
    }
    Ok(LaggedDesign {
        target: target[k..].to_vec(),
        matrix,
        lag_count: k,
        include_lag0,
        first_usable_index: k,
        column_names,
        column_lags,
    })
}

/// Chronological train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    /// 60/20/20, used for the neural models.
    pub const NEURAL: SplitSpec = SplitSpec {
        train_frac: 0.6,
        val_frac: 0.2,
        test_frac: 0.2,
    };
    /// 80/0/20, used for ARIMA which has no validation stage.
    pub const ARIMA: SplitSpec = SplitSpec {
        train_frac: 0.8,
        val_frac: 0.0,
        test_frac: 0.2,
    };

    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative split fraction in {self:?}"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    /// Block sizes for `m` rows; the remainder goes to the test block.
    pub fn sizes(&self, m: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let floor = |f: f64| ((f * m as f64) + 1e-9).floor() as usize;
        let train = floor(self.train_frac).min(m);
        let val = floor(self.val_frac).min(m - train);
        let test = m - train - val;
        for (name, frac, size) in [
            ("train", self.train_frac, train),
            ("validation", self.val_frac, val),
            ("test", self.test_frac, test),
        ] {
            if frac > 0.0 && size == 0 {
                return Err(Error::InsufficientData(format!(
                    "{name} block is empty for {m} rows"
                )));
            }
        }
        Ok((train, val, test))
    }

    /// Index ranges of the three blocks.
    pub fn ranges(
        &self,
        m: usize,
    ) -> Result<(
        std::ops::Range<usize>,
        std::ops::Range<usize>,
        std::ops::Range<usize>,
    )> {
        let (a, b, _) = self.sizes(m)?;
        Ok((0..a, a..a + b, a + b..m))
    }
}

/// Things that can be cut into contiguous chronological blocks.
pub trait Splittable: Sized {
    fn split_len(&self) -> usize;
    fn take_range(&self, range: std::ops::Range<usize>) -> Self;
}

impl Splittable for LaggedDesign {
    fn split_len(&self) -> usize {
        self.rows()
    }

    fn take_range(&self, range: std::ops::Range<usize>) -> Self {
        self.rows_range(range)
    }
}

impl Splittable for Dataset {
    fn split_len(&self) -> usize {
        self.len()
    }

    /// Empty ranges are not representable as a dataset; callers of `split`
    /// on datasets must use fractions that yield nonempty blocks.
    fn take_range(&self, range: std::ops::Range<usize>) -> Self {
        self.slice(range)
            .expect("split produced an empty dataset block")
    }
}

impl<T: Clone> Splittable for Vec<T> {
    fn split_len(&self) -> usize {
        self.len()
    }

    fn take_range(&self, range: std::ops::Range<usize>) -> Self {
        self[range].to_vec()
    }
}

/// Chronological (train, validation, test) split.
pub fn split<S: Splittable>(data: &S, spec: &SplitSpec) -> Result<(S, S, S)> {
    let (a, b, c) = spec.ranges(data.split_len())?;
    Ok((data.take_range(a), data.take_range(b), data.take_range(c)))
}
